//! The single-label combined baseline: every (L1, L2-set, L3-set) triple
//! observed in the training data becomes one atomic class, predicted by a
//! softmax head over the same architecture as the best L1 classifier. Test
//! segments whose gold triple never occurred in training can never be
//! predicted exactly; they count as errors.

use std::collections::BTreeMap;

use crate::corpus::{Corpus, Dialog, Speaker};
use crate::models::config::{ClassifierConfig, TrainingConfig};
use crate::models::net::{predict_single, HeadKind, SegmentClassifier};
use crate::models::train::{train, Sample, Target, TrainHistory};
use crate::models::ModelError;
use crate::neural::RandomSource;
use crate::text::{encode, EmbeddingTable, Vocabulary};

/// One atomic class: the L1 index plus the sorted L2 and L3 index sets.
pub type ComboKey = (usize, Vec<usize>, Vec<usize>);

pub struct CombinedClassifier {
    pub inventory: Vec<ComboKey>,
    index: BTreeMap<ComboKey, usize>,
    /// Combined-label context blocks from this many preceding segments.
    pub n_prev: usize,
    pub config: ClassifierConfig,
    pub net: SegmentClassifier,
}

fn key_of(seg: &crate::corpus::Segment) -> ComboKey {
    (seg.l1, seg.l2.clone(), seg.l3.clone())
}

/// Collects the sorted triple inventory over the named dialogs.
pub fn build_inventory(corpus: &Corpus, dialog_ids: &[String]) -> Vec<ComboKey> {
    let mut keys: Vec<ComboKey> = Vec::new();
    for id in dialog_ids {
        if let Some(dialog) = corpus.dialog(id) {
            for seg in &dialog.segments {
                keys.push(key_of(seg));
            }
        }
    }
    keys.sort();
    keys.dedup();
    keys
}

impl CombinedClassifier {
    /// `config.context.n_prev_same_level` is reinterpreted as the number of
    /// preceding combined-label blocks; upper-level sources do not apply.
    pub fn init(
        inventory: Vec<ComboKey>,
        config: ClassifierConfig,
        vocab: Vocabulary,
        embeddings: EmbeddingTable,
        rng: &mut RandomSource,
    ) -> Result<CombinedClassifier, ModelError> {
        config.encoder.validate()?;
        if !config.context.upper_levels.is_empty() {
            return Err(ModelError::BadConfig(
                "the combined baseline has no upper levels".into(),
            ));
        }
        if inventory.is_empty() {
            return Err(ModelError::BadConfig("empty combined inventory".into()));
        }
        if embeddings.matrix.shape() != [vocab.size(), config.embedding_dim] {
            return Err(ModelError::BadConfig(format!(
                "embedding table {:?} does not match vocab size {} x configured dim {}",
                embeddings.matrix.shape(),
                vocab.size(),
                config.embedding_dim
            )));
        }
        let n_prev = config.context.n_prev_same_level;
        let classes = inventory.len();
        let net = SegmentClassifier::init(
            vocab,
            embeddings,
            &config.encoder,
            n_prev * classes,
            classes,
            HeadKind::Softmax,
            config.reduction_relu,
            config.dropout,
            config.max_len,
            rng,
        );
        let index = inventory
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, k)| (k, i))
            .collect();
        Ok(CombinedClassifier {
            inventory,
            index,
            n_prev,
            config,
            net,
        })
    }

    pub fn class_of(&self, key: &ComboKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Gold combined-label context: one-hot blocks for the `n_prev`
    /// preceding segments, nearest first; unseen triples and positions
    /// before the dialog start encode as all-zero blocks.
    fn context_for(&self, dialog: &Dialog, position: usize) -> Vec<f64> {
        let classes = self.inventory.len();
        let mut ctx = vec![0.0; self.n_prev * classes];
        for back in 1..=self.n_prev {
            if let Some(pos) = position.checked_sub(back) {
                let key = key_of(&dialog.segments[pos]);
                if let Some(idx) = self.class_of(&key) {
                    ctx[(back - 1) * classes + idx] = 1.0;
                }
            }
        }
        ctx
    }

    /// Training samples over the named dialogs; every triple must be in the
    /// inventory.
    pub fn samples(&self, corpus: &Corpus, dialog_ids: &[String]) -> Result<Vec<Sample>, ModelError> {
        let mut samples = Vec::new();
        for id in dialog_ids {
            let Some(dialog) = corpus.dialog(id) else {
                return Err(ModelError::BadConfig(format!("unknown dialog id {id:?}")));
            };
            for seg in &dialog.segments {
                let class = self.class_of(&key_of(seg)).ok_or_else(|| {
                    ModelError::BadConfig(format!(
                        "triple of dialog {} segment {} is outside the inventory",
                        dialog.id, seg.position
                    ))
                })?;
                let encoded = encode(&seg.text, &self.net.vocab, self.config.max_len)?;
                samples.push(Sample {
                    dialog_id: dialog.id.clone(),
                    position: seg.position,
                    speaker: seg.speaker,
                    indices: encoded.indices,
                    context: self.context_for(dialog, seg.position),
                    target: Target::Single(class),
                });
            }
        }
        Ok(samples)
    }

    /// Predicted triples for one dialog, gold context protocol.
    pub fn predict(&self, dialog: &Dialog) -> Result<Vec<CombinedPrediction>, ModelError> {
        let mut out = Vec::with_capacity(dialog.segments.len());
        for seg in &dialog.segments {
            let encoded = encode(&seg.text, &self.net.vocab, self.config.max_len)?;
            let ctx = self.context_for(dialog, seg.position);
            let probs = self.net.predict_probs(&encoded.indices, &ctx)?;
            let class = predict_single(probs.data());
            out.push(CombinedPrediction {
                dialog_id: dialog.id.clone(),
                position: seg.position,
                speaker: seg.speaker,
                predicted: self.inventory[class].clone(),
                gold: key_of(seg),
            });
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct CombinedPrediction {
    pub dialog_id: String,
    pub position: usize,
    pub speaker: Speaker,
    pub predicted: ComboKey,
    pub gold: ComboKey,
}

impl CombinedPrediction {
    pub fn is_exact(&self) -> bool {
        self.predicted == self.gold
    }
}

/// Builds the inventory from the training dialogs, assembles the classifier,
/// and trains it.
#[allow(clippy::too_many_arguments)]
pub fn combined_single_label_train(
    corpus: &Corpus,
    train_ids: &[String],
    val_ids: &[String],
    config: ClassifierConfig,
    training: &TrainingConfig,
    vocab: Vocabulary,
    embeddings: EmbeddingTable,
    seed: u64,
) -> Result<(CombinedClassifier, TrainHistory), ModelError> {
    // the inventory is closed over the training data (train + validation)
    let mut all_ids = train_ids.to_vec();
    all_ids.extend_from_slice(val_ids);
    let inventory = build_inventory(corpus, &all_ids);
    let mut rng = RandomSource::new(seed).derive(0x636f_6d62); // "comb"
    let mut classifier = CombinedClassifier::init(inventory, config, vocab, embeddings, &mut rng)?;
    let train_samples = classifier.samples(corpus, train_ids)?;
    let val_samples = classifier.samples(corpus, val_ids)?;
    let history = train(&mut classifier.net, &train_samples, &val_samples, training, seed)?;
    Ok((classifier, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthConfig};
    use crate::models::config::EncoderConfig;
    use crate::models::ContextConfig;
    use crate::text::{build_vocab, random_embeddings};

    fn tiny_config() -> ClassifierConfig {
        ClassifierConfig {
            embedding_dim: 8,
            max_len: 16,
            ..ClassifierConfig::new(
                EncoderConfig::Cnn {
                    windows: vec![1, 2, 3],
                    filters_per_window: 4,
                },
                ContextConfig::same_level(2),
            )
        }
    }

    #[test]
    fn single_combination_corpus_is_always_exact() {
        // every segment carries the same triple, so even an untrained
        // classifier with a one-class head matches exactly
        let corpus = generate_synthetic(
            &SynthConfig {
                dialogs: 4,
                mean_segments: 4.0,
                l1_marginals: Some(
                    [("Pregunta".to_string(), 1.0)].into_iter().collect(),
                ),
                l2_marginals: Some([("Precio".to_string(), 1.0)].into_iter().collect()),
                l3_marginals: Some([("Precio".to_string(), 1.0)].into_iter().collect()),
                l2_nil_rate: 0.0,
                l3_nil_rate: 0.0,
                ..SynthConfig::default()
            },
            3,
        )
        .unwrap();
        let ids = corpus.dialog_ids();
        let inventory = build_inventory(&corpus, &ids);
        assert_eq!(inventory.len(), 1);
        let vocab = build_vocab(&corpus, 1);
        let embeddings = random_embeddings(&vocab, 8, 1);
        let mut rng = RandomSource::new(2);
        let classifier =
            CombinedClassifier::init(inventory, tiny_config(), vocab, embeddings, &mut rng)
                .unwrap();
        for dialog in &corpus.dialogs {
            for pred in classifier.predict(dialog).unwrap() {
                assert!(pred.is_exact());
            }
        }
    }

    #[test]
    fn unseen_combination_can_never_be_matched() {
        let corpus = generate_synthetic(
            &SynthConfig {
                dialogs: 8,
                mean_segments: 5.0,
                ..SynthConfig::default()
            },
            9,
        )
        .unwrap();
        let ids = corpus.dialog_ids();
        // inventory built from the first half only
        let inventory = build_inventory(&corpus, &ids[..4]);
        let vocab = build_vocab(&corpus, 1);
        let embeddings = random_embeddings(&vocab, 8, 4);
        let mut rng = RandomSource::new(5);
        let classifier =
            CombinedClassifier::init(inventory, tiny_config(), vocab, embeddings, &mut rng)
                .unwrap();
        let mut unseen = 0;
        for id in &ids[4..] {
            let dialog = corpus.dialog(id).unwrap();
            for pred in classifier.predict(dialog).unwrap() {
                if classifier.class_of(&pred.gold).is_none() {
                    unseen += 1;
                    assert!(!pred.is_exact(), "unseen triple cannot be matched");
                }
            }
        }
        assert!(unseen > 0, "fixture should contain unseen combinations");
    }

    #[test]
    fn inventory_is_sorted_and_deduplicated() {
        let corpus = generate_synthetic(
            &SynthConfig {
                dialogs: 6,
                mean_segments: 6.0,
                ..SynthConfig::default()
            },
            11,
        )
        .unwrap();
        let ids = corpus.dialog_ids();
        let inventory = build_inventory(&corpus, &ids);
        let mut sorted = inventory.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(inventory, sorted);
        assert!(inventory.len() > 1);
        assert!(inventory.len() <= corpus.segment_count());
    }

    #[test]
    fn upper_level_context_is_rejected() {
        let corpus = generate_synthetic(
            &SynthConfig {
                dialogs: 3,
                ..SynthConfig::default()
            },
            1,
        )
        .unwrap();
        let vocab = build_vocab(&corpus, 1);
        let embeddings = random_embeddings(&vocab, 8, 0);
        let mut config = tiny_config();
        config.context.upper_levels.push(crate::models::UpperLevelSource {
            level: crate::corpus::Level::L1,
            include_current: true,
            n_prev: 0,
        });
        let ids = corpus.dialog_ids();
        let inventory = build_inventory(&corpus, &ids);
        let mut rng = RandomSource::new(0);
        assert!(CombinedClassifier::init(inventory, config, vocab, embeddings, &mut rng).is_err());
    }
}
