//! Classifier assembly and training: per-level classifiers over segment
//! encoders and label-context features, the hierarchical pipeline, and the
//! single-label combined baseline.

pub mod combined;
pub mod config;
pub mod context;
pub mod encoder;
pub mod net;
pub mod pipeline;
pub mod train;

pub use combined::{build_inventory, combined_single_label_train, CombinedClassifier, CombinedPrediction, ComboKey};
pub use config::{
    ClassifierConfig, ContextConfig, EncoderConfig, TrainingConfig, UpperLevelSource,
    REDUCTION_DIM,
};
pub use context::{context_width, encode_context, GoldLabels, LabelSource};
pub use net::{predict_multi, predict_single, HeadKind, SegmentClassifier};
pub use pipeline::{hierarchical_predict, HierarchicalPipeline, SegmentPrediction};
pub use train::{
    evaluate_correct, evaluate_metric, train, EpochStats, Sample, Target, TrainHistory,
    MULTI_LABEL_THRESHOLD,
};

use crate::corpus::{Corpus, Dialog, LabelSpace, Level};
use crate::neural::checkpoint::{self, CheckpointError};
use crate::neural::gradcheck::GradCheckModel;
use crate::neural::{NeuralError, Parameter, RandomSource};
use crate::text::{encode, EmbeddingTable, TextError, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("training requires non-empty train and validation splits")]
    EmptySplit,
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },
    #[error("checkpoint does not describe this model: {0}")]
    BadCheckpoint(String),
}

/// Head shape for a level: L1 is single-label over 11 classes, L2/L3 are
/// multi-label over 10/13 classes.
pub fn head_for_level(level: Level) -> HeadKind {
    match level {
        Level::L1 => HeadKind::Softmax,
        Level::L2 | Level::L3 => HeadKind::Sigmoid,
    }
}

/// A per-level classifier: the network plus the level and its context
/// configuration.
pub struct LevelClassifier {
    pub level: Level,
    pub config: ClassifierConfig,
    pub net: SegmentClassifier,
}

impl LevelClassifier {
    pub fn init(
        level: Level,
        config: ClassifierConfig,
        vocab: Vocabulary,
        embeddings: EmbeddingTable,
        rng: &mut RandomSource,
    ) -> Result<LevelClassifier, ModelError> {
        config.validate(level)?;
        if embeddings.dimension != config.embedding_dim
            || embeddings.matrix.shape() != [vocab.size(), config.embedding_dim]
        {
            return Err(ModelError::BadConfig(format!(
                "embedding table {:?} does not match vocab size {} x configured dim {}",
                embeddings.matrix.shape(),
                vocab.size(),
                config.embedding_dim
            )));
        }
        let space = LabelSpace::canonical();
        let ctx_width = context_width(&config.context, space, level);
        let net = SegmentClassifier::init(
            vocab,
            embeddings,
            &config.encoder,
            ctx_width,
            space.size(level),
            head_for_level(level),
            config.reduction_relu,
            config.dropout,
            config.max_len,
            rng,
        );
        Ok(LevelClassifier { level, config, net })
    }

    /// Builds samples for this classifier over the named dialogs, in the
    /// given dialog order. Gate-labeled segments are excluded for L2/L3;
    /// context features come from the gold annotations.
    pub fn samples(&self, corpus: &Corpus, dialog_ids: &[String]) -> Result<Vec<Sample>, ModelError> {
        prepare_level_samples(
            corpus,
            dialog_ids,
            self.level,
            &self.config.context,
            &self.net.vocab,
            self.config.max_len,
        )
    }

    /// Head probabilities for one segment with context drawn from `source`.
    pub fn predict_probs(
        &self,
        dialog: &Dialog,
        position: usize,
        source: &dyn LabelSource,
    ) -> Result<Vec<f64>, ModelError> {
        let space = LabelSpace::canonical();
        let seg = &dialog.segments[position];
        let encoded = encode(&seg.text, &self.net.vocab, self.config.max_len)?;
        let ctx = encode_context(source, position, &self.config.context, space, self.level);
        Ok(self.net.predict_probs(&encoded.indices, &ctx)?.data().to_vec())
    }

    pub fn save_checkpoint(&self, stem: &std::path::Path) -> Result<(), ModelError> {
        let manifest = serde_json::json!({
            "kind": "level_classifier",
            "level": self.level,
            "config": self.config,
            "classes": self.net.classes(),
            "head": self.net.head_kind,
            "vocab": self.net.vocab.tokens(),
        });
        checkpoint::save(stem, manifest, &self.net.all_params())?;
        Ok(())
    }

    pub fn load_checkpoint(stem: &std::path::Path) -> Result<LevelClassifier, ModelError> {
        let (manifest, params) = checkpoint::load(stem)?;
        let model = &manifest.model;
        if model["kind"] != "level_classifier" {
            return Err(ModelError::BadCheckpoint(format!(
                "manifest kind {}",
                model["kind"]
            )));
        }
        let level: Level = serde_json::from_value(model["level"].clone())
            .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
        let config: ClassifierConfig = serde_json::from_value(model["config"].clone())
            .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
        let tokens: Vec<String> = serde_json::from_value(model["vocab"].clone())
            .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
        // reserved entries are stored explicitly; drop them before rebuilding
        let content: Vec<String> = tokens.into_iter().skip(2).collect();
        let vocab = Vocabulary::from_tokens(content);
        let embeddings = EmbeddingTable {
            dimension: config.embedding_dim,
            matrix: crate::neural::Tensor::zeros(&[vocab.size(), config.embedding_dim]),
            trainable: config.embeddings_trainable,
        };
        let mut rng = RandomSource::new(0);
        let mut classifier = LevelClassifier::init(level, config, vocab, embeddings, &mut rng)?;
        restore_params(classifier.net.all_params_mut(), params)?;
        Ok(classifier)
    }
}

fn restore_params(
    mut targets: Vec<&mut Parameter>,
    saved: Vec<Parameter>,
) -> Result<(), ModelError> {
    if targets.len() != saved.len() {
        return Err(ModelError::BadCheckpoint(format!(
            "checkpoint has {} parameters, model expects {}",
            saved.len(),
            targets.len()
        )));
    }
    for (target, source) in targets.iter_mut().zip(saved) {
        if target.name != source.name || target.value.shape() != source.value.shape() {
            return Err(ModelError::BadCheckpoint(format!(
                "parameter {} {:?} does not match checkpoint entry {} {:?}",
                target.name,
                target.value.shape(),
                source.name,
                source.value.shape()
            )));
        }
        target.value = source.value;
    }
    Ok(())
}

/// Builds gold-context samples for a level over the named dialogs.
/// Gate-labeled segments are skipped for L2/L3: their lower-level labels are
/// fixed by the annotation scheme, so the classifiers neither train nor
/// standalone-evaluate on them.
pub fn prepare_level_samples(
    corpus: &Corpus,
    dialog_ids: &[String],
    level: Level,
    context: &ContextConfig,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<Sample>, ModelError> {
    let space = corpus.label_space;
    let mut samples = Vec::new();
    for id in dialog_ids {
        let Some(dialog) = corpus.dialog(id) else {
            return Err(ModelError::BadConfig(format!("unknown dialog id {id:?}")));
        };
        let source = GoldLabels(dialog);
        for seg in &dialog.segments {
            if level != Level::L1 && space.is_gate(seg.l1) {
                continue;
            }
            let encoded = encode(&seg.text, vocab, max_len)?;
            let ctx = encode_context(&source, seg.position, context, space, level);
            let target = match level {
                Level::L1 => Target::Single(seg.l1),
                Level::L2 => Target::Multi(seg.l2.clone()),
                Level::L3 => Target::Multi(seg.l3.clone()),
            };
            samples.push(Sample {
                dialog_id: dialog.id.clone(),
                position: seg.position,
                speaker: seg.speaker,
                indices: encoded.indices,
                context: ctx,
                target,
            });
        }
    }
    Ok(samples)
}

/// Builds a small classifier plus a fixed sample batch for finite-difference
/// verification of the assembled backward pass.
///
/// Training-scale initialization would defeat the check: 0.05-magnitude
/// embeddings decay through the five-layer GRU stack until recurrent-kernel
/// gradients sit below the finite-difference noise floor. The fixture
/// therefore draws embeddings and encoder kernels at a larger scale, keeping
/// every hidden state O(1), while the reduction and head keep their
/// fan-scaled init so the output probabilities stay away from saturation.
pub fn gradcheck_fixture(
    level: Level,
    encoder: EncoderConfig,
    context: ContextConfig,
    seed: u64,
) -> Result<(LevelClassifier, Vec<Sample>), ModelError> {
    use crate::corpus::{generate_synthetic, SynthConfig};
    use crate::text::{build_vocab, random_embeddings};

    let corpus = generate_synthetic(
        &SynthConfig {
            dialogs: 6,
            mean_segments: 5.0,
            ..SynthConfig::default()
        },
        seed,
    )
    .map_err(|e| ModelError::BadConfig(e.to_string()))?;
    let vocab = build_vocab(&corpus, 1);
    let config = ClassifierConfig {
        embedding_dim: 8,
        max_len: 12,
        ..ClassifierConfig::new(encoder, context)
    };
    let embeddings = random_embeddings(&vocab, config.embedding_dim, seed ^ 1);
    let mut rng = RandomSource::new(seed ^ 2);
    let mut classifier = LevelClassifier::init(level, config, vocab, embeddings, &mut rng)?;
    let mut boost = RandomSource::new(seed ^ 3);
    for p in classifier.net.all_params_mut() {
        if p.name == "embedding" {
            for row in 1..p.value.rows() {
                for v in p.value.row_mut(row) {
                    *v = boost.uniform_in(-0.7, 0.7);
                }
            }
        } else if p.name.starts_with("gru") || p.name.starts_with("conv") {
            for v in p.value.data_mut() {
                *v *= 3.0;
            }
        }
    }
    let ids = corpus.dialog_ids();
    let samples: Vec<Sample> = classifier
        .samples(&corpus, &ids)?
        .into_iter()
        .take(3)
        .collect();
    if samples.is_empty() {
        return Err(ModelError::EmptySplit);
    }
    Ok((classifier, samples))
}

/// Gradient-check adapter: a classifier plus a fixed sample batch whose mean
/// loss is the objective. Dropout is disabled so the loss is deterministic.
pub struct ClassifierGradCheck<'a> {
    pub net: &'a mut SegmentClassifier,
    pub samples: Vec<Sample>,
}

impl GradCheckModel for ClassifierGradCheck<'_> {
    fn loss_and_grad(&mut self) -> Result<f64, NeuralError> {
        for p in self.net.trainable_params_mut() {
            p.zero_grad();
        }
        let classes = self.net.classes();
        let scale = 1.0 / self.samples.len() as f64;
        let mut rng = RandomSource::new(0);
        let mut total = 0.0;
        for sample in &self.samples {
            let (probs, cache) = self
                .net
                .forward(&sample.indices, &sample.context, false, &mut rng)
                .map_err(to_neural)?;
            let (loss, mut grad) =
                train::loss_with_grad(self.net.head_kind, &probs, &sample.target, classes)
                    .map_err(to_neural)?;
            total += loss * scale;
            grad.data_mut().iter_mut().for_each(|g| *g *= scale);
            self.net.backward(&cache, &grad).map_err(to_neural)?;
        }
        Ok(total)
    }

    fn loss(&mut self) -> Result<f64, NeuralError> {
        let classes = self.net.classes();
        let scale = 1.0 / self.samples.len() as f64;
        let mut rng = RandomSource::new(0);
        let mut total = 0.0;
        for sample in &self.samples {
            let (probs, _) = self
                .net
                .forward(&sample.indices, &sample.context, false, &mut rng)
                .map_err(to_neural)?;
            let (loss, _) =
                train::loss_with_grad(self.net.head_kind, &probs, &sample.target, classes)
                    .map_err(to_neural)?;
            total += loss * scale;
        }
        Ok(total)
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.net.trainable_params_mut()
    }
}

fn to_neural(err: ModelError) -> NeuralError {
    match err {
        ModelError::Neural(e) => e,
        other => NeuralError::ShapeMismatch {
            context: "gradient check".into(),
            detail: other.to_string(),
        },
    }
}
