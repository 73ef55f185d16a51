//! Per-segment prediction output in JSON lines: one record per segment with
//! the gold and predicted labels at every level plus the head
//! probabilities. Covers run 0 of a hierarchical spec, pooled over the
//! held-out folds in segment order.

use serde::Serialize;

use crate::corpus::{Level, Speaker};
use crate::harness::spec::{ExperimentSpec, PipelineSpec};
use crate::harness::{Experiment, HarnessError};
use crate::models::hierarchical_predict;
use crate::text::build_vocab;

#[derive(Serialize)]
struct LabelRecord {
    l1: String,
    l2: Vec<String>,
    l3: Vec<String>,
}

#[derive(Serialize)]
struct ProbRecord {
    l1: Vec<f64>,
    l2: Option<Vec<f64>>,
    l3: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct PredictionRecord {
    dialog_id: String,
    position: usize,
    speaker: Speaker,
    gold: LabelRecord,
    predicted: LabelRecord,
    probs: ProbRecord,
}

/// Trains run 0 of the hierarchical spec and emits its held-out predictions
/// as JSON lines.
pub fn run0_hierarchical_jsonl(spec: &ExperimentSpec, jobs: usize) -> Result<String, HarnessError> {
    let _ = jobs; // folds run sequentially; training dominates anyway
    spec.validate()?;
    let corpus = spec.load_corpus()?;
    let vocab = build_vocab(&corpus, spec.min_count);
    let folds = crate::corpus::make_folds(&corpus, spec.folds.k, spec.folds.seed)?;
    let pipeline_spec = spec.pipeline.clone().unwrap_or_else(PipelineSpec::best_reported);
    let embedding_seed = spec
        .embedding
        .seed
        .unwrap_or(crate::neural::RandomSource::new(spec.effective_base_seed()).derive(0xE3B).seed());
    let embeddings = super::provision_embeddings(spec, &vocab, pipeline_spec.l1.embedding_dim, embedding_seed)?;
    let experiment = Experiment {
        spec,
        corpus: &corpus,
        vocab: &vocab,
        embeddings: &embeddings,
        folds: &folds,
    };
    let space = corpus.label_space;
    let name = |level: Level, idx: usize| space.name(level, idx).to_string();
    let names = |level: Level, set: &[usize]| -> Vec<String> {
        set.iter().map(|&i| name(level, i)).collect()
    };

    let mut records: Vec<(String, String)> = Vec::new();
    for fold in 0..folds.k {
        let (pipeline, _, eval_ids) = experiment
            .train_pipeline(&pipeline_spec, spec.effective_base_seed(), fold)
            .map_err(|message| HarnessError::Cell {
                config: "hierarchical".into(),
                run: 0,
                fold,
                message,
            })?;
        for id in &eval_ids {
            let dialog = corpus.dialog(id).expect("fold dialog");
            for (seg, pred) in dialog
                .segments
                .iter()
                .zip(hierarchical_predict(&pipeline, dialog)?)
            {
                let record = PredictionRecord {
                    dialog_id: dialog.id.clone(),
                    position: seg.position,
                    speaker: seg.speaker,
                    gold: LabelRecord {
                        l1: name(Level::L1, seg.l1),
                        l2: names(Level::L2, &seg.l2),
                        l3: names(Level::L3, &seg.l3),
                    },
                    predicted: LabelRecord {
                        l1: name(Level::L1, pred.l1),
                        l2: names(Level::L2, &pred.l2),
                        l3: names(Level::L3, &pred.l3),
                    },
                    probs: ProbRecord {
                        l1: pred.l1_probs,
                        l2: pred.l2_probs,
                        l3: pred.l3_probs,
                    },
                };
                let key = format!("{}#{:06}", dialog.id, seg.position);
                records.push((key, serde_json::to_string(&record)?));
            }
        }
    }
    records.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = String::new();
    for (_, line) in records {
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}
