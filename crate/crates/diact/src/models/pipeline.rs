//! The chained three-level predictor.
//!
//! Per segment, in dialog order: predict L1; a structuring (gate) L1
//! prediction fixes the lower levels to Nil; otherwise predict the L2 set,
//! then the L3 set. Context features come from the gold annotations by
//! default (the upper-bound protocol); with `use_predicted_context` the
//! pipeline feeds its own predictions back instead.

use serde::{Deserialize, Serialize};

use crate::corpus::{Dialog, LabelSpace, Speaker};
use crate::models::context::{GoldLabels, LabelSource};
use crate::models::net::{predict_multi, predict_single};
use crate::models::train::MULTI_LABEL_THRESHOLD;
use crate::models::{LevelClassifier, ModelError};

pub struct HierarchicalPipeline {
    pub l1: LevelClassifier,
    pub l2: LevelClassifier,
    pub l3: LevelClassifier,
    /// Feed pipeline predictions back as context instead of gold labels.
    pub use_predicted_context: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentPrediction {
    pub dialog_id: String,
    pub position: usize,
    pub speaker: Speaker,
    pub l1: usize,
    pub l2: Vec<usize>,
    pub l3: Vec<usize>,
    pub l1_probs: Vec<f64>,
    /// Absent when the gate fixed the lower levels.
    pub l2_probs: Option<Vec<f64>>,
    pub l3_probs: Option<Vec<f64>>,
}

/// Grows position by position as the pipeline walks a dialog.
#[derive(Default)]
struct PredictionBuffer {
    l1: Vec<usize>,
    l2: Vec<Vec<usize>>,
    l3: Vec<Vec<usize>>,
}

impl LabelSource for PredictionBuffer {
    fn len(&self) -> usize {
        self.l1.len()
    }
    fn l1(&self, position: usize) -> Option<usize> {
        self.l1.get(position).copied()
    }
    fn l2(&self, position: usize) -> &[usize] {
        self.l2.get(position).map(Vec::as_slice).unwrap_or(&[])
    }
    fn l3(&self, position: usize) -> &[usize] {
        self.l3.get(position).map(Vec::as_slice).unwrap_or(&[])
    }
}

impl HierarchicalPipeline {
    pub fn new(
        l1: LevelClassifier,
        l2: LevelClassifier,
        l3: LevelClassifier,
    ) -> Result<HierarchicalPipeline, ModelError> {
        use crate::corpus::Level;
        for (classifier, expect) in [(&l1, Level::L1), (&l2, Level::L2), (&l3, Level::L3)] {
            if classifier.level != expect {
                return Err(ModelError::BadConfig(format!(
                    "pipeline slot {expect} holds a {} classifier",
                    classifier.level
                )));
            }
        }
        Ok(HierarchicalPipeline {
            l1,
            l2,
            l3,
            use_predicted_context: false,
        })
    }

    pub fn with_predicted_context(mut self, enabled: bool) -> HierarchicalPipeline {
        self.use_predicted_context = enabled;
        self
    }
}

/// Runs the pipeline over one dialog. The output always satisfies the gate
/// invariant: a structuring L1 prediction carries empty L2/L3 sets.
pub fn hierarchical_predict(
    pipeline: &HierarchicalPipeline,
    dialog: &Dialog,
) -> Result<Vec<SegmentPrediction>, ModelError> {
    let space = LabelSpace::canonical();
    let gold = GoldLabels(dialog);
    let mut buffer = PredictionBuffer::default();
    let mut predictions = Vec::with_capacity(dialog.segments.len());
    for seg in &dialog.segments {
        let position = seg.position;
        let source: &dyn LabelSource = if pipeline.use_predicted_context {
            &buffer
        } else {
            &gold
        };
        let l1_probs = pipeline.l1.predict_probs(dialog, position, source)?;
        let l1_pred = predict_single(&l1_probs);
        buffer.l1.push(l1_pred);

        let (l2_pred, l2_probs, l3_pred, l3_probs) = if space.is_gate(l1_pred) {
            (Vec::new(), None, Vec::new(), None)
        } else {
            let source: &dyn LabelSource = if pipeline.use_predicted_context {
                &buffer
            } else {
                &gold
            };
            let l2_probs = pipeline.l2.predict_probs(dialog, position, source)?;
            let l2_pred = predict_multi(&l2_probs, MULTI_LABEL_THRESHOLD);
            buffer.l2.push(l2_pred.clone());
            let source: &dyn LabelSource = if pipeline.use_predicted_context {
                &buffer
            } else {
                &gold
            };
            let l3_probs = pipeline.l3.predict_probs(dialog, position, source)?;
            let l3_pred = predict_multi(&l3_probs, MULTI_LABEL_THRESHOLD);
            (l2_pred, Some(l2_probs), l3_pred, Some(l3_probs))
        };
        if buffer.l2.len() == position {
            buffer.l2.push(l2_pred.clone());
        }
        buffer.l3.push(l3_pred.clone());

        predictions.push(SegmentPrediction {
            dialog_id: dialog.id.clone(),
            position,
            speaker: seg.speaker,
            l1: l1_pred,
            l2: l2_pred,
            l3: l3_pred,
            l1_probs,
            l2_probs,
            l3_probs,
        });
    }
    Ok(predictions)
}
