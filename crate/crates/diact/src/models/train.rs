//! Mini-batch training with Adam and early stopping on a validation metric.

use serde::{Deserialize, Serialize};

use crate::metrics::Speaker;
use crate::models::config::TrainingConfig;
use crate::models::net::{predict_multi, predict_single, HeadKind, SegmentClassifier};
use crate::models::ModelError;
use crate::neural::{
    adam_step, binary_cross_entropy_with_grad, categorical_cross_entropy_with_grad,
    AdamHyperParams, AdamState, RandomSource, Tensor,
};

/// The multi-label decision threshold on sigmoid heads.
pub const MULTI_LABEL_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Single(usize),
    /// Sorted label indices; empty means Nil.
    Multi(Vec<usize>),
}

/// One training or evaluation example, fully precomputed: token indices,
/// gold-label context vector, and the target.
#[derive(Clone, Debug)]
pub struct Sample {
    pub dialog_id: String,
    pub position: usize,
    pub speaker: Speaker,
    pub indices: Vec<usize>,
    pub context: Vec<f64>,
    pub target: Target,
}

fn target_tensor(target: &Target, classes: usize) -> Tensor {
    let mut t = Tensor::zeros(&[1, classes]);
    match target {
        Target::Single(idx) => t.data_mut()[*idx] = 1.0,
        Target::Multi(set) => {
            for &idx in set {
                t.data_mut()[idx] = 1.0;
            }
        }
    }
    t
}

/// Loss and its probability-space gradient for one sample.
pub(crate) fn loss_with_grad(
    head: HeadKind,
    probs: &Tensor,
    target: &Target,
    classes: usize,
) -> Result<(f64, Tensor), ModelError> {
    let targets = target_tensor(target, classes);
    let (loss, grad) = match head {
        HeadKind::Softmax => categorical_cross_entropy_with_grad(probs, &targets)?,
        HeadKind::Sigmoid => binary_cross_entropy_with_grad(probs, &targets)?,
    };
    Ok((loss, grad))
}

/// Decision-rule correctness: exact label for single-label heads, exact set
/// match for multi-label heads.
pub fn is_correct(net: &SegmentClassifier, probs: &[f64], target: &Target) -> bool {
    match (net.head_kind, target) {
        (HeadKind::Softmax, Target::Single(idx)) => predict_single(probs) == *idx,
        (HeadKind::Sigmoid, Target::Multi(set)) => {
            predict_multi(probs, MULTI_LABEL_THRESHOLD) == *set
        }
        _ => false,
    }
}

/// Per-sample correctness vector under the inference decision rule.
pub fn evaluate_correct(
    net: &SegmentClassifier,
    samples: &[Sample],
) -> Result<Vec<bool>, ModelError> {
    samples
        .iter()
        .map(|s| {
            let probs = net.predict_probs(&s.indices, &s.context)?;
            Ok(is_correct(net, probs.data(), &s.target))
        })
        .collect()
}

/// Fraction of correct decisions: accuracy for single-label heads, exact
/// match ratio for multi-label heads.
pub fn evaluate_metric(net: &SegmentClassifier, samples: &[Sample]) -> Result<f64, ModelError> {
    let correct = evaluate_correct(net, samples)?;
    Ok(correct.iter().filter(|c| **c).count() as f64 / correct.len().max(1) as f64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_metric: f64,
}

/// Trains the network in place: seeded shuffling per epoch, mini-batches of
/// `batch_size` (gradients averaged over the batch), one Adam step per
/// batch, early stopping after `patience` epochs without strict validation
/// improvement. The parameters of the best validation epoch are restored
/// before returning.
pub fn train(
    net: &mut SegmentClassifier,
    train_samples: &[Sample],
    val_samples: &[Sample],
    config: &TrainingConfig,
    seed: u64,
) -> Result<TrainHistory, ModelError> {
    config.validate()?;
    if train_samples.is_empty() || val_samples.is_empty() {
        return Err(ModelError::EmptySplit);
    }
    let classes = net.classes();
    let mut rng = RandomSource::new(seed).derive(0x7472_6169); // "trai"
    let mut adam = AdamState::new(AdamHyperParams {
        learning_rate: config.learning_rate,
        ..AdamHyperParams::default()
    });
    let mut order: Vec<usize> = (0..train_samples.len()).collect();
    let mut best_metric = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_snapshot = net.snapshot();
    let mut stale = 0usize;
    let mut history = Vec::new();

    for epoch in 0..config.max_epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let sample = &train_samples[i];
                let (probs, cache) = net.forward(&sample.indices, &sample.context, true, &mut rng)?;
                let (loss, mut grad) = loss_with_grad(net.head_kind, &probs, &sample.target, classes)?;
                if !loss.is_finite() {
                    return Err(ModelError::Diverged { epoch });
                }
                loss_sum += loss;
                grad.data_mut().iter_mut().for_each(|g| *g *= scale);
                net.backward(&cache, &grad)?;
            }
            adam_step(&mut net.trainable_params_mut(), &mut adam)?;
        }
        let train_loss = loss_sum / train_samples.len() as f64;
        let val_metric = evaluate_metric(net, val_samples)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_metric,
        });
        if val_metric > best_metric {
            best_metric = val_metric;
            best_epoch = epoch;
            best_snapshot = net.snapshot();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    net.restore(&best_snapshot);
    Ok(TrainHistory {
        epochs: history,
        best_epoch,
        best_val_metric: best_metric,
    })
}
