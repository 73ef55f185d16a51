//! Classifier and training configuration.

use serde::{Deserialize, Serialize};

use crate::corpus::Level;
use crate::models::ModelError;

/// Width of the dimensionality-reduction layer between the segment
/// representation and the output head.
pub const REDUCTION_DIM: usize = 100;

/// Segment representation variant. The recurrent encoder is a stack of five
/// GRU layers whose last-step outputs are concatenated; the convolutional
/// encoder runs three parallel temporal convolutions with max-over-time
/// pooling and concatenates the pooled vectors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum EncoderConfig {
    Rnn {
        #[serde(default = "default_rnn_layers")]
        layers: usize,
        #[serde(default = "default_hidden")]
        hidden_size: usize,
    },
    Cnn {
        #[serde(default = "default_wide_windows")]
        windows: Vec<usize>,
        #[serde(default = "default_filters")]
        filters_per_window: usize,
    },
}

fn default_rnn_layers() -> usize {
    5
}
fn default_hidden() -> usize {
    100
}
fn default_wide_windows() -> Vec<usize> {
    vec![3, 4, 5]
}
fn default_filters() -> usize {
    100
}

impl EncoderConfig {
    pub fn rnn(hidden_size: usize) -> EncoderConfig {
        EncoderConfig::Rnn {
            layers: 5,
            hidden_size,
        }
    }

    /// The narrow window set covering one to three consecutive tokens.
    pub fn cnn_narrow(filters_per_window: usize) -> EncoderConfig {
        EncoderConfig::Cnn {
            windows: vec![1, 2, 3],
            filters_per_window,
        }
    }

    /// The wide window set covering three to five consecutive tokens.
    pub fn cnn_wide(filters_per_window: usize) -> EncoderConfig {
        EncoderConfig::Cnn {
            windows: vec![3, 4, 5],
            filters_per_window,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            EncoderConfig::Rnn { layers, hidden_size } => {
                if *layers != 5 {
                    return Err(ModelError::BadConfig(format!(
                        "the recurrent encoder is a stack of exactly 5 GRU layers, got {layers}"
                    )));
                }
                if *hidden_size == 0 {
                    return Err(ModelError::BadConfig("hidden_size must be positive".into()));
                }
            }
            EncoderConfig::Cnn {
                windows,
                filters_per_window,
            } => {
                if windows.len() != 3 || windows.windows(2).any(|w| w[0] >= w[1]) || windows[0] == 0
                {
                    return Err(ModelError::BadConfig(format!(
                        "CNN windows must be 3 strictly increasing positive sizes, got {windows:?}"
                    )));
                }
                if *filters_per_window == 0 {
                    return Err(ModelError::BadConfig("filters_per_window must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Dimension of the segment representation this encoder produces.
    pub fn output_dim(&self) -> usize {
        match self {
            EncoderConfig::Rnn { layers, hidden_size } => layers * hidden_size,
            EncoderConfig::Cnn {
                windows,
                filters_per_window,
            } => windows.len() * filters_per_window,
        }
    }
}

/// One upper-level label-context source: the gold labels of the named level
/// for the current segment and/or `n_prev` preceding segments.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpperLevelSource {
    pub level: Level,
    #[serde(default)]
    pub include_current: bool,
    #[serde(default)]
    pub n_prev: usize,
}

/// Label-context configuration for one classifier.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextConfig {
    /// Same-level label blocks from up to three preceding segments.
    #[serde(default)]
    pub n_prev_same_level: usize,
    /// Blocks from levels above the classifier's level, in listed order.
    #[serde(default)]
    pub upper_levels: Vec<UpperLevelSource>,
}

fn depth(level: Level) -> usize {
    match level {
        Level::L1 => 1,
        Level::L2 => 2,
        Level::L3 => 3,
    }
}

impl ContextConfig {
    pub fn none() -> ContextConfig {
        ContextConfig::default()
    }

    pub fn same_level(n_prev: usize) -> ContextConfig {
        ContextConfig {
            n_prev_same_level: n_prev,
            upper_levels: Vec::new(),
        }
    }

    /// The best-performing configuration per classifier level: wide-window
    /// CNN context for L1 from three preceding segments; for L2 three
    /// preceding L2 blocks plus L1 of the current and first preceding
    /// segment; for L3 the L2 labels of the current segment only.
    pub fn best_reported(level: Level) -> ContextConfig {
        match level {
            Level::L1 => ContextConfig::same_level(3),
            Level::L2 => ContextConfig {
                n_prev_same_level: 3,
                upper_levels: vec![UpperLevelSource {
                    level: Level::L1,
                    include_current: true,
                    n_prev: 1,
                }],
            },
            Level::L3 => ContextConfig {
                n_prev_same_level: 0,
                upper_levels: vec![UpperLevelSource {
                    level: Level::L2,
                    include_current: true,
                    n_prev: 0,
                }],
            },
        }
    }

    pub fn validate(&self, classifier_level: Level) -> Result<(), ModelError> {
        if self.n_prev_same_level > 3 {
            return Err(ModelError::BadConfig(format!(
                "context uses at most 3 preceding segments, got {}",
                self.n_prev_same_level
            )));
        }
        for source in &self.upper_levels {
            if depth(source.level) >= depth(classifier_level) {
                return Err(ModelError::BadConfig(format!(
                    "{} context must come from a level strictly above {}",
                    source.level, classifier_level
                )));
            }
            if source.n_prev > 3 {
                return Err(ModelError::BadConfig(format!(
                    "upper-level context uses at most 3 preceding segments, got {}",
                    source.n_prev
                )));
            }
            if !source.include_current && source.n_prev == 0 {
                return Err(ModelError::BadConfig(
                    "an upper-level source must reference the current or a preceding segment"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

/// Everything needed to assemble one classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub context: ContextConfig,
    #[serde(default = "default_embedding_dim")]
    pub embedding_dim: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    /// Linear reduction by default; ReLU available by configuration.
    #[serde(default)]
    pub reduction_relu: bool,
    #[serde(default = "default_true")]
    pub embeddings_trainable: bool,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
}

fn default_embedding_dim() -> usize {
    200
}
fn default_max_len() -> usize {
    60
}
fn default_true() -> bool {
    true
}
fn default_dropout() -> f64 {
    0.5
}

impl ClassifierConfig {
    pub fn new(encoder: EncoderConfig, context: ContextConfig) -> ClassifierConfig {
        ClassifierConfig {
            encoder,
            context,
            embedding_dim: default_embedding_dim(),
            max_len: default_max_len(),
            reduction_relu: false,
            embeddings_trainable: true,
            dropout: default_dropout(),
        }
    }

    pub fn validate(&self, level: Level) -> Result<(), ModelError> {
        self.encoder.validate()?;
        self.context.validate(level)?;
        if self.embedding_dim == 0 || self.max_len == 0 {
            return Err(ModelError::BadConfig(
                "embedding_dim and max_len must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::BadConfig(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Training-loop hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub val_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> TrainingConfig {
        TrainingConfig {
            batch_size: 512,
            patience: 10,
            max_epochs: 200,
            learning_rate: 0.001,
            val_fraction: 0.1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(ModelError::BadConfig(
                "batch_size, patience, and max_epochs must be positive".into(),
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(ModelError::BadConfig(format!(
                "val_fraction must lie strictly between 0 and 1, got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }
}
