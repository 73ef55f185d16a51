//! Experiment specification files.
//!
//! A spec pins everything a run depends on: the corpus source, the mode,
//! the classifier configuration(s), fold parameters, run count, and seeds.
//! The spec hash is the SHA-256 digest of the canonicalized (sorted-key)
//! JSON and is embedded in every report for provenance.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    generate_synthetic, load_corpus, Corpus, CorpusFormat, Level, SynthConfig,
};
use crate::harness::HarnessError;
use crate::models::{ClassifierConfig, ContextConfig, EncoderConfig, TrainingConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentMode {
    L1,
    L2,
    L3,
    Hierarchical,
    Combined,
}

impl ExperimentMode {
    pub fn level(self) -> Option<Level> {
        match self {
            ExperimentMode::L1 => Some(Level::L1),
            ExperimentMode::L2 => Some(Level::L2),
            ExperimentMode::L3 => Some(Level::L3),
            _ => None,
        }
    }
}

impl std::fmt::Display for ExperimentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ExperimentMode::L1 => "l1",
            ExperimentMode::L2 => "l2",
            ExperimentMode::L3 => "l3",
            ExperimentMode::Hierarchical => "hierarchical",
            ExperimentMode::Combined => "combined",
        };
        write!(f, "{name}")
    }
}

/// Where the corpus comes from: a file on disk or the seeded generator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorpusSource {
    File {
        path: PathBuf,
        #[serde(default = "default_format")]
        format: CorpusFormatSpec,
    },
    Synthetic {
        synthetic: Box<SynthConfig>,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormatSpec {
    Json,
    Tsv,
}

fn default_format() -> CorpusFormatSpec {
    CorpusFormatSpec::Json
}

/// Embedding provisioning: a pre-trained word-vector file, or seeded random
/// initialization when no file is given.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSpec {
    pub pretrained: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedConfig {
    pub label: String,
    #[serde(flatten)]
    pub config: ClassifierConfig,
}

/// Per-level classifier configurations for the hierarchical pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub l1: ClassifierConfig,
    pub l2: ClassifierConfig,
    pub l3: ClassifierConfig,
    /// Feed pipeline predictions back as context instead of gold labels.
    #[serde(default)]
    pub predicted_context: bool,
}

impl PipelineSpec {
    /// The best-performing combination: wide-window CNN for L1, narrow
    /// windows for L2/L3, each with its best context configuration.
    pub fn best_reported() -> PipelineSpec {
        PipelineSpec {
            l1: ClassifierConfig::new(
                EncoderConfig::cnn_wide(100),
                ContextConfig::best_reported(Level::L1),
            ),
            l2: ClassifierConfig::new(
                EncoderConfig::cnn_narrow(100),
                ContextConfig::best_reported(Level::L2),
            ),
            l3: ClassifierConfig::new(
                EncoderConfig::cnn_narrow(100),
                ContextConfig::best_reported(Level::L3),
            ),
            predicted_context: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldSpec {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    5
}

impl Default for FoldSpec {
    fn default() -> FoldSpec {
        FoldSpec { k: 5, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub corpus: CorpusSource,
    pub mode: ExperimentMode,
    #[serde(default)]
    pub folds: FoldSpec,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Base seed for run derivation; run r uses base_seed + r. When absent
    /// from the file, `DIACT_SEED` (or 0) fills it in at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<u64>,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    #[serde(default)]
    pub embedding: EmbeddingSpec,
    /// Configuration sweep for the single-level modes.
    #[serde(default)]
    pub configs: Vec<NamedConfig>,
    /// Pipeline configuration for hierarchical mode (defaults to the best
    /// per-level combination).
    #[serde(default)]
    pub pipeline: Option<PipelineSpec>,
    /// Classifier for combined mode (defaults to the best L1 architecture
    /// with three preceding combined-label blocks).
    #[serde(default)]
    pub combined: Option<ClassifierConfig>,
}

fn default_runs() -> usize {
    10
}
fn default_min_count() -> usize {
    1
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<ExperimentSpec, HarnessError> {
        let content = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut spec: ExperimentSpec = serde_json::from_str(&content)?;
        if spec.base_seed.is_none() {
            let env = std::env::var("DIACT_SEED").ok().and_then(|v| v.parse().ok());
            spec.base_seed = Some(env.unwrap_or(0));
        }
        spec.validate()?;
        Ok(spec)
    }

    /// The resolved base seed (0 when neither the file nor the loader set one).
    pub fn effective_base_seed(&self) -> u64 {
        self.base_seed.unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.runs == 0 {
            return Err(HarnessError::Spec("runs must be at least 1".into()));
        }
        if self.folds.k < 2 {
            return Err(HarnessError::Spec("folds.k must be at least 2".into()));
        }
        self.training
            .validate()
            .map_err(|e| HarnessError::Spec(e.to_string()))?;
        match self.mode {
            ExperimentMode::L1 | ExperimentMode::L2 | ExperimentMode::L3 => {
                let level = self.mode.level().expect("level mode");
                if self.configs.is_empty() {
                    return Err(HarnessError::Spec(format!(
                        "mode {} needs at least one entry in configs",
                        self.mode
                    )));
                }
                let mut labels: Vec<&str> =
                    self.configs.iter().map(|c| c.label.as_str()).collect();
                labels.sort_unstable();
                labels.dedup();
                if labels.len() != self.configs.len() {
                    return Err(HarnessError::Spec("config labels must be unique".into()));
                }
                for named in &self.configs {
                    named
                        .config
                        .validate(level)
                        .map_err(|e| HarnessError::Spec(format!("{}: {e}", named.label)))?;
                }
            }
            ExperimentMode::Hierarchical => {
                let pipeline = self.pipeline.clone().unwrap_or_else(PipelineSpec::best_reported);
                pipeline
                    .l1
                    .validate(Level::L1)
                    .and_then(|_| pipeline.l2.validate(Level::L2))
                    .and_then(|_| pipeline.l3.validate(Level::L3))
                    .map_err(|e| HarnessError::Spec(e.to_string()))?;
                // one embedding table serves all three classifiers
                if pipeline.l2.embedding_dim != pipeline.l1.embedding_dim
                    || pipeline.l3.embedding_dim != pipeline.l1.embedding_dim
                {
                    return Err(HarnessError::Spec(
                        "pipeline levels must share embedding_dim".into(),
                    ));
                }
            }
            ExperimentMode::Combined => {
                if let Some(config) = &self.combined {
                    config
                        .encoder
                        .validate()
                        .map_err(|e| HarnessError::Spec(e.to_string()))?;
                    if !config.context.upper_levels.is_empty() {
                        return Err(HarnessError::Spec(
                            "combined mode takes no upper-level context".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonicalized (sorted-key) spec JSON.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("spec serializes");
        let canonical = serde_json::to_string(&value).expect("canonical json");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn load_corpus(&self) -> Result<Corpus, HarnessError> {
        match &self.corpus {
            CorpusSource::File { path, format } => {
                let format = match format {
                    CorpusFormatSpec::Json => CorpusFormat::Json,
                    CorpusFormatSpec::Tsv => CorpusFormat::Tsv,
                };
                Ok(load_corpus(path, format)?)
            }
            CorpusSource::Synthetic { synthetic, seed } => Ok(generate_synthetic(synthetic, *seed)?),
        }
    }

    /// The default combined-baseline configuration: the best L1 architecture
    /// with combined-label context from three preceding segments.
    pub fn combined_config(&self) -> ClassifierConfig {
        self.combined.clone().unwrap_or_else(|| {
            ClassifierConfig::new(EncoderConfig::cnn_wide(100), ContextConfig::same_level(3))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_spec_json() -> String {
        r#"{
            "name": "smoke",
            "corpus": {"synthetic": {"dialogs": 10}, "seed": 1},
            "mode": "l1",
            "runs": 2,
            "configs": [
                {"label": "cnn", "encoder": {"variant": "cnn"}, "embedding_dim": 8}
            ]
        }"#
        .to_string()
    }

    #[test]
    fn spec_parses_with_defaults() {
        let spec: ExperimentSpec = serde_json::from_str(&minimal_spec_json()).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.folds.k, 5);
        assert_eq!(spec.training.batch_size, 512);
        assert_eq!(spec.min_count, 1);
        let config = &spec.configs[0].config;
        assert_eq!(config.encoder, EncoderConfig::cnn_wide(100));
        assert_eq!(config.max_len, 60);
    }

    #[test]
    fn spec_hash_is_stable_and_content_sensitive() {
        let a: ExperimentSpec = serde_json::from_str(&minimal_spec_json()).unwrap();
        let b: ExperimentSpec = serde_json::from_str(&minimal_spec_json()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.base_seed = Some(99);
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn level_mode_requires_configs() {
        let raw = r#"{"name": "x", "corpus": {"synthetic": {"dialogs": 5}}, "mode": "l2"}"#;
        let spec: ExperimentSpec = serde_json::from_str(raw).unwrap();
        assert!(matches!(spec.validate(), Err(HarnessError::Spec(_))));
    }

    #[test]
    fn upper_context_below_level_is_rejected() {
        let raw = r#"{
            "name": "x",
            "corpus": {"synthetic": {"dialogs": 5}},
            "mode": "l1",
            "configs": [{
                "label": "bad",
                "encoder": {"variant": "cnn"},
                "context": {"upper_levels": [{"level": "L2", "include_current": true}]}
            }]
        }"#;
        let spec: ExperimentSpec = serde_json::from_str(raw).unwrap();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let raw = r#"{
            "name": "x",
            "corpus": {"synthetic": {"dialogs": 5}},
            "mode": "l1",
            "configs": [
                {"label": "same", "encoder": {"variant": "cnn"}},
                {"label": "same", "encoder": {"variant": "rnn"}}
            ]
        }"#;
        let spec: ExperimentSpec = serde_json::from_str(raw).unwrap();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn synthetic_source_generates() {
        let spec: ExperimentSpec = serde_json::from_str(&minimal_spec_json()).unwrap();
        let corpus = spec.load_corpus().unwrap();
        assert_eq!(corpus.dialogs.len(), 10);
    }
}
