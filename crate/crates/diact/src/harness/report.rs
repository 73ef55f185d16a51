//! Experiment reports: lossless JSON (raw per-run values retained alongside
//! aggregates) and text tables mirroring the metric-column layout of the
//! result tables (m and s per configuration).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::FoldAssignment;
use crate::harness::spec::ExperimentMode;
use crate::harness::HarnessError;
use crate::metrics::{PerLabelScore, RunStatistics};

/// Metric values of one run, keyed by metric name.
pub type MetricValues = BTreeMap<String, f64>;

/// Aggregated statistics, keyed by metric name.
pub type MetricStats = BTreeMap<String, RunStatistics>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub metrics: MetricValues,
    pub per_speaker: BTreeMap<String, MetricValues>,
    /// Per-segment correctness over `segment_keys`, pooled over the folds.
    pub correct: Vec<bool>,
    /// (fold, epochs run, best epoch) per trained model.
    pub training: Vec<TrainingTrace>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub fold: usize,
    pub model: String,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_metric: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigReport {
    pub label: String,
    pub config: serde_json::Value,
    pub metrics: MetricStats,
    pub per_speaker: BTreeMap<String, MetricStats>,
    pub per_label: Vec<PerLabelScore>,
    /// `dialog_id#position` keys of the pooled evaluation segments, in the
    /// fixed order the correctness vectors use.
    pub segment_keys: Vec<String>,
    pub runs: Vec<RunReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub spec_hash: String,
    pub base_seed: u64,
    pub runs: usize,
    pub embedding_seed: u64,
    /// Set only on request; reports stay byte-identical by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub mode: ExperimentMode,
    pub corpus_dialogs: usize,
    pub corpus_segments: usize,
    pub folds: FoldAssignment,
    pub provenance: Provenance,
    pub configs: Vec<ConfigReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(content: &str) -> Result<ExperimentReport, HarnessError> {
        Ok(serde_json::from_str(content)?)
    }

    pub fn config(&self, label: Option<&str>) -> Result<&ConfigReport, HarnessError> {
        match label {
            None => self.configs.first().ok_or_else(|| {
                HarnessError::Spec("report holds no configurations".into())
            }),
            Some(wanted) => self
                .configs
                .iter()
                .find(|c| c.label == wanted)
                .ok_or_else(|| {
                    HarnessError::Spec(format!("report has no configuration {wanted:?}"))
                }),
        }
    }

    /// Columns per mode: single-label modes report accuracy; multi-label
    /// modes the six metrics; the hierarchical mode its three sections.
    fn metric_columns(&self) -> Vec<(&'static str, &'static str, usize)> {
        match self.mode {
            ExperimentMode::L1 => vec![("accuracy", "Accuracy", 2)],
            ExperimentMode::L2 | ExperimentMode::L3 => vec![
                ("mr", "MR", 2),
                ("acc", "Acc", 2),
                ("p", "P", 2),
                ("r", "R", 2),
                ("f1", "F1", 2),
                ("hl", "HL", 4),
            ],
            ExperimentMode::Hierarchical => vec![
                ("l1_accuracy", "L1 Acc", 2),
                ("mr_l12", "MR L1+2", 2),
                ("mr_l123", "MR L1+2+3", 2),
            ],
            ExperimentMode::Combined => vec![("accuracy", "Accuracy", 2)],
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} (mode {}, {} folds x {} runs, corpus {} dialogs / {} segments)",
            self.name,
            self.mode,
            self.folds.k,
            self.provenance.runs,
            self.corpus_dialogs,
            self.corpus_segments,
        );
        let _ = writeln!(out, "# spec sha256: {}", self.provenance.spec_hash);
        out.push('\n');
        let columns = self.metric_columns();
        let label_width = self
            .configs
            .iter()
            .map(|c| c.label.len())
            .max()
            .unwrap_or(8)
            .max(8);
        let mut header = format!("{:<label_width$}", "approach");
        let mut subheader = format!("{:<label_width$}", "");
        for (_, title, _) in &columns {
            let _ = write!(header, "  {:>9} {:>9}", title, "");
            let _ = write!(subheader, "  {:>9} {:>9}", "m", "s");
        }
        let _ = writeln!(out, "{}", header.trim_end());
        let _ = writeln!(out, "{}", subheader.trim_end());
        for config in &self.configs {
            let mut row = format!("{:<label_width$}", config.label);
            for (key, _, decimals) in &columns {
                match config.metrics.get(*key) {
                    Some(stats) => {
                        let _ = write!(
                            row,
                            "  {:>9.prec$} {:>9.prec$}",
                            stats.m,
                            stats.s,
                            prec = decimals
                        );
                    }
                    None => {
                        let _ = write!(row, "  {:>9} {:>9}", "-", "-");
                    }
                }
            }
            let _ = writeln!(out, "{}", row.trim_end());
        }
        for config in &self.configs {
            if config.per_speaker.is_empty() {
                continue;
            }
            let _ = writeln!(out, "\n## {} by speaker", config.label);
            for (speaker, stats) in &config.per_speaker {
                let mut row = format!("{:<label_width$}", speaker);
                for (key, _, decimals) in &columns {
                    if let Some(s) = stats.get(*key) {
                        let _ = write!(row, "  {:>9.prec$} {:>9.prec$}", s.m, s.s, prec = decimals);
                    }
                }
                let _ = writeln!(out, "{}", row.trim_end());
            }
        }
        let flagged: Vec<&PerLabelScore> = self
            .configs
            .iter()
            .flat_map(|c| c.per_label.iter())
            .filter(|s| s.flagged)
            .collect();
        if !flagged.is_empty() {
            let _ = writeln!(out, "\n# flagged labels (no predictions or zero support):");
            for score in flagged {
                let _ = writeln!(
                    out,
                    "#   {} (tp {}, fp {}, fn {})",
                    score.label, score.tp, score.fp, score.fn_
                );
            }
        }
        out
    }

    /// Writes `<spec-hash>.report.json` and `.report.txt` into `dir`,
    /// returning the JSON path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, HarnessError> {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let stem = dir.join(&self.provenance.spec_hash);
        let json_path = stem.with_extension("report.json");
        fs::write(&json_path, self.to_json()).map_err(|source| HarnessError::Io {
            path: json_path.display().to_string(),
            source,
        })?;
        let txt_path = stem.with_extension("report.txt");
        fs::write(&txt_path, self.to_text()).map_err(|source| HarnessError::Io {
            path: txt_path.display().to_string(),
            source,
        })?;
        Ok(json_path)
    }
}
