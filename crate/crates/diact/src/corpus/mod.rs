//! The dialog/segment/annotation data model, loading and validation,
//! cross-validation folds, and the synthetic corpus generator.
//!
//! A corpus is a list of dialogs; a dialog is an ordered list of segments;
//! each segment carries one L1 label and possibly-empty L2/L3 label sets.
//! Six structuring L1 labels (the gate set) force empty sets below. All
//! domain types are immutable after construction.

pub mod formats;
pub mod labels;
pub mod synth;

use std::collections::{BTreeMap, BTreeSet};

pub use formats::{load_corpus, save_corpus, CorpusFormat};
pub use labels::{Label, LabelSpace, Level};
pub use synth::{generate_synthetic, Lexicon, SynthConfig};

pub use crate::metrics::Speaker;
use crate::neural::RandomSource;
use crate::text::tokenize;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("unknown {level} label \"{name}\" at {location}")]
    UnknownLabel {
        level: Level,
        name: String,
        location: String,
    },
    #[error("gate violation at {location}: L1 \"{l1}\" forbids L2/L3 labels")]
    GateViolation { location: String, l1: String },
    #[error("segment at {location} has no tokens after tokenization")]
    EmptyText { location: String },
    #[error("need at least {needed} dialogs, corpus has {got}")]
    TooFewDialogs { needed: usize, got: usize },
    #[error("validation failed: {0} violation(s), first: {1}")]
    Invalid(usize, String),
    #[error("synthetic lexicon is missing an entry for {level} label \"{label}\"")]
    MissingLexicon { level: Level, label: String },
    #[error("synthetic config requests zero dialogs")]
    ZeroDialogs,
    #[error("val_fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
}

/// One annotated utterance unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub dialog_id: String,
    pub position: usize,
    pub speaker: Speaker,
    pub text: String,
    /// Index into the L1 inventory.
    pub l1: usize,
    /// Sorted, duplicate-free L2 indices; empty means Nil.
    pub l2: Vec<usize>,
    /// Sorted, duplicate-free L3 indices; empty means Nil.
    pub l3: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dialog {
    pub id: String,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub dialogs: Vec<Dialog>,
    pub label_space: &'static LabelSpace,
}

impl Corpus {
    pub fn new(dialogs: Vec<Dialog>) -> Corpus {
        Corpus {
            dialogs,
            label_space: LabelSpace::canonical(),
        }
    }

    pub fn segment_count(&self) -> usize {
        self.dialogs.iter().map(|d| d.segments.len()).sum()
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.dialogs.iter().flat_map(|d| d.segments.iter())
    }

    pub fn dialog_ids(&self) -> Vec<String> {
        self.dialogs.iter().map(|d| d.id.clone()).collect()
    }

    pub fn dialog(&self, id: &str) -> Option<&Dialog> {
        self.dialogs.iter().find(|d| d.id == id)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    GateViolation,
    DuplicateLabel,
    PositionGap,
    DialogIdMismatch,
    DuplicateDialogId,
    EmptyText,
    LabelOutOfRange,
}

#[derive(Clone, Debug)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    pub message: String,
}

fn seg_location(seg: &Segment) -> String {
    format!("dialog {} segment {}", seg.dialog_id, seg.position)
}

/// Checks every corpus invariant and reports violations as data; an empty
/// report means the corpus is well formed. Never mutates the corpus.
pub fn validate(corpus: &Corpus) -> Vec<Violation> {
    let mut violations = Vec::new();
    let space = corpus.label_space;
    let mut seen_ids = BTreeSet::new();
    for dialog in &corpus.dialogs {
        if !seen_ids.insert(dialog.id.as_str()) {
            violations.push(Violation {
                kind: ViolationKind::DuplicateDialogId,
                location: format!("dialog {}", dialog.id),
                message: "dialog id appears more than once".into(),
            });
        }
        for (expected, seg) in dialog.segments.iter().enumerate() {
            let loc = seg_location(seg);
            if seg.dialog_id != dialog.id {
                violations.push(Violation {
                    kind: ViolationKind::DialogIdMismatch,
                    location: loc.clone(),
                    message: format!("segment carries dialog id {}", seg.dialog_id),
                });
            }
            if seg.position != expected {
                violations.push(Violation {
                    kind: ViolationKind::PositionGap,
                    location: loc.clone(),
                    message: format!("expected position {expected}, found {}", seg.position),
                });
            }
            if seg.l1 >= space.size(Level::L1) {
                violations.push(Violation {
                    kind: ViolationKind::LabelOutOfRange,
                    location: loc.clone(),
                    message: format!("L1 index {} out of range", seg.l1),
                });
                continue;
            }
            for (level, set) in [(Level::L2, &seg.l2), (Level::L3, &seg.l3)] {
                let mut seen = BTreeSet::new();
                for &idx in set.iter() {
                    if idx >= space.size(level) {
                        violations.push(Violation {
                            kind: ViolationKind::LabelOutOfRange,
                            location: loc.clone(),
                            message: format!("{level} index {idx} out of range"),
                        });
                    } else if !seen.insert(idx) {
                        violations.push(Violation {
                            kind: ViolationKind::DuplicateLabel,
                            location: loc.clone(),
                            message: format!(
                                "{level} label \"{}\" listed twice",
                                space.name(level, idx)
                            ),
                        });
                    }
                }
            }
            if space.is_gate(seg.l1) && (!seg.l2.is_empty() || !seg.l3.is_empty()) {
                violations.push(Violation {
                    kind: ViolationKind::GateViolation,
                    location: loc.clone(),
                    message: format!(
                        "L1 \"{}\" forbids L2/L3 labels",
                        space.name(Level::L1, seg.l1)
                    ),
                });
            }
            if tokenize(&seg.text).is_empty() {
                violations.push(Violation {
                    kind: ViolationKind::EmptyText,
                    location: loc,
                    message: "no tokens after tokenization".into(),
                });
            }
        }
    }
    violations
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, serde::Serialize)]
pub struct LabelCount {
    pub label: String,
    pub user: usize,
    pub system: usize,
    pub total: usize,
    /// Percentage over all segments of the corpus (a multi-label segment
    /// contributes to several rows, so L2/L3 rows can sum past 100).
    pub percent: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CorpusStats {
    pub total_segments: usize,
    pub user_segments: usize,
    pub system_segments: usize,
    pub dialogs: usize,
    /// Rows sorted by descending total then name; L2/L3 include a `Nulo`
    /// row counting segments with an empty set at that level.
    pub l1: Vec<LabelCount>,
    pub l2: Vec<LabelCount>,
    pub l3: Vec<LabelCount>,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let space = corpus.label_space;
    let total = corpus.segment_count();
    let mut user = 0;
    let mut system = 0;
    let mut l1_counts = vec![(0usize, 0usize); space.size(Level::L1)];
    // last slot holds the Nil row
    let mut l2_counts = vec![(0usize, 0usize); space.size(Level::L2) + 1];
    let mut l3_counts = vec![(0usize, 0usize); space.size(Level::L3) + 1];
    for seg in corpus.segments() {
        let slot = |counts: &mut Vec<(usize, usize)>, idx: usize| match seg.speaker {
            Speaker::User => counts[idx].0 += 1,
            Speaker::System => counts[idx].1 += 1,
        };
        match seg.speaker {
            Speaker::User => user += 1,
            Speaker::System => system += 1,
        }
        slot(&mut l1_counts, seg.l1);
        if seg.l2.is_empty() {
            let nil = l2_counts.len() - 1;
            slot(&mut l2_counts, nil);
        } else {
            for &idx in &seg.l2 {
                slot(&mut l2_counts, idx);
            }
        }
        if seg.l3.is_empty() {
            let nil = l3_counts.len() - 1;
            slot(&mut l3_counts, nil);
        } else {
            for &idx in &seg.l3 {
                slot(&mut l3_counts, idx);
            }
        }
    }
    let build = |counts: Vec<(usize, usize)>, level: Level, with_nil: bool| -> Vec<LabelCount> {
        let mut rows: Vec<LabelCount> = counts
            .into_iter()
            .enumerate()
            .map(|(idx, (u, s))| {
                let label = if with_nil && idx == space.size(level) {
                    "Nulo".to_string()
                } else {
                    space.name(level, idx).to_string()
                };
                LabelCount {
                    label,
                    user: u,
                    system: s,
                    total: u + s,
                    percent: if total > 0 {
                        100.0 * (u + s) as f64 / total as f64
                    } else {
                        0.0
                    },
                }
            })
            .collect();
        rows.sort_by(|a, b| b.total.cmp(&a.total).then_with(|| a.label.cmp(&b.label)));
        rows
    };
    CorpusStats {
        total_segments: total,
        user_segments: user,
        system_segments: system,
        dialogs: corpus.dialogs.len(),
        l1: build(l1_counts, Level::L1, false),
        l2: build(l2_counts, Level::L2, true),
        l3: build(l3_counts, Level::L3, true),
    }
}

// ---------------------------------------------------------------------------
// Folds and splits
// ---------------------------------------------------------------------------

/// A dialog-level k-fold partition, balanced within one dialog.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_dialogs(&self, fold: usize) -> Vec<String> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn train_dialogs(&self, held_out_fold: usize) -> Vec<String> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f != held_out_fold)
            .map(|(id, _)| id.clone())
            .collect()
    }
}

/// Seeded dialog-level partition into `k` balanced folds. Dialog ids are
/// sorted before shuffling so the result is a pure function of
/// (corpus contents, k, seed) regardless of dialog order.
pub fn make_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldAssignment, CorpusError> {
    assert!(k >= 2, "make_folds needs k >= 2");
    let mut ids = corpus.dialog_ids();
    if ids.len() < k {
        return Err(CorpusError::TooFewDialogs {
            needed: k,
            got: ids.len(),
        });
    }
    ids.sort_unstable();
    let mut rng = RandomSource::new(seed).derive(0x666f_6c64); // "fold"
    rng.shuffle(&mut ids);
    let assignment = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i % k))
        .collect();
    Ok(FoldAssignment { k, seed, assignment })
}

/// Seeded train/validation split of dialog ids. The validation side gets
/// `round(val_fraction * n)` ids, at least 1 and at most n - 1.
pub fn split_train_val(
    dialog_ids: &[String],
    val_fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), CorpusError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(CorpusError::BadFraction(val_fraction));
    }
    if dialog_ids.len() < 2 {
        return Err(CorpusError::TooFewDialogs {
            needed: 2,
            got: dialog_ids.len(),
        });
    }
    let mut ids = dialog_ids.to_vec();
    ids.sort_unstable();
    let mut rng = RandomSource::new(seed).derive(0x7370_6c69); // "spli"
    rng.shuffle(&mut ids);
    let n = ids.len();
    let val_len = ((val_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let val = ids.split_off(n - val_len);
    Ok((ids, val))
}
