//! diact: a toolkit for training, evaluating, and hierarchically composing
//! dialog-act classifiers over three-level annotated dialogs.
//!
//! The crate is organized around the workflow:
//!
//! - [`corpus`]: the dialog/segment data model, loaders, validators,
//!   cross-validation folds, and a synthetic corpus generator.
//! - [`text`]: word-level tokenization, vocabularies, and embedding tables.
//! - [`neural`]: the double-precision numeric substrate (layers, losses,
//!   Adam, gradient checking).
//! - [`models`]: segment encoders, label-context features, per-level
//!   classifiers, the training loop, the hierarchical pipeline, and the
//!   single-label combined baseline.
//! - [`metrics`]: multi-label evaluation (exact match ratio, accuracy,
//!   precision, recall, F1, Hamming loss), run aggregation, and the exact
//!   binomial significance test.
//! - [`harness`]: the cross-validation x runs experiment protocol and
//!   report emission.
//! - [`cli`]: the `diact` command-line driver.

pub mod cli;
pub mod corpus;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod neural;
pub mod text;
