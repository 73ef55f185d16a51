//! Label-context features: one-hot/multi-hot encodings of the labels of
//! preceding segments and of upper hierarchy levels, concatenated into a
//! fixed-width vector.
//!
//! Block layout, in order:
//! 1. same-level blocks for the `n_prev_same_level` preceding segments,
//!    nearest first;
//! 2. for each upper-level source in configured order: the current
//!    segment's block (when enabled), then its preceding blocks, nearest
//!    first.
//!
//! An L1 block is a one-hot vector of width 11; L2/L3 blocks are multi-hot
//! vectors of width 10/13 with Nil as the all-zero block. Positions before
//! the dialog start contribute all-zero blocks.

use crate::corpus::{Dialog, LabelSpace, Level};
use crate::models::config::ContextConfig;

/// Where context labels come from: the gold annotations of a dialog, or a
/// prefix of pipeline predictions.
pub trait LabelSource {
    /// Number of segments addressable.
    fn len(&self) -> usize;
    fn l1(&self, position: usize) -> Option<usize>;
    fn l2(&self, position: usize) -> &[usize];
    fn l3(&self, position: usize) -> &[usize];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Gold annotations straight from a dialog.
pub struct GoldLabels<'a>(pub &'a Dialog);

impl LabelSource for GoldLabels<'_> {
    fn len(&self) -> usize {
        self.0.segments.len()
    }
    fn l1(&self, position: usize) -> Option<usize> {
        self.0.segments.get(position).map(|s| s.l1)
    }
    fn l2(&self, position: usize) -> &[usize] {
        self.0.segments.get(position).map(|s| s.l2.as_slice()).unwrap_or(&[])
    }
    fn l3(&self, position: usize) -> &[usize] {
        self.0.segments.get(position).map(|s| s.l3.as_slice()).unwrap_or(&[])
    }
}

/// Width of one block at a level.
fn block_width(space: &LabelSpace, level: Level) -> usize {
    space.size(level)
}

/// Total context width: a pure function of the configuration and the label
/// space.
pub fn context_width(config: &ContextConfig, space: &LabelSpace, level: Level) -> usize {
    let mut width = config.n_prev_same_level * block_width(space, level);
    for source in &config.upper_levels {
        let blocks = usize::from(source.include_current) + source.n_prev;
        width += blocks * block_width(space, source.level);
    }
    width
}

fn write_block(
    out: &mut Vec<f64>,
    source: &dyn LabelSource,
    space: &LabelSpace,
    level: Level,
    position: Option<usize>,
) {
    let width = block_width(space, level);
    let start = out.len();
    out.resize(start + width, 0.0);
    let Some(pos) = position else { return };
    if pos >= source.len() {
        return;
    }
    match level {
        Level::L1 => {
            if let Some(idx) = source.l1(pos) {
                out[start + idx] = 1.0;
            }
        }
        Level::L2 => {
            for &idx in source.l2(pos) {
                out[start + idx] = 1.0;
            }
        }
        Level::L3 => {
            for &idx in source.l3(pos) {
                out[start + idx] = 1.0;
            }
        }
    }
}

/// Builds the context vector for the segment at `position`.
pub fn encode_context(
    source: &dyn LabelSource,
    position: usize,
    config: &ContextConfig,
    space: &LabelSpace,
    level: Level,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(context_width(config, space, level));
    for back in 1..=config.n_prev_same_level {
        write_block(&mut out, source, space, level, position.checked_sub(back));
    }
    for upper in &config.upper_levels {
        if upper.include_current {
            write_block(&mut out, source, space, upper.level, Some(position));
        }
        for back in 1..=upper.n_prev {
            write_block(&mut out, source, space, upper.level, position.checked_sub(back));
        }
    }
    out
}
