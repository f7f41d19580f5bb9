//! Operand stream seen at the corner of a slice grid.
//!
//! A stream is a sequence of steps; each step carries one A element per
//! slice row and (when fetched) one B group per slice column. Output tiles
//! are laid out back to back. A tile made of several chained segments (K
//! chunks) keeps `accumulate` asserted across segment boundaries. Tiles
//! shorter than [`MIN_TILE_STEPS`] are padded with bubble steps, since a
//! slice needs four cycles to drain 16 results through its column port.

use crate::precision::Precision;
use crate::slice::SLICE_DIM;
use crate::spe::{AOperand, BVector};
use crate::sparse_format::SparsityLevel;

pub const MIN_TILE_STEPS: usize = SLICE_DIM;

/// Produces operands for a (job, step) pair.
pub trait OperandSource {
    fn level(&self) -> SparsityLevel;
    fn precision(&self) -> Precision;
    fn a_lanes(&self, job: usize, step: usize, slice_row: usize) -> [AOperand; SLICE_DIM];
    /// B lanes for a step; `None` when the step does not fetch B (odd 2:4 steps).
    fn b_lanes(&self, job: usize, step: usize, slice_col: usize) -> Option<[BVector; SLICE_DIM]>;
}

/// First B row of the group consumed at compressed step `step`, if this
/// step fetches B at all.
pub fn b_group_row(level: SparsityLevel, step: usize) -> Option<usize> {
    match level {
        SparsityLevel::Dense => Some(step),
        SparsityLevel::S1of3 => Some(3 * step),
        SparsityLevel::S1of4 => Some(4 * step),
        SparsityLevel::S2of4 => step.is_multiple_of(2).then_some(4 * (step / 2)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    /// First stream step.
    pub start: usize,
    /// Live steps.
    pub len: usize,
    /// Live steps plus trailing bubble padding.
    pub span: usize,
    /// Step offset inside the job (K chunking).
    pub offset: usize,
    pub job: usize,
    /// Deasserts `accumulate` on its first step.
    pub starts_tile: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Live { job: usize, step: usize, accumulate: bool },
    /// Padding or idle stream: bubble operands, accumulate asserted.
    Bubble,
    /// Deasserts accumulate with bubble operands to drain the last tile.
    Flush,
}

#[derive(Debug, Clone, Default)]
pub struct Schedule {
    pub segments: Vec<Segment>,
    pub tiles: usize,
    /// Steps up to (not including) the flush step.
    pub total_steps: usize,
}

/// One output tile: the list of (job, live steps) chunks it accumulates.
#[derive(Debug, Clone)]
pub struct TilePlan {
    pub chunks: Vec<(usize, usize, usize)>, // (job, offset, len)
}

impl Schedule {
    pub fn build(tiles: &[TilePlan]) -> Self {
        let mut segments = Vec::new();
        let mut at = 0;
        for plan in tiles {
            let tile_len: usize = plan.chunks.iter().map(|c| c.2).sum();
            let pad = MIN_TILE_STEPS.saturating_sub(tile_len);
            let n = plan.chunks.len();
            for (i, &(job, offset, len)) in plan.chunks.iter().enumerate() {
                let span = if i + 1 == n { len + pad } else { len };
                segments.push(Segment {
                    start: at,
                    len,
                    span,
                    offset,
                    job,
                    starts_tile: i == 0,
                });
                at += span;
            }
        }
        Schedule {
            segments,
            tiles: tiles.len(),
            total_steps: at,
        }
    }

    /// Uniform tiles of `steps` live steps, each split into chunks of at
    /// most `chunk` steps.
    pub fn uniform(jobs: usize, steps: usize, chunk: usize) -> Self {
        assert!(steps > 0, "tiles need at least one live step");
        let chunk = chunk.max(1);
        let plans: Vec<TilePlan> = (0..jobs)
            .map(|job| TilePlan {
                chunks: (0..steps).step_by(chunk).map(|off| (job, off, chunk.min(steps - off))).collect(),
            })
            .collect();
        Self::build(&plans)
    }

    pub fn step(&self, idx: usize) -> StepKind {
        if idx == self.total_steps {
            return StepKind::Flush;
        }
        if idx > self.total_steps {
            return StepKind::Bubble;
        }
        let pos = self.segments.partition_point(|s| s.start <= idx) - 1;
        let seg = &self.segments[pos];
        let rel = idx - seg.start;
        if rel < seg.len {
            StepKind::Live {
                job: seg.job,
                step: seg.offset + rel,
                accumulate: !(rel == 0 && seg.starts_tile),
            }
        } else {
            StepKind::Bubble
        }
    }

    /// Cycles each tile occupies in steady state.
    pub fn tile_spans(&self) -> Vec<usize> {
        let mut spans = Vec::new();
        for s in &self.segments {
            if s.starts_tile {
                spans.push(0);
            }
            if let Some(last) = spans.last_mut() {
                *last += s.span;
            }
        }
        spans
    }
}
