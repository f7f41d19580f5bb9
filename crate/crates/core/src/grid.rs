//! Cycle loop over a Y x X grid of slices.
//!
//! Slice (y, 0) reads A bank y and slice (0, x) reads B chain x; the
//! controller staggers those reads by 4y / 4x cycles so that, together with
//! the in-slice setup triangles, every SPE of the fabric sees the wavefront
//! of global row R and column C exactly R + C cycles after the corner.
//! A hops right and B hops down one cycle per SPE, including across slice
//! boundaries; `accumulate` follows the same path through `accumulate_out`.

use crate::error::{Error, Result};
use crate::schedule::{OperandSource, Schedule, StepKind};
use crate::slice::{ExtractedColumn, Slice, SliceConfig, SliceInputs, SliceOutputs, SliceStats, SLICE_DIM};
use crate::spe::{AOperand, BVector};
use crate::sparse_format::{SparsityLevel, INDEX_BITS};
use crate::trace::TraceEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BankId {
    A(usize),
    B { chain: usize, lane: usize },
    C { row: usize, col: usize },
}

impl std::fmt::Display for BankId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BankId::A(y) => write!(f, "A{y}"),
            BankId::B { chain, lane } => write!(f, "B{chain}.{lane}"),
            BankId::C { row, col } => write!(f, "C{row}.{col}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BankAccess {
    pub bank: BankId,
    pub bits: u32,
}

#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub trace: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct GridColumn {
    pub slice_row: usize,
    pub slice_col: usize,
    pub cycle: u64,
    pub column: ExtractedColumn,
}

#[derive(Debug, Clone)]
pub struct GridRun {
    pub columns: Vec<GridColumn>,
    pub cycles: u64,
    pub enabled_cycles: u64,
    pub slices: Vec<SliceStats>,
    pub trace: Vec<TraceEvent>,
}

/// Slack on top of the stream length before a run is declared stuck.
const DRAIN_SLACK: usize = 64;

fn step_at(schedule: &Schedule, enabled: usize, stagger: usize) -> StepKind {
    match enabled.checked_sub(stagger) {
        Some(idx) => schedule.step(idx),
        None => StepKind::Bubble,
    }
}

fn a_feed<S: OperandSource>(src: &S, kind: StepKind, y: usize) -> [AOperand; SLICE_DIM] {
    match kind {
        StepKind::Live { job, step, .. } => src.a_lanes(job, step, y),
        _ => [AOperand::bubble(src.precision()); SLICE_DIM],
    }
}

fn b_feed<S: OperandSource>(src: &S, kind: StepKind, x: usize) -> Option<[BVector; SLICE_DIM]> {
    match kind {
        StepKind::Live { job, step, .. } => src.b_lanes(job, step, x),
        _ => None,
    }
}

fn b_banks(level: SparsityLevel) -> usize {
    level.b_lanes()
}

/// Buffer reads issued on one enabled cycle.
pub fn stream_reads<S: OperandSource>(src: &S, schedule: &Schedule, spec: &GridSpec, enabled: usize, out: &mut Vec<BankAccess>) {
    let level = src.level();
    let vb = src.precision().value_bits();
    let a_bits = if level.is_sparse() {
        SLICE_DIM as u32 * (vb + INDEX_BITS)
    } else {
        SLICE_DIM as u32 * vb
    };
    for y in 0..spec.rows {
        if let StepKind::Live { .. } = step_at(schedule, enabled, SLICE_DIM * y) {
            out.push(BankAccess {
                bank: BankId::A(y),
                bits: a_bits,
            });
        }
    }
    for x in 0..spec.cols {
        let kind = step_at(schedule, enabled, SLICE_DIM * x);
        if b_feed(src, kind, x).is_some() {
            for lane in 0..b_banks(level) {
                out.push(BankAccess {
                    bank: BankId::B { chain: x, lane },
                    bits: SLICE_DIM as u32 * vb,
                });
            }
        }
    }
}

pub fn simulate<S: OperandSource>(
    spec: &GridSpec,
    src: &S,
    schedule: &Schedule,
    stall: &mut dyn FnMut(u64) -> bool,
    sink: &mut dyn FnMut(u64, &[BankAccess]) -> Result<()>,
) -> Result<GridRun> {
    let (ny, nx) = (spec.rows, spec.cols);
    let p = src.precision();
    let level = src.level();
    let mut slices: Vec<Slice> = (0..ny * nx)
        .map(|i| {
            let cfg = SliceConfig {
                systolic_setup_a: i % nx == 0,
                systolic_setup_b: i / nx == 0,
                precision: p,
            };
            let s = Slice::new(i, cfg, level);
            if spec.trace {
                s.with_trace()
            } else {
                s
            }
        })
        .collect();
    let idle = SliceOutputs {
        a_out: [AOperand::bubble(p); SLICE_DIM],
        b_ded_out: [BVector::zeros(level); SLICE_DIM],
        c_data: None,
        valid_out: false,
        accumulate_out: true,
    };
    let mut prev = vec![idle; ny * nx];
    let mut next = prev.clone();
    let expected = schedule.tiles as u64 * SLICE_DIM as u64;
    let mut extracted = vec![0u64; ny * nx];
    let mut columns = Vec::with_capacity((expected as usize) * ny * nx);
    let limit = schedule.total_steps + SLICE_DIM * (ny + nx) + DRAIN_SLACK;
    let mut accesses = Vec::new();
    let mut enabled = 0usize;
    let mut cycle = 0u64;

    while extracted.iter().any(|e| *e < expected) {
        if enabled > limit {
            return Err(Error::Simulation(format!(
                "results not drained after {enabled} enabled cycles (stream of {} steps)",
                schedule.total_steps
            )));
        }
        let enable = !stall(cycle);
        accesses.clear();
        for y in 0..ny {
            for x in 0..nx {
                let i = y * nx + x;
                let mut inputs = SliceInputs::bubble(p, level);
                inputs.enable = enable;
                inputs.a = if x == 0 {
                    a_feed(src, step_at(schedule, enabled, SLICE_DIM * y), y)
                } else {
                    prev[i - 1].a_out
                };
                inputs.b = if y == 0 {
                    b_feed(src, step_at(schedule, enabled, SLICE_DIM * x), x).unwrap_or([BVector::zeros(level); SLICE_DIM])
                } else {
                    prev[i - nx].b_ded_out
                };
                inputs.accumulate = if i == 0 {
                    match schedule.step(enabled) {
                        StepKind::Live { accumulate, .. } => accumulate,
                        StepKind::Flush => false,
                        StepKind::Bubble => true,
                    }
                } else if x > 0 {
                    prev[i - 1].accumulate_out
                } else {
                    prev[i - nx].accumulate_out
                };
                let out = slices[i].step(&inputs)?;
                if let Some(column) = out.c_data {
                    extracted[i] += 1;
                    columns.push(GridColumn {
                        slice_row: y,
                        slice_col: x,
                        cycle,
                        column,
                    });
                    accesses.push(BankAccess {
                        bank: BankId::C { row: y, col: x },
                        bits: (SLICE_DIM * 32) as u32,
                    });
                }
                next[i] = out;
            }
        }
        if enable {
            stream_reads(src, schedule, spec, enabled, &mut accesses);
            enabled += 1;
        }
        sink(cycle, &accesses)?;
        std::mem::swap(&mut prev, &mut next);
        cycle += 1;
    }

    let trace = slices.iter_mut().flat_map(|s| s.take_trace()).collect();
    Ok(GridRun {
        columns,
        cycles: cycle,
        enabled_cycles: enabled as u64,
        slices: slices.iter().map(|s| s.stats().clone()).collect(),
        trace,
    })
}
