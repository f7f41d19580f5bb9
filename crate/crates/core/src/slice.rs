//! One systolic sparse tensor slice: a 4x4 output-stationary SPE grid with
//! triangular setup delays on the A/B edges and a six-entry buffer that
//! turns diagonal completion into column-wise extraction.
//!
//! Signals follow the usual RTL split: `step` consumes this cycle's inputs
//! and returns what the slice's output registers hold after the clock
//! edge, i.e. what neighbors see on the next cycle.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::precision::{AccWord, Precision};
use crate::spe::{AOperand, BVector, SpeInput, SpeState};
use crate::sparse_format::SparsityLevel;
use crate::trace::{TraceEvent, TraceKind};

pub const SLICE_DIM: usize = 4;
/// Extraction buffer capacity (upper-triangular results r + c < 3).
pub const EXTRACT_CAPACITY: usize = 6;
/// Cycles between a slice's accumulate input and `accumulate_out`.
pub const ACCUMULATE_OUT_DELAY: usize = SLICE_DIM;

#[derive(Debug, Clone)]
pub struct DelayLine<T> {
    regs: VecDeque<T>,
}

impl<T: Copy> DelayLine<T> {
    pub fn new(depth: usize, fill: T) -> Self {
        Self {
            regs: std::iter::repeat_n(fill, depth).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.regs.len()
    }

    /// Pushes `input`, returns the value from `depth` cycles ago.
    pub fn shift(&mut self, input: T) -> T {
        match self.regs.pop_front() {
            Some(out) => {
                self.regs.push_back(input);
                out
            }
            None => input,
        }
    }

    pub fn peek_oldest(&self) -> Option<T> {
        self.regs.front().copied()
    }

    fn fill(&mut self, v: T) {
        for r in self.regs.iter_mut() {
            *r = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceConfig {
    /// Static triangular delays on the A inputs (row r delayed r cycles).
    pub systolic_setup_a: bool,
    /// Same for B (column c delayed c cycles).
    pub systolic_setup_b: bool,
    pub precision: Precision,
}

impl SliceConfig {
    pub fn edge(precision: Precision) -> Self {
        Self {
            systolic_setup_a: true,
            systolic_setup_b: true,
            precision,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SliceInputs {
    pub a: [AOperand; SLICE_DIM],
    pub b: [BVector; SLICE_DIM],
    pub accumulate: bool,
    pub enable: bool,
    pub d_type: Precision,
    pub sparsity_level: SparsityLevel,
}

impl SliceInputs {
    pub fn bubble(precision: Precision, level: SparsityLevel) -> Self {
        Self {
            a: [AOperand::bubble(precision); SLICE_DIM],
            b: [BVector::zeros(level); SLICE_DIM],
            accumulate: true,
            enable: true,
            d_type: precision,
            sparsity_level: level,
        }
    }
}

/// One output column of a finished tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractedColumn {
    /// Sequence number of the tile inside this slice (0-based).
    pub tile: u64,
    pub column: u8,
    pub values: [AccWord; SLICE_DIM],
}

#[derive(Debug, Clone, Copy)]
pub struct SliceOutputs {
    pub a_out: [AOperand; SLICE_DIM],
    pub b_ded_out: [BVector; SLICE_DIM],
    pub c_data: Option<ExtractedColumn>,
    pub valid_out: bool,
    pub accumulate_out: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SpeActivity {
    pub macs: u64,
    pub live_macs: u64,
    pub first_live: Option<u64>,
    pub last_live: Option<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct SliceStats {
    pub cycles: u64,
    pub enabled_cycles: u64,
    pub max_buffer: usize,
    pub valid_cycles: Vec<u64>,
    pub spes: [SpeActivity; SLICE_DIM * SLICE_DIM],
    /// Enabled cycles on which every SPE ran a live MAC.
    pub full_cycles: u64,
}

#[derive(Debug, Clone, Copy)]
struct Staged {
    tile: u64,
    row: u8,
    col: u8,
    value: AccWord,
}

#[derive(Debug, Clone)]
pub struct Slice {
    pub id: usize,
    config: SliceConfig,
    level: SparsityLevel,
    spes: Vec<SpeState>,
    setup_a: Vec<DelayLine<AOperand>>,
    setup_b: Vec<DelayLine<BVector>>,
    accumulate_out_pipe: DelayLine<bool>,
    /// Last emitted accumulate_out, held while disabled.
    accumulate_out: bool,
    buffer: Vec<Staged>,
    extract_tile: u64,
    extract_cursor: u8,
    stats: SliceStats,
    trace: Option<Vec<TraceEvent>>,
}

impl Slice {
    pub fn new(id: usize, config: SliceConfig, level: SparsityLevel) -> Self {
        let p = config.precision;
        let a_depth = |r: usize| if config.systolic_setup_a { r } else { 0 };
        let b_depth = |c: usize| if config.systolic_setup_b { c } else { 0 };
        Self {
            id,
            config,
            level,
            spes: (0..SLICE_DIM * SLICE_DIM).map(|_| SpeState::new(level, p)).collect(),
            setup_a: (0..SLICE_DIM).map(|r| DelayLine::new(a_depth(r), AOperand::bubble(p))).collect(),
            setup_b: (0..SLICE_DIM).map(|c| DelayLine::new(b_depth(c), BVector::zeros(level))).collect(),
            accumulate_out_pipe: DelayLine::new(ACCUMULATE_OUT_DELAY - 1, true),
            accumulate_out: true,
            buffer: Vec::with_capacity(EXTRACT_CAPACITY),
            extract_tile: 0,
            extract_cursor: 0,
            stats: SliceStats::default(),
            trace: None,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn config(&self) -> SliceConfig {
        self.config
    }

    pub fn level(&self) -> SparsityLevel {
        self.level
    }

    pub fn spe(&self, row: usize, col: usize) -> &SpeState {
        &self.spes[row * SLICE_DIM + col]
    }

    pub fn stats(&self) -> &SliceStats {
        &self.stats
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn outputs(&self, c_data: Option<ExtractedColumn>, accumulate_out: bool) -> SliceOutputs {
        let mut a_out = [AOperand::bubble(self.config.precision); SLICE_DIM];
        let mut b_ded_out = [BVector::zeros(self.level); SLICE_DIM];
        for i in 0..SLICE_DIM {
            a_out[i] = self.spe(i, SLICE_DIM - 1).a_reg;
            b_ded_out[i] = self.spe(SLICE_DIM - 1, i).b_regs;
        }
        SliceOutputs {
            a_out,
            b_ded_out,
            valid_out: c_data.is_some(),
            c_data,
            accumulate_out,
        }
    }

    fn reconfigure(&mut self, inputs: &SliceInputs) -> Result<()> {
        if inputs.d_type == self.config.precision && inputs.sparsity_level == self.level {
            return Ok(());
        }
        if inputs.accumulate {
            return Err(Error::Reconfiguration(format!(
                "slice {}: d_type/sparsity_level changed mid-tile ({} {} -> {} {})",
                self.id, self.config.precision, self.level, inputs.d_type, inputs.sparsity_level
            )));
        }
        self.config.precision = inputs.d_type;
        self.level = inputs.sparsity_level;
        for spe in &mut self.spes {
            spe.configure(self.level, self.config.precision);
        }
        for line in &mut self.setup_a {
            line.fill(AOperand::bubble(self.config.precision));
        }
        for line in &mut self.setup_b {
            line.fill(BVector::zeros(self.level));
        }
        Ok(())
    }

    #[allow(clippy::needless_range_loop)]
    pub fn step(&mut self, inputs: &SliceInputs) -> Result<SliceOutputs> {
        let cycle = self.stats.cycles;
        self.stats.cycles += 1;
        if !inputs.enable {
            return Ok(self.outputs(None, self.accumulate_out));
        }
        self.stats.enabled_cycles += 1;
        self.reconfigure(inputs)?;
        let lanes = self.level.b_lanes();
        if let Some(bad) = inputs.b.iter().find(|b| b.len as usize != lanes) {
            return Err(Error::ArityMismatch {
                level: self.level,
                expected: lanes,
                got: bad.len as usize,
            });
        }

        let mut a_in = inputs.a;
        let mut b_in = inputs.b;
        for i in 0..SLICE_DIM {
            a_in[i] = self.setup_a[i].shift(inputs.a[i]);
            b_in[i] = self.setup_b[i].shift(inputs.b[i]);
        }

        let forwarded: Vec<_> = self.spes.iter().map(|s| s.forwarded()).collect();
        let mut released: Vec<Staged> = Vec::new();
        let mut live_count = 0;
        for r in 0..SLICE_DIM {
            for c in 0..SLICE_DIM {
                let i = r * SLICE_DIM + c;
                let a = if c == 0 { a_in[r] } else { forwarded[i - 1].a };
                let b = if r == 0 { b_in[c] } else { forwarded[i - SLICE_DIM].b };
                let accumulate = match (r, c) {
                    (0, 0) => inputs.accumulate,
                    (_, 0) => forwarded[i - SLICE_DIM].accumulate,
                    _ => forwarded[i - 1].accumulate,
                };
                let spe = &mut self.spes[i];
                let seq = spe.tiles_started;
                let step = spe.step(&SpeInput {
                    a,
                    b,
                    accumulate,
                    enable: true,
                })?;
                let act = &mut self.stats.spes[i];
                act.macs += step.mac as u64;
                if step.live_mac {
                    live_count += 1;
                    act.live_macs += 1;
                    act.first_live.get_or_insert(cycle);
                    act.last_live = Some(cycle);
                }
                if let Some(value) = step.released {
                    released.push(Staged {
                        tile: seq - 1,
                        row: r as u8,
                        col: c as u8,
                        value,
                    });
                    if let Some(t) = self.trace.as_mut() {
                        t.push(TraceEvent::spe(cycle, self.id, r, c, TraceKind::Release, self.config.precision, value));
                    }
                }
                if step.live_mac {
                    if let Some(t) = self.trace.as_mut() {
                        t.push(TraceEvent::spe(cycle, self.id, r, c, TraceKind::Mac, self.config.precision, self.spes[i].accumulator));
                    }
                }
            }
        }
        if live_count == SLICE_DIM * SLICE_DIM {
            self.stats.full_cycles += 1;
        }

        let c_data = self.extract(&mut released);
        self.buffer.extend(released);
        if self.buffer.len() > EXTRACT_CAPACITY {
            return Err(Error::ExtractOverflow {
                live: self.buffer.len(),
            });
        }
        self.stats.max_buffer = self.stats.max_buffer.max(self.buffer.len());
        if let Some(col) = &c_data {
            self.stats.valid_cycles.push(cycle);
            if let Some(t) = self.trace.as_mut() {
                for (r, v) in col.values.iter().enumerate() {
                    t.push(TraceEvent::spe(cycle, self.id, r, col.column as usize, TraceKind::Extract, self.config.precision, *v));
                }
            }
        }

        self.accumulate_out = self.accumulate_out_pipe.shift(inputs.accumulate);
        Ok(self.outputs(c_data, self.accumulate_out))
    }

    /// Emits the next column once all four of its results are staged or
    /// were released this cycle.
    fn extract(&mut self, released: &mut Vec<Staged>) -> Option<ExtractedColumn> {
        let (tile, col) = (self.extract_tile, self.extract_cursor);
        let wanted = |s: &Staged| s.tile == tile && s.col == col;
        let available = self.buffer.iter().filter(|s| wanted(s)).count() + released.iter().filter(|s| wanted(s)).count();
        if available < SLICE_DIM {
            return None;
        }
        let mut values = [0; SLICE_DIM];
        for s in self.buffer.iter().chain(released.iter()).filter(|s| wanted(s)) {
            values[s.row as usize] = s.value;
        }
        self.buffer.retain(|s| !wanted(s));
        released.retain(|s| !wanted(s));
        self.extract_cursor += 1;
        if self.extract_cursor as usize == SLICE_DIM {
            self.extract_cursor = 0;
            self.extract_tile += 1;
        }
        Some(ExtractedColumn { tile, column: col, values })
    }
}
