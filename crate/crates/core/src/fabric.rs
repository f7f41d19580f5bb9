//! Y x X slice GEMM accelerator with banked A/B/C buffers.
//!
//! Output blocks of (4Y) x (4X) stay in the SPEs while K streams through;
//! blocks are visited N-outer, M-inner. The sparse-capable design keeps A
//! compressed in its banks (values plus 2-bit indices) and feeds each
//! vertical chain from four B banks. The dense-only design (the baseline
//! slice without sparse support) has one B bank per chain and accepts only
//! dense operands.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, BankAccess, BankId, GridRun, GridSpec};
use crate::matrix::{AccumMatrix, DenseMatrix};
use crate::precision::Precision;
use crate::schedule::{b_group_row, OperandSource, Schedule};
use crate::slice::{SliceStats, SLICE_DIM};
use crate::spe::{AOperand, BVector};
use crate::sparse_format::{self, CompressedMatrix, SparsityLevel, INDEX_BITS};
use crate::trace::TraceEvent;

/// BRAM primitive used for all buffers: 512 x 40-bit mode.
pub const BRAM_WIDTH_BITS: u32 = 40;
pub const BRAM_DEPTH: usize = 512;
pub const DEFAULT_BANK_DEPTH: usize = 512;
/// Output bank width: four 32-bit accumulators per cycle.
pub const C_BANK_WIDTH_BITS: u32 = SLICE_DIM as u32 * 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    DenseOnly,
    DynamicSparse,
}

impl Capability {
    pub fn name(self) -> &'static str {
        match self {
            Capability::DenseOnly => "dense_only",
            Capability::DynamicSparse => "dynamic_sparse",
        }
    }

    pub fn supports(self, level: SparsityLevel) -> bool {
        self == Capability::DynamicSparse || level == SparsityLevel::Dense
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FabricConfig {
    pub y: usize,
    pub x: usize,
    pub precision: Precision,
    pub capability: Capability,
    /// Bank depth in entries.
    pub bank_depth: usize,
    pub frequency_hz: f64,
    /// Zero-pad M and N to the native size instead of failing.
    pub auto_pad: bool,
    /// Compressed K steps per buffered chunk; defaults to the bank depth.
    pub k_chunk: Option<usize>,
    pub trace: bool,
}

impl FabricConfig {
    pub fn new(y: usize, x: usize, precision: Precision) -> Self {
        Self {
            y,
            x,
            precision,
            capability: Capability::DynamicSparse,
            bank_depth: DEFAULT_BANK_DEPTH,
            frequency_hz: 600e6,
            auto_pad: true,
            k_chunk: None,
            trace: false,
        }
    }

    pub fn dense_only(y: usize, x: usize, precision: Precision) -> Self {
        Self {
            capability: Capability::DenseOnly,
            ..Self::new(y, x, precision)
        }
    }

    pub fn native_rows(&self) -> usize {
        SLICE_DIM * self.y
    }

    pub fn native_cols(&self) -> usize {
        SLICE_DIM * self.x
    }

    pub fn slices(&self) -> usize {
        self.y * self.x
    }

    fn validate(&self) -> Result<()> {
        if self.y == 0 || self.x == 0 {
            return Err(Error::Dimension("fabric needs at least one slice row and column".into()));
        }
        if self.bank_depth == 0 {
            return Err(Error::Dimension("bank depth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bank {
    pub id: BankId,
    pub width_bits: u32,
    pub depth: usize,
}

impl Bank {
    pub fn brams(&self) -> usize {
        self.width_bits.div_ceil(BRAM_WIDTH_BITS) as usize * self.depth.div_ceil(BRAM_DEPTH)
    }
}

#[derive(Debug, Clone)]
pub struct BankLayout {
    pub a: Vec<Bank>,
    pub b: Vec<Bank>,
    pub c: Vec<Bank>,
}

impl BankLayout {
    pub fn new(cfg: &FabricConfig) -> Self {
        let vb = cfg.precision.value_bits();
        let lane_bits = SLICE_DIM as u32 * vb;
        let (a_width, b_lanes) = match cfg.capability {
            Capability::DenseOnly => (lane_bits, 1),
            Capability::DynamicSparse => (lane_bits + SLICE_DIM as u32 * INDEX_BITS, SLICE_DIM),
        };
        let depth = cfg.bank_depth;
        let a = (0..cfg.y)
            .map(|y| Bank {
                id: BankId::A(y),
                width_bits: a_width,
                depth,
            })
            .collect();
        let b = (0..cfg.x)
            .flat_map(|chain| {
                (0..b_lanes).map(move |lane| Bank {
                    id: BankId::B { chain, lane },
                    width_bits: lane_bits,
                    depth,
                })
            })
            .collect();
        let c = (0..cfg.y)
            .flat_map(|row| {
                (0..cfg.x).map(move |col| Bank {
                    id: BankId::C { row, col },
                    width_bits: C_BANK_WIDTH_BITS,
                    depth,
                })
            })
            .collect();
        Self { a, b, c }
    }

    pub fn banks(&self) -> impl Iterator<Item = &Bank> {
        self.a.iter().chain(&self.b).chain(&self.c)
    }

    pub fn width(&self, id: BankId) -> Option<u32> {
        self.banks().find(|b| b.id == id).map(|b| b.width_bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BramCount {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub total: usize,
}

pub fn count_brams(cfg: &FabricConfig) -> BramCount {
    let layout = BankLayout::new(cfg);
    let sum = |banks: &[Bank]| banks.iter().map(Bank::brams).sum::<usize>();
    let (a, b, c) = (sum(&layout.a), sum(&layout.b), sum(&layout.c));
    BramCount { a, b, c, total: a + b + c }
}

/// The A operand: dense, or N:M compressed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AMatrix {
    Dense(DenseMatrix),
    Compressed(CompressedMatrix),
}

impl AMatrix {
    pub fn level(&self) -> SparsityLevel {
        match self {
            AMatrix::Dense(_) => SparsityLevel::Dense,
            AMatrix::Compressed(c) => c.level,
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            AMatrix::Dense(m) => m.precision,
            AMatrix::Compressed(c) => c.precision,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            AMatrix::Dense(m) => m.rows,
            AMatrix::Compressed(c) => c.rows,
        }
    }

    /// Reduction length the hardware streams over (padded K).
    pub fn logical_k(&self) -> usize {
        match self {
            AMatrix::Dense(m) => m.cols,
            AMatrix::Compressed(c) => c.logical_cols,
        }
    }

    /// Unpadded K.
    pub fn k(&self) -> usize {
        match self {
            AMatrix::Dense(m) => m.cols,
            AMatrix::Compressed(c) => c.cols,
        }
    }

    /// Stream steps per output tile.
    pub fn steps(&self) -> usize {
        match self {
            AMatrix::Dense(m) => m.cols,
            AMatrix::Compressed(c) => c.row_len(),
        }
    }

    pub fn operand(&self, row: usize, step: usize) -> AOperand {
        match self {
            AMatrix::Dense(m) => AOperand::new(m.get(row, step), 0),
            AMatrix::Compressed(c) => {
                let (w, idx) = c.value(row, step);
                AOperand::new(w, idx)
            }
        }
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        match self {
            AMatrix::Dense(m) => Ok(m.clone()),
            AMatrix::Compressed(c) => sparse_format::decode(c),
        }
    }

    fn pad_rows(&self, rows: usize) -> AMatrix {
        match self {
            AMatrix::Dense(m) => AMatrix::Dense(m.resized(rows, m.cols)),
            AMatrix::Compressed(c) => {
                let mut c = c.clone();
                let n = c.level.nonzeros_per_group();
                let extra = rows.saturating_sub(c.rows) * c.row_len();
                c.values.extend(std::iter::repeat_n(c.precision.zero(), extra));
                c.indices.extend((0..extra).map(|i| (i % n) as u8));
                c.rows = rows.max(c.rows);
                AMatrix::Compressed(c)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GemmProblem {
    pub a: AMatrix,
    pub b: DenseMatrix,
}

impl GemmProblem {
    /// Sparse levels require `a` to be compressed; B may have either the
    /// unpadded or the group-padded K rows.
    pub fn new(a: AMatrix, b: DenseMatrix) -> Result<Self> {
        if a.precision() != b.precision {
            return Err(Error::InvalidValue(format!(
                "A is {} but B is {}",
                a.precision(),
                b.precision
            )));
        }
        if let AMatrix::Compressed(c) = &a {
            c.check()?;
        }
        if b.rows != a.k() && b.rows != a.logical_k() {
            return Err(Error::Dimension(format!(
                "A has K = {} ({} padded) but B has {} rows",
                a.k(),
                a.logical_k(),
                b.rows
            )));
        }
        Ok(Self { a, b })
    }

    /// Compresses `a` when `level` is sparse.
    pub fn from_dense(a: &DenseMatrix, b: &DenseMatrix, level: SparsityLevel) -> Result<Self> {
        let a = if level.is_sparse() {
            AMatrix::Compressed(sparse_format::encode(a, level)?)
        } else {
            AMatrix::Dense(a.clone())
        };
        Self::new(a, b.clone())
    }

    pub fn level(&self) -> SparsityLevel {
        self.a.level()
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn k(&self) -> usize {
        self.a.k()
    }

    pub fn n(&self) -> usize {
        self.b.cols
    }
}

struct GemmSource {
    a: AMatrix,
    b: DenseMatrix,
    level: SparsityLevel,
    precision: Precision,
    /// (m block, n block) per job.
    tiles: Vec<(usize, usize)>,
    native_rows: usize,
    native_cols: usize,
}

impl OperandSource for GemmSource {
    fn level(&self) -> SparsityLevel {
        self.level
    }

    fn precision(&self) -> Precision {
        self.precision
    }

    fn a_lanes(&self, job: usize, step: usize, slice_row: usize) -> [AOperand; SLICE_DIM] {
        let row0 = self.tiles[job].0 * self.native_rows + SLICE_DIM * slice_row;
        std::array::from_fn(|r| self.a.operand(row0 + r, step))
    }

    fn b_lanes(&self, job: usize, step: usize, slice_col: usize) -> Option<[BVector; SLICE_DIM]> {
        let first = b_group_row(self.level, step)?;
        let col0 = self.tiles[job].1 * self.native_cols + SLICE_DIM * slice_col;
        let lanes = self.level.b_lanes();
        Some(std::array::from_fn(|c| {
            let mut v = BVector::zeros(self.level);
            for j in 0..lanes {
                v.lanes[j] = self.b.get(first + j, col0 + c);
            }
            v
        }))
    }
}

struct Prepared {
    source: GemmSource,
    schedule: Schedule,
    padded: (usize, usize, usize),
    warnings: Vec<String>,
}

fn prepare(cfg: &FabricConfig, p: &GemmProblem) -> Result<Prepared> {
    cfg.validate()?;
    let level = p.level();
    if !cfg.capability.supports(level) {
        return Err(Error::Capability {
            capability: cfg.capability.name(),
            level,
        });
    }
    if p.a.precision() != cfg.precision {
        return Err(Error::InvalidValue(format!(
            "fabric configured for {} but operands are {}",
            cfg.precision,
            p.a.precision()
        )));
    }
    let (m, n) = (p.m(), p.n());
    let k_hat = p.a.logical_k();
    if k_hat == 0 {
        return Err(Error::Dimension("K must be positive".into()));
    }
    if cfg.precision == Precision::Int8 && p.a.steps() > crate::spe::MAX_INT8_REDUCTION {
        return Err(Error::Dimension("int8 reduction longer than 2^17 could overflow int32".into()));
    }
    let m_hat = m.div_ceil(cfg.native_rows()) * cfg.native_rows();
    let n_hat = n.div_ceil(cfg.native_cols()) * cfg.native_cols();
    let mut warnings = Vec::new();
    if (m_hat, n_hat) != (m, n) {
        if !cfg.auto_pad {
            return Err(Error::Dimension(format!(
                "{m}x{n} output is not a multiple of the {}x{} native size",
                cfg.native_rows(),
                cfg.native_cols()
            )));
        }
        warnings.push(format!(
            "zero-padded {m}x{n} output to {m_hat}x{n_hat} ({}x{} native)",
            cfg.native_rows(),
            cfg.native_cols()
        ));
    }
    let a = p.a.pad_rows(m_hat);
    let b = p.b.resized(k_hat, n_hat);

    let steps = a.steps();
    let group = level.nonzeros_per_group();
    let chunk = cfg.k_chunk.unwrap_or(cfg.bank_depth).max(1).div_ceil(group) * group;
    let mut tiles = Vec::new();
    for nb in 0..n_hat / cfg.native_cols() {
        for mb in 0..m_hat / cfg.native_rows() {
            tiles.push((mb, nb));
        }
    }
    let schedule = Schedule::uniform(tiles.len(), steps, chunk);
    Ok(Prepared {
        source: GemmSource {
            a,
            b,
            level,
            precision: cfg.precision,
            tiles,
            native_rows: cfg.native_rows(),
            native_cols: cfg.native_cols(),
        },
        schedule,
        padded: (m_hat, k_hat, n_hat),
        warnings,
    })
}

#[derive(Debug, Clone)]
pub struct GemmRun {
    /// Product over the original (unpadded) M x N region.
    pub c: AccumMatrix,
    /// Every simulated clock including fill and drain.
    pub cycles: u64,
    pub enabled_cycles: u64,
    pub tiles: usize,
    /// Compressed K steps per output tile (K / speedup factor).
    pub steps_per_tile: usize,
    /// Steady-state cycles per tile (steps, or 4 for very short K).
    pub cycles_per_tile: usize,
    /// cycles - tiles * cycles_per_tile (without stalls).
    pub fill_drain: u64,
    pub padded: (usize, usize, usize),
    /// Useful (unpadded) MACs over SPE-cycles.
    pub utilization: f64,
    /// Lowest per-SPE live-MAC ratio between its first and last live MAC.
    pub steady_spe_utilization: f64,
    pub max_extract_buffer: usize,
    /// Every tile's four columns left each slice on consecutive cycles.
    pub extraction_regular: bool,
    pub warnings: Vec<String>,
    pub slice_stats: Vec<SliceStats>,
    pub trace: Vec<TraceEvent>,
}

pub fn run_gemm(cfg: &FabricConfig, p: &GemmProblem) -> Result<GemmRun> {
    run_gemm_with_stalls(cfg, p, |_| false)
}

/// Runs with `enable` deasserted on every cycle for which `stall` is true.
pub fn run_gemm_with_stalls(cfg: &FabricConfig, p: &GemmProblem, mut stall: impl FnMut(u64) -> bool) -> Result<GemmRun> {
    let prep = prepare(cfg, p)?;
    let layout = BankLayout::new(cfg);
    let spec = GridSpec {
        rows: cfg.y,
        cols: cfg.x,
        trace: cfg.trace,
    };
    let mut check = |_: u64, accesses: &[BankAccess]| check_widths(&layout, accesses);
    let run = grid::simulate(&spec, &prep.source, &prep.schedule, &mut stall, &mut check)?;
    assemble(cfg, p, prep, run)
}

fn check_widths(layout: &BankLayout, accesses: &[BankAccess]) -> Result<()> {
    let mut per_bank: BTreeMap<BankId, u32> = BTreeMap::new();
    for a in accesses {
        *per_bank.entry(a.bank).or_default() += a.bits;
    }
    for (bank, bits) in per_bank {
        let width = layout.width(bank).unwrap_or(0);
        if bits > width {
            return Err(Error::BandwidthInfeasible {
                bank: bank.to_string(),
                bits,
                width,
            });
        }
    }
    Ok(())
}

fn assemble(cfg: &FabricConfig, p: &GemmProblem, prep: Prepared, run: GridRun) -> Result<GemmRun> {
    let (m_hat, _, n_hat) = prep.padded;
    let mut full = AccumMatrix::zeros(cfg.precision, m_hat, n_hat);
    let mut written = vec![false; m_hat * n_hat];
    let mut extraction_regular = true;
    let mut first_cycle: BTreeMap<(usize, usize, u64), u64> = BTreeMap::new();
    for gc in &run.columns {
        let (mb, nb) = prep.source.tiles[gc.column.tile as usize];
        let col = nb * cfg.native_cols() + SLICE_DIM * gc.slice_col + gc.column.column as usize;
        for r in 0..SLICE_DIM {
            let row = mb * cfg.native_rows() + SLICE_DIM * gc.slice_row + r;
            full.set(row, col, gc.column.values[r]);
            written[row * n_hat + col] = true;
        }
        let start = *first_cycle
            .entry((gc.slice_row, gc.slice_col, gc.column.tile))
            .or_insert(gc.cycle - gc.column.column as u64);
        extraction_regular &= gc.cycle == start + gc.column.column as u64;
    }
    if written.iter().any(|w| !w) {
        return Err(Error::Simulation("some output positions were never extracted".into()));
    }

    let spans = prep.schedule.tile_spans();
    let cycles_per_tile = spans.first().copied().unwrap_or(0);
    let steps = prep.source.a.steps();
    let useful = (p.m() * p.n() * steps) as f64;
    let spe_cycles = (cfg.native_rows() * cfg.native_cols()) as f64 * run.cycles as f64;
    let steady = run
        .slices
        .iter()
        .flat_map(|s| s.spes.iter())
        .filter_map(|a| {
            let (f, l) = (a.first_live?, a.last_live?);
            Some(a.live_macs as f64 / (l - f + 1) as f64)
        })
        .fold(1.0f64, f64::min);
    Ok(GemmRun {
        c: full.cropped(p.m(), p.n()),
        cycles: run.cycles,
        enabled_cycles: run.enabled_cycles,
        tiles: prep.schedule.tiles,
        steps_per_tile: steps,
        cycles_per_tile,
        fill_drain: run.enabled_cycles.saturating_sub(prep.schedule.total_steps as u64),
        padded: prep.padded,
        utilization: if spe_cycles > 0.0 { useful / spe_cycles } else { 0.0 },
        steady_spe_utilization: steady,
        max_extract_buffer: run.slices.iter().map(|s| s.max_buffer).max().unwrap_or(0),
        extraction_regular,
        warnings: prep.warnings,
        slice_stats: run.slices,
        trace: run.trace,
    })
}

/// Fill/drain cycles of a fabric: 4 cycles per slice hop across the grid
/// plus the last tile's 4-column extraction, minus one. Measured by
/// [`calibrate_fill_drain`]; this closed form is what it reports.
pub fn fill_drain_cycles(y: usize, x: usize) -> u64 {
    (SLICE_DIM * (y + x) - 1) as u64
}

/// Measures the per-GEMM fill/drain constant by simulating one native
/// tile of zeros at `level`.
pub fn calibrate_fill_drain(cfg: &FabricConfig, level: SparsityLevel) -> Result<u64> {
    let k = 4 * SLICE_DIM * level.group_size();
    let a = DenseMatrix::zeros(cfg.precision, cfg.native_rows(), k);
    let b = DenseMatrix::zeros(cfg.precision, k, cfg.native_cols());
    let mut c = cfg.clone();
    c.trace = false;
    let run = run_gemm(&c, &GemmProblem::from_dense(&a, &b, level)?)?;
    Ok(run.fill_drain)
}

#[derive(Debug, Clone)]
pub struct BankSchedule {
    /// Accesses per enabled cycle (reads of A/B only).
    pub cycles: Vec<Vec<BankAccess>>,
    pub peak_bits: BTreeMap<BankId, u32>,
    pub banks_used: BTreeSet<BankId>,
    pub layout: BankLayout,
}

impl BankSchedule {
    pub fn reads_on(&self, cycle: usize) -> &[BankAccess] {
        &self.cycles[cycle]
    }

    pub fn b_lanes_used(&self, chain: usize) -> BTreeSet<usize> {
        self.banks_used
            .iter()
            .filter_map(|b| match b {
                BankId::B { chain: c, lane } if *c == chain => Some(*lane),
                _ => None,
            })
            .collect()
    }
}

/// Per-cycle buffer read plan of a GEMM without stalls.
pub fn bank_schedule(cfg: &FabricConfig, p: &GemmProblem) -> Result<BankSchedule> {
    let prep = prepare(cfg, p)?;
    let layout = BankLayout::new(cfg);
    let spec = GridSpec {
        rows: cfg.y,
        cols: cfg.x,
        trace: false,
    };
    let horizon = prep.schedule.total_steps + SLICE_DIM * cfg.y.max(cfg.x);
    let mut cycles = Vec::with_capacity(horizon);
    let mut peak_bits: BTreeMap<BankId, u32> = BTreeMap::new();
    let mut banks_used = BTreeSet::new();
    for t in 0..horizon {
        let mut reads = Vec::new();
        grid::stream_reads(&prep.source, &prep.schedule, &spec, t, &mut reads);
        check_widths(&layout, &reads)?;
        for r in &reads {
            let peak = peak_bits.entry(r.bank).or_default();
            *peak = (*peak).max(r.bits);
            banks_used.insert(r.bank);
        }
        cycles.push(reads);
    }
    Ok(BankSchedule {
        cycles,
        peak_bits,
        banks_used,
        layout,
    })
}

/// Result of one slice tile.
#[derive(Debug, Clone)]
pub struct TileResult {
    pub block: AccumMatrix,
    /// Steady-state cycles for this tile (K / speedup, at least 4).
    pub cycles_per_tile: usize,
    /// Every clock of the run including fill and drain.
    pub cycles: u64,
}

/// Drives a single slice one 4 x K by K x 4 tile at a time.
///
/// Chaining keeps `accumulate` asserted across the tile boundary, so the
/// block continues from the previous tile's accumulators. The runner
/// replays the chained stream as one tile, which is what the slice sees.
#[derive(Debug, Clone)]
pub struct SliceRunner {
    cfg: FabricConfig,
    chain: Option<GemmProblem>,
}

impl SliceRunner {
    pub fn new(precision: Precision) -> Self {
        Self {
            cfg: FabricConfig::new(1, 1, precision),
            chain: None,
        }
    }

    pub fn run_tile(&mut self, a: AMatrix, b: DenseMatrix, accumulate_chain: bool) -> Result<TileResult> {
        if a.rows() != SLICE_DIM || b.cols != SLICE_DIM {
            return Err(Error::Dimension(format!(
                "a slice tile is 4 x K by K x 4, got {} rows and {} columns",
                a.rows(),
                b.cols
            )));
        }
        let tile = GemmProblem::new(a, b)?;
        let own = run_gemm(&self.cfg, &tile)?;
        let problem = match self.chain.take() {
            Some(prev) if accumulate_chain => concat_k(&prev, &tile)?,
            _ => tile,
        };
        let block = if problem.a.steps() == own.steps_per_tile {
            own.c.clone()
        } else {
            run_gemm(&self.cfg, &problem)?.c
        };
        self.chain = Some(problem);
        Ok(TileResult {
            block,
            cycles_per_tile: own.cycles_per_tile,
            cycles: own.cycles,
        })
    }
}

fn concat_k(first: &GemmProblem, second: &GemmProblem) -> Result<GemmProblem> {
    if first.level() != second.level() {
        return Err(Error::Reconfiguration("cannot chain tiles of different sparsity levels".into()));
    }
    let b1 = first.b.resized(first.a.logical_k(), SLICE_DIM);
    let b2 = second.b.resized(second.a.logical_k(), SLICE_DIM);
    let mut data = b1.data.clone();
    data.extend_from_slice(&b2.data);
    let b = DenseMatrix::from_words(b1.precision, b1.rows + b2.rows, SLICE_DIM, data)?;
    let a = match (&first.a, &second.a) {
        (AMatrix::Dense(x), AMatrix::Dense(y)) => {
            let mut m = DenseMatrix::zeros(x.precision, SLICE_DIM, x.cols + y.cols);
            for r in 0..SLICE_DIM {
                for k in 0..x.cols {
                    m.set(r, k, x.get(r, k));
                }
                for k in 0..y.cols {
                    m.set(r, x.cols + k, y.get(r, k));
                }
            }
            AMatrix::Dense(m)
        }
        (AMatrix::Compressed(x), AMatrix::Compressed(y)) => {
            let mut c = x.clone();
            c.cols = x.logical_cols + y.cols;
            c.logical_cols = x.logical_cols + y.logical_cols;
            c.values.clear();
            c.indices.clear();
            for r in 0..SLICE_DIM {
                for src in [x, y] {
                    let s = r * src.row_len();
                    c.values.extend_from_slice(&src.values[s..s + src.row_len()]);
                    c.indices.extend_from_slice(&src.indices[s..s + src.row_len()]);
                }
            }
            AMatrix::Compressed(c)
        }
        _ => return Err(Error::Reconfiguration("cannot chain dense and compressed tiles".into())),
    };
    GemmProblem::new(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_problem, rng};
    use crate::oracle::reference;

    #[allow(clippy::too_many_arguments)]
    fn check(y: usize, x: usize, p: Precision, level: SparsityLevel, m: usize, k: usize, n: usize, seed: u64) -> GemmRun {
        let prob = random_problem(&mut rng(seed), p, level, m, k, n).unwrap();
        let run = run_gemm(&FabricConfig::new(y, x, p), &prob).unwrap();
        assert_eq!(run.c, reference(&prob.a, &prob.b), "{y}x{x} {p} {level} {m}x{k}x{n}");
        run
    }

    #[test]
    fn identity_returns_b() {
        let b = crate::gen::random_dense(&mut rng(3), Precision::Int8, 4, 4);
        let a = DenseMatrix::identity(Precision::Int8, 4);
        let run = run_gemm(&FabricConfig::new(1, 1, Precision::Int8), &GemmProblem::from_dense(&a, &b, SparsityLevel::Dense).unwrap()).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(run.c.get_i32(r, c), b.get_i8(r, c) as i32);
            }
        }
    }

    #[test]
    fn two_by_two_one_of_four() {
        let run = check(2, 2, Precision::Int8, SparsityLevel::S1of4, 8, 64, 8, 1);
        assert_eq!(run.cycles_per_tile, 16);
        assert_eq!(run.cycles, 16 + fill_drain_cycles(2, 2));
    }

    #[test]
    fn cycle_formula_all_levels() {
        for p in Precision::ALL {
            for level in SparsityLevel::ALL {
                for (y, x) in [(1, 1), (2, 3), (3, 1)] {
                    let run = check(y, x, p, level, 4 * y * 2, 36, 4 * x * 2, 5);
                    let s = run.cycles_per_tile.max(4) as u64;
                    assert_eq!(run.cycles, 4 * s + fill_drain_cycles(y, x), "{p} {level} {y}x{x}");
                    assert!(run.max_extract_buffer <= 6);
                    assert!(run.extraction_regular);
                }
            }
        }
    }

    #[test]
    fn short_k_and_padding() {
        for level in SparsityLevel::ALL {
            check(2, 2, Precision::Bfloat16, level, 5, 3, 7, 9);
            check(1, 2, Precision::Int8, level, 3, 1, 9, 10);
        }
    }

    #[test]
    fn chunked_k() {
        let prob = random_problem(&mut rng(2), Precision::Bfloat16, SparsityLevel::S2of4, 8, 40, 8).unwrap();
        let mut cfg = FabricConfig::new(2, 1, Precision::Bfloat16);
        cfg.k_chunk = Some(6);
        let run = run_gemm(&cfg, &prob).unwrap();
        assert_eq!(run.c, reference(&prob.a, &prob.b));
    }
}
