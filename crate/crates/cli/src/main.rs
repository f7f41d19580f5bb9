//! `sstsim`: simulate, estimate, prune, verify and reproduce.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sst_core::fabric::{count_brams, run_gemm_with_stalls, AMatrix, Capability, FabricConfig, GemmProblem};
use sst_core::gen::{below, chance, random_dense, random_problem, rng};
use sst_core::io::{self, MatrixFile, ProblemFile};
use sst_core::matrix::DenseMatrix;
use sst_core::oracle::{first_mismatch, reference};
use sst_core::perf_model::{estimate_network, MemoryMode, NetworkSpec, PlatformSpec};
use sst_core::reference::ReferenceValues;
use sst_core::sparse_format::{compression_ratio, encode, prune_magnitude};
use sst_core::{reproduce, trace, Error, Precision, SparsityLevel};

#[derive(Parser)]
#[command(name = "sstsim", version, about = "Systolic sparse tensor slice simulator and estimator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one GEMM on the cycle simulator and check it against the oracle.
    Sim(SimArgs),
    /// Estimate network latency against the dense baseline.
    Estimate(EstimateArgs),
    /// Magnitude-prune a matrix to an N:M pattern.
    Prune(PruneArgs),
    /// Check the simulator against the oracle on a problem file or a random sweep.
    Verify(VerifyArgs),
    /// Recompute the published summary numbers.
    Tables(OutputArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FabricArgs {
    #[arg(long = "Y", visible_alias = "y", default_value_t = 1)]
    y: usize,
    #[arg(long = "X", visible_alias = "x", default_value_t = 1)]
    x: usize,
    #[arg(long, default_value = "int8")]
    precision: Precision,
    /// Bank depth in entries.
    #[arg(long, default_value_t = 512)]
    depth: usize,
    /// Model the dense-only fabric.
    #[arg(long)]
    dense_only: bool,
    #[arg(long, env = "SSTSIM_FREQ_HZ", default_value_t = 600e6)]
    freq: f64,
}

impl FabricArgs {
    fn config(&self) -> FabricConfig {
        FabricConfig {
            capability: if self.dense_only {
                Capability::DenseOnly
            } else {
                Capability::DynamicSparse
            },
            bank_depth: self.depth,
            frequency_hz: self.freq,
            ..FabricConfig::new(self.y, self.x, self.precision)
        }
    }
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    fabric: FabricArgs,
    #[arg(long, default_value = "dense")]
    level: SparsityLevel,
    #[arg(long = "M", visible_alias = "m", default_value_t = 16)]
    m: usize,
    #[arg(long = "K", visible_alias = "k", default_value_t = 64)]
    k: usize,
    #[arg(long = "N", visible_alias = "n", default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use A = identity (K = M).
    #[arg(long)]
    identity: bool,
    /// Problem file with both operands.
    #[arg(long, conflicts_with_all = ["a", "b", "identity"])]
    problem: Option<PathBuf>,
    /// A matrix file; dense files are compressed to --level.
    #[arg(long)]
    a: Option<PathBuf>,
    /// B matrix file (random when omitted).
    #[arg(long)]
    b: Option<PathBuf>,
    /// Compressed K steps per buffered chunk.
    #[arg(long)]
    k_chunk: Option<usize>,
    /// Fail instead of zero-padding M and N.
    #[arg(long)]
    no_pad: bool,
    /// Probability of a stall (enable low) on each cycle.
    #[arg(long, default_value_t = 0.0)]
    stall_prob: f64,
    /// Write the per-SPE event trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the product matrix as JSON.
    #[arg(long)]
    dump_c: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EstimateArgs {
    /// Network file, or the name of a bundled network.
    network: String,
    /// Override the network precision.
    #[arg(long)]
    precision: Option<Precision>,
    /// Put every sparse weight layer at this level.
    #[arg(long)]
    uniform: Option<SparsityLevel>,
    #[arg(long = "Y", visible_alias = "y")]
    y: Option<usize>,
    #[arg(long = "X", visible_alias = "x")]
    x: Option<usize>,
    #[arg(long, env = "SSTSIM_DRAM_BW")]
    dram_bw: Option<f64>,
    /// Sparse-design clock for the chosen precision.
    #[arg(long, env = "SSTSIM_FREQ_HZ")]
    freq: Option<f64>,
    /// Baseline clock for the chosen precision.
    #[arg(long, env = "SSTSIM_BASELINE_FREQ_HZ")]
    baseline_freq: Option<f64>,
    /// Add memory and compute time instead of overlapping them.
    #[arg(long)]
    serial: bool,
    /// Measure the fill/drain constant on the simulator first.
    #[arg(long)]
    calibrate: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct PruneArgs {
    /// Dense matrix file.
    #[arg(long, required_unless_present = "random")]
    input: Option<PathBuf>,
    /// Generate a random ROWSxCOLS matrix instead.
    #[arg(long, conflicts_with = "input")]
    random: Option<String>,
    #[arg(long, default_value = "int8")]
    precision: Precision,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    level: SparsityLevel,
    /// Pruned matrix destination.
    #[arg(long)]
    output: PathBuf,
    /// Store the compressed form instead of the pruned dense matrix.
    #[arg(long)]
    compressed: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Problem file to check; a random sweep when omitted.
    #[arg(long)]
    problem: Option<PathBuf>,
    #[command(flatten)]
    fabric: FabricArgs,
    /// Random problems in the sweep.
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    threads: usize,
}

/// A failed check rather than a usage problem.
struct Failed(String);

enum Outcome {
    Usage(Error),
    Failed(String),
}

impl From<Error> for Outcome {
    fn from(e: Error) -> Self {
        match e {
            Error::PatternViolation { .. }
            | Error::IndexOutOfGroup { .. }
            | Error::ExtractOverflow { .. }
            | Error::Simulation(_) => Outcome::Failed(e.to_string()),
            other => Outcome::Usage(other),
        }
    }
}

impl From<Failed> for Outcome {
    fn from(f: Failed) -> Self {
        Outcome::Failed(f.0)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Sim(a) => sim(a),
        Command::Estimate(a) => estimate(a),
        Command::Prune(a) => prune(a),
        Command::Verify(a) => verify(a),
        Command::Tables(a) => tables(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Outcome::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Outcome::Failed(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: &OutputArgs, value: &Value, csv: impl FnOnce() -> String) -> Result<(), Outcome> {
    let text = match out.format {
        Format::Json => serde_json::to_string_pretty(value).map_err(Error::from)? + "\n",
        Format::Csv => csv(),
    };
    match &out.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?,
        None => print!("{text}"),
    }
    Ok(())
}

fn key_value_csv(value: &Value) -> String {
    let mut s = String::from("key,value\n");
    if let Value::Object(map) = value {
        for (k, v) in map {
            if !v.is_object() && !v.is_array() {
                let v = v.as_str().map(str::to_owned).unwrap_or_else(|| v.to_string());
                let _ = writeln!(s, "{k},{v}");
            }
        }
    }
    s
}

fn load_problem(a: &SimArgs, cfg: &FabricConfig) -> Result<GemmProblem, Error> {
    let p = cfg.precision;
    let mut g = rng(a.seed);
    if let Some(path) = &a.problem {
        let file: ProblemFile = io::read_json(path)?;
        let prob = file.to_problem()?;
        return compress_to(prob, a.level);
    }
    if a.identity {
        let a_m = DenseMatrix::identity(p, a.m);
        let b = match &a.b {
            Some(path) => io::read_json::<MatrixFile>(path)?.to_dense()?,
            None => random_dense(&mut g, p, a.m, a.n),
        };
        return GemmProblem::from_dense(&a_m, &b, SparsityLevel::Dense);
    }
    match &a.a {
        Some(path) => {
            let file: MatrixFile = io::read_json(path)?;
            let am = file.to_a()?;
            let b = match &a.b {
                Some(path) => io::read_json::<MatrixFile>(path)?.to_dense()?,
                None => random_dense(&mut g, file.precision, am.k(), a.n),
            };
            compress_to(GemmProblem::new(am, b)?, a.level)
        }
        None => random_problem(&mut g, p, a.level, a.m, a.k, a.n),
    }
}

/// Dense A operands are compressed to the requested level.
fn compress_to(p: GemmProblem, level: SparsityLevel) -> Result<GemmProblem, Error> {
    match &p.a {
        AMatrix::Dense(m) if level.is_sparse() => GemmProblem::new(AMatrix::Compressed(encode(m, level)?), p.b),
        _ => Ok(p),
    }
}

fn sim(a: SimArgs) -> Result<(), Outcome> {
    let mut cfg = a.fabric.config();
    cfg.k_chunk = a.k_chunk;
    cfg.auto_pad = !a.no_pad;
    cfg.trace = a.trace.is_some();
    let prob = load_problem(&a, &cfg)?;
    if prob.a.precision() != cfg.precision {
        cfg.precision = prob.a.precision();
    }
    if !(0.0..1.0).contains(&a.stall_prob) {
        return Err(Error::InvalidValue("--stall-prob must be in [0, 1)".into()).into());
    }
    let mut stall_rng = rng(a.seed ^ 0x5eed);
    let stall_prob = a.stall_prob;
    let run = run_gemm_with_stalls(&cfg, &prob, |_| {
        stall_prob > 0.0 && chance(&mut stall_rng, stall_prob)
    })?;
    let expected = reference(&prob.a, &prob.b);
    let mismatch = first_mismatch(&run.c, &expected);
    if let Some(path) = &a.trace {
        let f = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        trace::write_csv(std::io::BufWriter::new(f), &run.trace).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    if let Some(path) = &a.dump_c {
        io::write_json(path, &io::AccumFile::from_matrix(&run.c))?;
    }
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    let brams = count_brams(&cfg);
    let report = json!({
        "command": "sim",
        "precision": cfg.precision.name(),
        "level": prob.level().name(),
        "capability": cfg.capability.name(),
        "Y": cfg.y,
        "X": cfg.x,
        "M": prob.m(),
        "K": prob.k(),
        "N": prob.n(),
        "padded_M": run.padded.0,
        "padded_K": run.padded.1,
        "padded_N": run.padded.2,
        "cycles": run.cycles,
        "enabled_cycles": run.enabled_cycles,
        "tiles": run.tiles,
        "steps_per_tile": run.steps_per_tile,
        "cycles_per_tile": run.cycles_per_tile,
        "fill_drain": run.fill_drain,
        "time_s": run.cycles as f64 / cfg.frequency_hz,
        "utilization": run.utilization,
        "max_extract_buffer": run.max_extract_buffer,
        "brams_a": brams.a,
        "brams_b": brams.b,
        "brams_c": brams.c,
        "brams_total": brams.total,
        "checksum": format!("{:016x}", run.c.checksum()),
        "pass": mismatch.is_none(),
        "warnings": run.warnings,
    });
    emit(&a.output, &report, || key_value_csv(&report))?;
    match mismatch {
        None => Ok(()),
        Some((r, c)) => Err(Failed(format!("C[{r}][{c}] differs from the oracle")).into()),
    }
}

fn load_network(spec: &str) -> Result<NetworkSpec, Error> {
    if let Some(n) = io::bundled_network(spec) {
        return Ok(n);
    }
    io::read_network(Path::new(spec))
}

fn estimate(a: EstimateArgs) -> Result<(), Outcome> {
    let mut net = load_network(&a.network)?;
    if let Some(p) = a.precision {
        net.precision = p;
    }
    if let Some(level) = a.uniform {
        net = net.with_uniform_level(level);
    }
    let p = net.precision;
    let mut sst = PlatformSpec::sst();
    let mut base = PlatformSpec::dense_baseline();
    for plat in [&mut sst, &mut base] {
        plat.y = a.y.unwrap_or(plat.y);
        plat.x = a.x.unwrap_or(plat.x);
        plat.dram_bw_bytes_per_s = a.dram_bw.unwrap_or(plat.dram_bw_bytes_per_s);
        if a.serial {
            plat.memory_mode = MemoryMode::Serial;
        }
    }
    let set_freq = |plat: &mut PlatformSpec, f: Option<f64>| match (p, f) {
        (Precision::Int8, Some(f)) => plat.freq_int8_hz = f,
        (Precision::Bfloat16, Some(f)) => plat.freq_bf16_hz = f,
        _ => {}
    };
    set_freq(&mut sst, a.freq);
    set_freq(&mut base, a.baseline_freq);
    sst.validate()?;
    base.validate()?;
    if a.calibrate {
        sst.calibrate(p)?;
        base.calibrate(p)?;
    }
    let e = estimate_network(&net, &sst, &base);
    let reference = reference_for(&a.network, a.uniform.is_none() && a.precision.is_none(), p);
    let report = json!({
        "command": "estimate",
        "network": e.name,
        "precision": p.name(),
        "memory_mode": if a.serial { "serial" } else { "overlap" },
        "model": "layer time = max(compute, memory) with double-buffered DRAM transfers; sum in serial mode",
        "fill_drain_cycles": sst.fill_drain_cycles(),
        "total_time_s": e.total_time_s,
        "baseline_time_s": e.baseline_time_s,
        "speedup": e.speedup,
        "weight_reduction": e.weight_reduction,
        "weight_bytes": e.weight_bytes,
        "dense_weight_bytes": e.dense_weight_bytes,
        "reference": reference,
        "layers": e.layers.iter().map(|c| json!({
            "name": c.sparse.name,
            "level": c.sparse.level.name(),
            "count": c.sparse.count,
            "padded": [c.sparse.padded.0, c.sparse.padded.1, c.sparse.padded.2],
            "compute_cycles": c.sparse.compute_cycles,
            "baseline_compute_cycles": c.baseline.compute_cycles,
            "compute_time_s": c.sparse.compute_time_s,
            "memory_time_s": c.sparse.memory_time_s,
            "layer_time_s": c.sparse.layer_time_s,
            "baseline_time_s": c.baseline.layer_time_s,
            "memory_bound": c.sparse.memory_bound(),
            "speedup": c.speedup,
        })).collect::<Vec<_>>(),
    });
    emit(&a.output, &report, || {
        let mut s = String::from(
            "layer,level,count,M,K,N,compute_cycles,baseline_compute_cycles,layer_time_s,baseline_time_s,memory_bound,speedup\n",
        );
        for c in &e.layers {
            let l = &c.sparse;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{:e},{:e},{},{:.4}",
                l.name,
                l.level,
                l.count,
                l.padded.0,
                l.padded.1,
                l.padded.2,
                l.compute_cycles,
                c.baseline.compute_cycles,
                l.layer_time_s,
                c.baseline.layer_time_s,
                l.memory_bound(),
                c.speedup
            );
        }
        let _ = writeln!(
            s,
            "total,,,,,,,,{:e},{:e},,{:.4}",
            e.total_time_s, e.baseline_time_s, e.speedup
        );
        s
    })?;
    Ok(())
}

/// Published speedup and weight reduction for a bundled network run as shipped.
fn reference_for(network: &str, as_shipped: bool, p: Precision) -> Value {
    let stem = Path::new(network)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(network);
    let r = ReferenceValues::bundled();
    let key = format!("network.{stem}.speedup");
    if !as_shipped || !r.values.contains_key(&key) {
        return Value::Null;
    }
    json!({
        "speedup": r.get(&key).value,
        "weight_reduction": r.get(&format!("network.{stem}.weight_reduction.{p}")).value,
    })
}

fn parse_dims(s: &str) -> Result<(usize, usize), Error> {
    let bad = || Error::InvalidValue(format!("expected ROWSxCOLS, got '{s}'"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?))
}

fn prune(a: PruneArgs) -> Result<(), Outcome> {
    let m = match (&a.input, &a.random) {
        (Some(path), _) => io::read_json::<MatrixFile>(path)?.to_dense()?,
        (None, Some(dims)) => {
            let (r, c) = parse_dims(dims)?;
            random_dense(&mut rng(a.seed), a.precision, r, c)
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let pruned = prune_magnitude(&m, a.level);
    let dense_bytes = pruned.storage_bytes();
    let (file, stored_bytes) = if a.level.is_sparse() {
        let c = encode(&pruned, a.level)?;
        let bytes = c.storage_bytes();
        let file = if a.compressed {
            MatrixFile::from_compressed(&c)
        } else {
            MatrixFile::from_dense(&pruned)
        };
        (file, bytes)
    } else {
        (MatrixFile::from_dense(&pruned), dense_bytes)
    };
    io::write_json(&a.output, &file)?;
    let total = (pruned.rows * pruned.cols).max(1);
    let report = json!({
        "command": "prune",
        "level": a.level.name(),
        "precision": pruned.precision.name(),
        "rows": pruned.rows,
        "cols": pruned.cols,
        "zero_fraction": pruned.count_zeros() as f64 / total as f64,
        "dense_bytes": dense_bytes,
        "compressed_bytes": stored_bytes,
        "compression_ratio": dense_bytes as f64 / stored_bytes as f64,
        "nominal_compression_ratio": compression_ratio(a.level, pruned.precision),
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<(), Outcome> {
    if let Some(path) = &a.problem {
        let file: ProblemFile = io::read_json(path)?;
        let prob = file.to_problem()?;
        let mut cfg = a.fabric.config();
        cfg.precision = prob.a.precision();
        let run = sst_core::run_gemm(&cfg, &prob)?;
        if let Some((r, c)) = first_mismatch(&run.c, &reference(&prob.a, &prob.b)) {
            return Err(Failed(format!("C[{r}][{c}] differs from the oracle")).into());
        }
        println!("{}", json!({"command": "verify", "problems": 1, "failures": 0, "cycles": run.cycles}));
        return Ok(());
    }
    let cases: Vec<usize> = (0..a.count).collect();
    let threads = a.threads.clamp(1, 64);
    let chunk = cases.len().div_ceil(threads).max(1);
    let results: Vec<Result<Option<String>, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = cases
            .chunks(chunk)
            .map(|ids| s.spawn(move || ids.iter().map(|i| verify_case(a.seed, *i)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut failures = Vec::new();
    for r in results {
        if let Some(msg) = r? {
            failures.push(msg);
        }
    }
    println!(
        "{}",
        json!({"command": "verify", "problems": a.count, "failures": failures.len(), "first_failure": failures.first()})
    );
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failed(format!("{} of {} problems differ; first: {}", failures.len(), a.count, failures[0])).into())
    }
}

/// Case `i` of the sweep: grid, level and precision cycle through all
/// combinations; sizes come from the seed.
fn verify_case(seed: u64, i: usize) -> Result<Option<String>, Error> {
    let grids = [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (1, 3), (3, 2), (2, 3), (3, 3)];
    let (y, x) = grids[i % grids.len()];
    let level = SparsityLevel::ALL[(i / grids.len()) % 4];
    let p = Precision::ALL[(i / (grids.len() * 4)) % 2];
    let mut g = rng(seed.wrapping_mul(0x9e37_79b9).wrapping_add(i as u64));
    let dim = |g: &mut _, hi: usize| 1 + below(g, hi);
    let (m, k, n) = (dim(&mut g, 4 * y * 2 + 3), dim(&mut g, 48), dim(&mut g, 4 * x * 2 + 3));
    let prob = random_problem(&mut g, p, level, m, k, n)?;
    let run = sst_core::run_gemm(&FabricConfig::new(y, x, p), &prob)?;
    Ok(first_mismatch(&run.c, &reference(&prob.a, &prob.b))
        .map(|(r, c)| format!("case {i} ({y}x{x} {p} {level} {m}x{k}x{n}) C[{r}][{c}]")))
}

fn tables(out: OutputArgs) -> Result<(), Outcome> {
    let cells = reproduce::summary_cells()?;
    let report = json!({
        "command": "tables",
        "cells": cells,
        "pass": cells.iter().all(|c| c.pass),
    });
    emit(&out, &report, || {
        let mut s = String::from("group,key,computed,reference,tolerance,relative,pass\n");
        for c in &cells {
            let _ = writeln!(
                s,
                "{},{},{:.4},{},{},{},{}",
                c.group, c.key, c.computed, c.reference, c.tolerance, c.relative, c.pass
            );
        }
        s
    })?;
    match cells.iter().find(|c| !c.pass) {
        None => Ok(()),
        Some(c) => Err(Failed(format!("{} = {:.4}, expected {}", c.key, c.computed, c.reference)).into()),
    }
}
