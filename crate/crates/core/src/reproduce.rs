//! Recomputes the published summary numbers and compares them with the
//! reference data file.

use serde::Serialize;

use crate::error::Result;
use crate::fabric::{count_brams, run_gemm, Capability, FabricConfig, GemmProblem};
use crate::gen::{random_problem, rng};
use crate::perf_model::effective_throughput;
use crate::precision::Precision;
use crate::reference::ReferenceValues;
use crate::sparse_format::{bitmap_compression_ratio, compression_ratio, SparsityLevel};

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub group: &'static str,
    pub key: String,
    pub computed: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub relative: bool,
    pub pass: bool,
}

fn cell(r: &ReferenceValues, group: &'static str, key: String, computed: f64) -> Cell {
    let v = r.get(&key);
    Cell {
        group,
        pass: v.accepts(computed),
        reference: v.value,
        tolerance: v.tolerance,
        relative: v.relative,
        key,
        computed,
    }
}

/// Dense over sparse cycle ratio on a 1 x 1 fabric for a K x 4 tile.
pub fn simulated_speedup(level: SparsityLevel, k: usize) -> Result<f64> {
    let cycles = |l: SparsityLevel| -> Result<u64> {
        let p: GemmProblem = random_problem(&mut rng(11), Precision::Int8, l, 4, k, 4)?;
        Ok(run_gemm(&FabricConfig::new(1, 1, Precision::Int8), &p)?.cycles)
    };
    Ok(cycles(SparsityLevel::Dense)? as f64 / cycles(level)? as f64)
}

pub fn summary_cells() -> Result<Vec<Cell>> {
    let r = ReferenceValues::bundled();
    let mut cells = Vec::new();
    for level in SparsityLevel::SPARSE {
        for p in Precision::ALL {
            cells.push(cell(&r, "compression", format!("compression_ratio.{level}.{p}"), compression_ratio(level, p)));
        }
    }
    for level in SparsityLevel::SPARSE {
        cells.push(cell(&r, "speedup", format!("speedup.{level}"), simulated_speedup(level, 512)?));
    }
    let dim = r.get("platform.array_dim").value as usize;
    for p in Precision::ALL {
        let cfg = FabricConfig {
            capability: Capability::DynamicSparse,
            ..FabricConfig::new(dim / 4, dim / 4, p)
        };
        cells.push(cell(&r, "brams", format!("brams.{p}"), count_brams(&cfg).total as f64));
    }
    for design in ["sst", "sdt_gio", "clb_dsp"] {
        for p in Precision::ALL {
            let f = r.get(&format!("frequency_mhz.{design}.{p}")).value * 1e6;
            let level = match r.get(&format!("throughput_factor.{design}.{p}")).value as usize {
                1 => SparsityLevel::Dense,
                2 => SparsityLevel::S2of4,
                3 => SparsityLevel::S1of3,
                _ => SparsityLevel::S1of4,
            };
            let t = effective_throughput(dim, dim, f, level);
            cells.push(cell(&r, "throughput", format!("throughput_tops.{design}.{p}"), t));
        }
    }
    for p in Precision::ALL {
        let l = SparsityLevel::S1of4;
        let gain = compression_ratio(l, p) / bitmap_compression_ratio(l, p) - 1.0;
        cells.push(cell(&r, "format", format!("bitmap_gain.1:4.{p}"), gain));
    }
    Ok(cells)
}
