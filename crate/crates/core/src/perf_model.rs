//! Analytical layer and network estimator.
//!
//! Each layer is a GEMM on the Y x X fabric. Compute time follows the
//! simulator's cycle count (padded tiles times steady-state tile length
//! plus a fill/drain constant); memory time moves compressed weights and
//! dense activations over DRAM once. The two overlap by default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fabric::{self, Capability, FabricConfig};
use crate::precision::Precision;
use crate::reference::ReferenceValues;
use crate::schedule::MIN_TILE_STEPS;
use crate::slice::SLICE_DIM;
use crate::sparse_format::{compression_ratio, SparsityLevel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub level: SparsityLevel,
    #[serde(default = "one")]
    pub count: usize,
    /// A is a stored weight (false for activation-activation products
    /// such as attention scores, which never count toward weight memory).
    #[serde(default = "yes")]
    pub weights: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl LayerSpec {
    pub fn new(name: &str, m: usize, k: usize, n: usize, level: SparsityLevel) -> Self {
        Self {
            name: name.into(),
            m,
            k,
            n,
            level,
            count: 1,
            weights: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub precision: Precision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        let schema = |path: String, message: &str| Error::Schema {
            path,
            message: message.into(),
        };
        if self.layers.is_empty() {
            return Err(schema("layers".into(), "network has no layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.m == 0 || l.k == 0 || l.n == 0 {
                return Err(schema(format!("layers[{i}] ({})", l.name), "M, K and N must be positive"));
            }
            if l.count == 0 {
                return Err(schema(format!("layers[{i}].count ({})", l.name), "count must be positive"));
            }
        }
        Ok(())
    }

    /// Every weight layer at `level`; activation products stay dense.
    pub fn with_uniform_level(&self, level: SparsityLevel) -> NetworkSpec {
        let mut n = self.clone();
        for l in n.layers.iter_mut().filter(|l| l.weights && l.level.is_sparse()) {
            l.level = level;
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryMode {
    /// Double-buffered: layer time is the larger of compute and memory.
    Overlap,
    /// Compute waits for memory: layer time is the sum.
    Serial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub y: usize,
    pub x: usize,
    pub capability: Capability,
    pub dram_bw_bytes_per_s: f64,
    pub freq_int8_hz: f64,
    pub freq_bf16_hz: f64,
    pub memory_mode: MemoryMode,
    /// Per-GEMM fill/drain cycles; the simulator's constant when unset.
    pub fill_drain: Option<u64>,
}

impl PlatformSpec {
    /// Published 40 x 40 sparse-capable design and DRAM setup.
    pub fn sst() -> Self {
        Self::published("sst", Capability::DynamicSparse)
    }

    /// Dense-only baseline of the same size at its own published clocks.
    pub fn dense_baseline() -> Self {
        Self::published("sdt_gio", Capability::DenseOnly)
    }

    fn published(design: &str, capability: Capability) -> Self {
        let r = ReferenceValues::bundled();
        let slices = r.get("platform.array_dim").value as usize / SLICE_DIM;
        let mhz = |p: &str| r.get(&format!("frequency_mhz.{design}.{p}")).value * 1e6;
        Self {
            y: slices,
            x: slices,
            capability,
            dram_bw_bytes_per_s: r.get("platform.dram_bw_bytes_per_s").value,
            freq_int8_hz: mhz("int8"),
            freq_bf16_hz: mhz("bfloat16"),
            memory_mode: MemoryMode::Overlap,
            fill_drain: None,
        }
    }

    pub fn frequency(&self, p: Precision) -> f64 {
        match p {
            Precision::Int8 => self.freq_int8_hz,
            Precision::Bfloat16 => self.freq_bf16_hz,
        }
    }

    pub fn native_rows(&self) -> usize {
        SLICE_DIM * self.y
    }

    pub fn native_cols(&self) -> usize {
        SLICE_DIM * self.x
    }

    pub fn fill_drain_cycles(&self) -> u64 {
        self.fill_drain.unwrap_or_else(|| fabric::fill_drain_cycles(self.y, self.x))
    }

    pub fn fabric_config(&self, p: Precision) -> FabricConfig {
        FabricConfig {
            capability: self.capability,
            frequency_hz: self.frequency(p),
            ..FabricConfig::new(self.y, self.x, p)
        }
    }

    /// Pins `fill_drain` to the value measured on the simulator.
    pub fn calibrate(&mut self, p: Precision) -> Result<u64> {
        let fd = fabric::calibrate_fill_drain(&self.fabric_config(p), SparsityLevel::Dense)?;
        self.fill_drain = Some(fd);
        Ok(fd)
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.dram_bw_bytes_per_s, self.freq_int8_hz, self.freq_bf16_hz];
        if self.y == 0 || self.x == 0 || rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidValue("platform sizes and rates must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerEstimate {
    pub name: String,
    /// Level actually executed (dense on a dense-only fabric).
    pub level: SparsityLevel,
    pub count: usize,
    pub padded: (usize, usize, usize),
    pub tiles: u64,
    pub cycles_per_tile: u64,
    pub compute_cycles: u64,
    /// Stored size of A when it is a weight, else 0.
    pub weight_bytes: f64,
    /// Same weight stored dense.
    pub dense_weight_bytes: f64,
    pub activation_bytes: f64,
    pub compute_time_s: f64,
    pub memory_time_s: f64,
    /// Time of one instance.
    pub layer_time_s: f64,
}

impl LayerEstimate {
    pub fn memory_bound(&self) -> bool {
        self.memory_time_s > self.compute_time_s
    }

    pub fn total_time_s(&self) -> f64 {
        self.layer_time_s * self.count as f64
    }
}

pub fn estimate_layer(l: &LayerSpec, precision: Precision, p: &PlatformSpec) -> LayerEstimate {
    let level = if p.capability.supports(l.level) {
        l.level
    } else {
        SparsityLevel::Dense
    };
    let gs = level.group_size();
    let m_hat = l.m.div_ceil(p.native_rows()) * p.native_rows();
    let n_hat = l.n.div_ceil(p.native_cols()) * p.native_cols();
    let k_hat = l.k.div_ceil(gs) * gs;
    let steps = k_hat / gs * level.nonzeros_per_group();
    let cycles_per_tile = steps.max(MIN_TILE_STEPS) as u64;
    let tiles = (m_hat / p.native_rows() * (n_hat / p.native_cols())) as u64;
    let compute_cycles = tiles * cycles_per_tile + p.fill_drain_cycles();

    let value_bytes = precision.value_bits() as f64 / 8.0;
    let a_dense = (m_hat * k_hat) as f64 * value_bytes;
    let a_stored = a_dense / compression_ratio(level, precision);
    let b_c = ((k_hat * n_hat + m_hat * n_hat) as f64) * value_bytes;
    let (weight_bytes, dense_weight_bytes, activation_bytes) = if l.weights {
        (a_stored, a_dense, b_c)
    } else {
        (0.0, 0.0, b_c + a_stored)
    };
    let compute_time_s = compute_cycles as f64 / p.frequency(precision);
    let memory_time_s = (weight_bytes + activation_bytes) / p.dram_bw_bytes_per_s;
    let layer_time_s = match p.memory_mode {
        MemoryMode::Overlap => compute_time_s.max(memory_time_s),
        MemoryMode::Serial => compute_time_s + memory_time_s,
    };
    LayerEstimate {
        name: l.name.clone(),
        level,
        count: l.count,
        padded: (m_hat, k_hat, n_hat),
        tiles,
        cycles_per_tile,
        compute_cycles,
        weight_bytes,
        dense_weight_bytes,
        activation_bytes,
        compute_time_s,
        memory_time_s,
        layer_time_s,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerComparison {
    pub sparse: LayerEstimate,
    pub baseline: LayerEstimate,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkEstimate {
    pub name: String,
    pub precision: Precision,
    pub layers: Vec<LayerComparison>,
    pub total_time_s: f64,
    pub baseline_time_s: f64,
    pub speedup: f64,
    pub weight_bytes: f64,
    pub dense_weight_bytes: f64,
    pub weight_reduction: f64,
}

/// Runs every layer on `p` and, with all layers dense, on `baseline`.
pub fn estimate_network(net: &NetworkSpec, p: &PlatformSpec, baseline: &PlatformSpec) -> NetworkEstimate {
    let precision = net.precision;
    let layers: Vec<LayerComparison> = net
        .layers
        .iter()
        .map(|l| {
            let sparse = estimate_layer(l, precision, p);
            let dense = LayerSpec {
                level: SparsityLevel::Dense,
                ..l.clone()
            };
            let baseline = estimate_layer(&dense, precision, baseline);
            LayerComparison {
                speedup: baseline.layer_time_s / sparse.layer_time_s,
                sparse,
                baseline,
            }
        })
        .collect();
    let sum = |f: &dyn Fn(&LayerComparison) -> f64| layers.iter().map(|c| f(c) * c.sparse.count as f64).sum::<f64>();
    let total_time_s = sum(&|c| c.sparse.layer_time_s);
    let baseline_time_s = sum(&|c| c.baseline.layer_time_s);
    let weight_bytes = sum(&|c| c.sparse.weight_bytes);
    let dense_weight_bytes = sum(&|c| c.baseline.dense_weight_bytes);
    NetworkEstimate {
        name: net.name.clone(),
        precision,
        total_time_s,
        baseline_time_s,
        speedup: baseline_time_s / total_time_s,
        weight_bytes,
        dense_weight_bytes,
        weight_reduction: if weight_bytes > 0.0 { dense_weight_bytes / weight_bytes } else { 1.0 },
        layers,
    }
}

/// Peak tera-operations per second (one MAC = two operations).
pub fn effective_throughput(native_rows: usize, native_cols: usize, frequency_hz: f64, level: SparsityLevel) -> f64 {
    2.0 * (native_rows * native_cols) as f64 * frequency_hz * level.speedup_factor() as f64 / 1e12
}
