//! Cycle-level simulator and analytical performance model for systolic
//! sparse tensor (SST) slices and the GEMM fabrics built from them.

pub mod error;
pub mod fabric;
pub mod gen;
pub mod grid;
pub mod io;
pub mod matrix;
pub mod oracle;
pub mod perf_model;
pub mod precision;
pub mod reference;
pub mod reproduce;
pub mod schedule;
pub mod slice;
pub mod sparse_format;
pub mod spe;
pub mod trace;

pub use error::{Error, Result};
pub use fabric::{count_brams, run_gemm, AMatrix, Capability, FabricConfig, GemmProblem, GemmRun};
pub use matrix::{AccumMatrix, DenseMatrix};
pub use precision::Precision;
pub use sparse_format::{CompressedMatrix, SparsityLevel};
