//! Seeded operand generators. Sparse operands are drawn dense and then
//! magnitude-pruned, so they always conform to their pattern.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fabric::{AMatrix, GemmProblem};
use crate::matrix::DenseMatrix;
use crate::precision::{f32_to_bf16_word, i8_to_word, Precision};
use crate::sparse_format::{encode, prune_magnitude, SparsityLevel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in `0..n`.
pub fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    rng.random_range(0..n)
}

pub fn chance(rng: &mut ChaCha8Rng, p: f64) -> bool {
    rng.random_bool(p)
}

/// Uniform int8 over the full range, or bfloat16 in [-4, 4) with a few
/// exact zeros mixed in.
pub fn random_dense<R: Rng>(rng: &mut R, precision: Precision, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| match precision {
            Precision::Int8 => i8_to_word(rng.random()),
            Precision::Bfloat16 => {
                if rng.random_bool(0.05) {
                    0
                } else {
                    f32_to_bf16_word(rng.random_range(-4.0f32..4.0))
                }
            }
        })
        .collect();
    DenseMatrix::from_words(precision, rows, cols, data).expect("generated words are valid")
}

/// A conforming operand for `level` (dense when `level` is dense).
pub fn random_pruned<R: Rng>(rng: &mut R, precision: Precision, level: SparsityLevel, rows: usize, cols: usize) -> DenseMatrix {
    prune_magnitude(&random_dense(rng, precision, rows, cols), level)
}

pub fn random_problem<R: Rng>(
    rng: &mut R,
    precision: Precision,
    level: SparsityLevel,
    m: usize,
    k: usize,
    n: usize,
) -> Result<GemmProblem> {
    let a = random_pruned(rng, precision, level, m, k);
    let b = random_dense(rng, precision, k, n);
    let a = if level.is_sparse() {
        AMatrix::Compressed(encode(&a, level)?)
    } else {
        AMatrix::Dense(a)
    };
    GemmProblem::new(a, b)
}
