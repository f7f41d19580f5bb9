//! Brute-force GEMM references.
//!
//! int8 results are exact, so any summation order agrees. For bfloat16 the
//! reference follows the order the SPE consumes operands: row order for
//! dense A, stored-value order (zero-fill included) for compressed A.

use crate::fabric::AMatrix;
use crate::matrix::{AccumMatrix, DenseMatrix};
use crate::precision::{Precision, Word};
use crate::sparse_format::CompressedMatrix;
use crate::spe::mac_reference;

fn b_at(b: &DenseMatrix, k: usize, n: usize) -> Word {
    if k < b.rows {
        b.get(k, n)
    } else {
        b.precision.zero()
    }
}

/// Triple-loop product of a dense A (rows of B beyond `b.rows` read as zero).
pub fn reference_gemm(a: &DenseMatrix, b: &DenseMatrix) -> AccumMatrix {
    assert_eq!(a.precision, b.precision, "mixed precisions");
    let mut c = AccumMatrix::zeros(a.precision, a.rows, b.cols);
    let mut col = Vec::with_capacity(a.cols);
    for n in 0..b.cols {
        col.clear();
        col.extend((0..a.cols).map(|k| b_at(b, k, n)));
        for m in 0..a.rows {
            c.set(m, n, mac_reference(a.row(m), &col, a.precision));
        }
    }
    c
}

/// Product of a compressed A in stored-value order.
pub fn reference_gemm_compressed(a: &CompressedMatrix, b: &DenseMatrix) -> AccumMatrix {
    assert_eq!(a.precision, b.precision, "mixed precisions");
    let len = a.row_len();
    let mut c = AccumMatrix::zeros(a.precision, a.rows, b.cols);
    let mut av = Vec::with_capacity(len);
    let mut bv = Vec::with_capacity(len);
    for m in 0..a.rows {
        for n in 0..b.cols {
            av.clear();
            bv.clear();
            for k in 0..len {
                av.push(a.value(m, k).0);
                bv.push(b_at(b, a.logical_col(m, k), n));
            }
            c.set(m, n, mac_reference(&av, &bv, a.precision));
        }
    }
    c
}

pub fn reference(a: &AMatrix, b: &DenseMatrix) -> AccumMatrix {
    match a {
        AMatrix::Dense(m) => reference_gemm(m, b),
        AMatrix::Compressed(c) => reference_gemm_compressed(c, b),
    }
}

/// First position whose raw accumulator words differ.
pub fn first_mismatch(x: &AccumMatrix, y: &AccumMatrix) -> Option<(usize, usize)> {
    if (x.rows, x.cols) != (y.rows, y.cols) {
        return Some((0, 0));
    }
    (0..x.rows * x.cols).find(|i| x.data[*i] != y.data[*i]).map(|i| (i / x.cols, i % x.cols))
}

/// Equality that treats +0.0 and -0.0 as equal for fp32 accumulators.
pub fn numerically_equal(x: &AccumMatrix, y: &AccumMatrix) -> bool {
    (x.rows, x.cols) == (y.rows, y.cols)
        && x.data.iter().zip(&y.data).all(|(p, q)| match x.precision {
            Precision::Int8 => p == q,
            Precision::Bfloat16 => p == q || f32::from_bits(*p) == f32::from_bits(*q),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse_format::{encode, SparsityLevel};

    #[test]
    fn small_int8_product() {
        let a = DenseMatrix::from_i8(2, 3, &[1, 2, 3, -1, 0, 4]).unwrap();
        let b = DenseMatrix::from_i8(3, 2, &[1, 0, 0, 1, 2, -3]).unwrap();
        let c = reference_gemm(&a, &b);
        assert_eq!(c.get_i32(0, 0), 7);
        assert_eq!(c.get_i32(0, 1), -7);
        assert_eq!(c.get_i32(1, 0), 7);
        assert_eq!(c.get_i32(1, 1), -12);
    }

    #[test]
    fn compressed_matches_dense_for_int8() {
        let a = DenseMatrix::from_i8(1, 8, &[0, 5, 0, -2, 7, 0, 0, 1]).unwrap();
        let b = DenseMatrix::from_i8(8, 1, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let c = encode(&a, SparsityLevel::S2of4).unwrap();
        assert_eq!(reference_gemm_compressed(&c, &b), reference_gemm(&a, &b));
        assert_eq!(reference_gemm(&a, &b).get_i32(0, 0), 10 - 8 + 35 + 8);
    }
}
