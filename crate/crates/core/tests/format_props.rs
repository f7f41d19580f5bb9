use proptest::prelude::*;

use sst_core::gen::{random_dense, random_pruned, rng};
use sst_core::sparse_format::{
    bitmap_compression_ratio, compression_ratio, decode, encode, prune_magnitude, validate_pattern, SparsityLevel,
};
use sst_core::{DenseMatrix, Precision};

fn level() -> impl Strategy<Value = SparsityLevel> {
    prop::sample::select(SparsityLevel::SPARSE.to_vec())
}

fn precision() -> impl Strategy<Value = Precision> {
    prop::sample::select(Precision::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn decode_inverts_encode(seed: u64, p in precision(), l in level(), rows in 1usize..6, cols in 1usize..30) {
        let m = random_pruned(&mut rng(seed), p, l, rows, cols);
        let c = encode(&m, l).unwrap();
        prop_assert_eq!(decode(&c).unwrap().resized(rows, cols), m);
    }

    #[test]
    fn encoding_is_canonical(seed: u64, p in precision(), l in level(), rows in 1usize..5, cols in 1usize..25) {
        let m = random_pruned(&mut rng(seed), p, l, rows, cols);
        let c = encode(&m, l).unwrap();
        let again = encode(&decode(&c).unwrap().resized(rows, cols), l).unwrap();
        prop_assert_eq!(&again, &c);
        // Indices strictly increase inside every group.
        let n = l.nonzeros_per_group();
        for g in c.indices.chunks(n) {
            prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(g.iter().all(|i| (*i as usize) < l.group_size()));
        }
    }

    #[test]
    fn prune_conforms_and_is_idempotent(seed: u64, p in precision(), l in level(), rows in 1usize..5, cols in 1usize..25) {
        let m = random_dense(&mut rng(seed), p, rows, cols);
        let once = prune_magnitude(&m, l);
        prop_assert!(validate_pattern(&once, l));
        prop_assert_eq!(prune_magnitude(&once, l), once.clone());
        // Every kept value is one of the original values at the same place.
        for (a, b) in once.data.iter().zip(&m.data) {
            prop_assert!(*a == p.zero() || a == b);
        }
    }

    #[test]
    fn prune_keeps_the_largest(seed: u64, p in precision(), l in level(), cols in 1usize..25) {
        let m = random_dense(&mut rng(seed), p, 1, cols);
        let pruned = prune_magnitude(&m, l);
        let gs = l.group_size();
        for start in (0..cols).step_by(gs) {
            let end = (start + gs).min(cols);
            let kept_min = (start..end)
                .filter(|c| pruned.get(0, *c) != p.zero())
                .map(|c| p.magnitude(m.get(0, c)))
                .fold(f32::INFINITY, f32::min);
            let dropped_max = (start..end)
                .filter(|c| pruned.get(0, *c) == p.zero())
                .map(|c| p.magnitude(m.get(0, c)))
                .fold(0.0f32, f32::max);
            prop_assert!(kept_min == f32::INFINITY || kept_min >= dropped_max);
        }
    }

    #[test]
    fn dense_violations_are_found(seed: u64, l in level()) {
        // A full group of nonzeros always violates a sparse pattern.
        let mut m = random_pruned(&mut rng(seed), Precision::Int8, l, 1, 8);
        for c in 0..l.group_size() {
            m.set(0, c, sst_core::precision::i8_to_word(1));
        }
        prop_assert!(!validate_pattern(&m, l));
        prop_assert!(encode(&m, l).is_err());
    }
}

#[test]
fn ratio_formulas() {
    for p in Precision::ALL {
        let vb = p.value_bits() as f64;
        for l in SparsityLevel::SPARSE {
            let (gs, n) = (l.group_size() as f64, l.nonzeros_per_group() as f64);
            assert!((compression_ratio(l, p) - gs * vb / (n * (vb + 2.0))).abs() < 1e-12);
            assert!((bitmap_compression_ratio(l, p) - gs * vb / (gs + n * vb)).abs() < 1e-12);
        }
        assert_eq!(compression_ratio(SparsityLevel::Dense, p), 1.0);
    }
}

#[test]
fn pruning_a_64x64_matrix_to_one_of_four_zeroes_three_quarters() {
    let m = random_dense(&mut rng(4), Precision::Bfloat16, 64, 64);
    let pruned = prune_magnitude(&m, SparsityLevel::S1of4);
    assert_eq!(pruned.count_zeros(), 64 * 64 * 3 / 4);
}

#[test]
fn two_of_four_int8_storage_is_dense_over_1_6() {
    let m = random_pruned(&mut rng(5), Precision::Int8, SparsityLevel::S2of4, 64, 64);
    let dense = DenseMatrix::zeros(Precision::Int8, 64, 64).storage_bytes() as f64;
    let c = encode(&m, SparsityLevel::S2of4).unwrap();
    assert!((dense / c.storage_bytes() as f64 - 1.6).abs() < 1e-12);
}
