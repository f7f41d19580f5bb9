//! Index-based N:M compressed format for the A operand.
//!
//! Each group of `group_size` consecutive row elements keeps
//! `nonzeros_per_group` values, each tagged with its 2-bit position inside
//! the group. Groups with fewer non-zeros are filled with explicit zeros at
//! the smallest unused positions so every group has fixed storage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::precision::{Precision, Word};

/// Bits per stored position index.
pub const INDEX_BITS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SparsityLevel {
    #[serde(rename = "dense")]
    Dense,
    #[serde(rename = "2:4")]
    S2of4,
    #[serde(rename = "1:3")]
    S1of3,
    #[serde(rename = "1:4")]
    S1of4,
}

impl SparsityLevel {
    pub const ALL: [SparsityLevel; 4] = [
        SparsityLevel::Dense,
        SparsityLevel::S2of4,
        SparsityLevel::S1of3,
        SparsityLevel::S1of4,
    ];
    pub const SPARSE: [SparsityLevel; 3] = [SparsityLevel::S2of4, SparsityLevel::S1of3, SparsityLevel::S1of4];

    /// M in N:M (1 for dense).
    pub fn group_size(self) -> usize {
        match self {
            SparsityLevel::Dense => 1,
            SparsityLevel::S2of4 | SparsityLevel::S1of4 => 4,
            SparsityLevel::S1of3 => 3,
        }
    }

    /// N in N:M (1 for dense).
    pub fn nonzeros_per_group(self) -> usize {
        match self {
            SparsityLevel::S2of4 => 2,
            _ => 1,
        }
    }

    pub fn speedup_factor(self) -> usize {
        self.group_size() / self.nonzeros_per_group()
    }

    /// Number of B values an SPE receives per cycle in this mode.
    pub fn b_lanes(self) -> usize {
        match self {
            SparsityLevel::Dense => 1,
            SparsityLevel::S1of3 => 3,
            SparsityLevel::S2of4 | SparsityLevel::S1of4 => 4,
        }
    }

    pub fn is_sparse(self) -> bool {
        self != SparsityLevel::Dense
    }

    pub fn name(self) -> &'static str {
        match self {
            SparsityLevel::Dense => "dense",
            SparsityLevel::S2of4 => "2:4",
            SparsityLevel::S1of3 => "1:3",
            SparsityLevel::S1of4 => "1:4",
        }
    }

    /// Fraction of logical elements that are zero under the pattern.
    pub fn sparsity(self) -> f64 {
        1.0 - self.nonzeros_per_group() as f64 / self.group_size() as f64
    }
}

impl fmt::Display for SparsityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SparsityLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" | "1:1" => Ok(SparsityLevel::Dense),
            "2:4" | "2of4" => Ok(SparsityLevel::S2of4),
            "1:3" | "1of3" => Ok(SparsityLevel::S1of3),
            "1:4" | "1of4" => Ok(SparsityLevel::S1of4),
            other => Err(Error::InvalidValue(format!("unknown sparsity level '{other}'"))),
        }
    }
}

/// N:M compressed matrix: values plus per-value group positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressedMatrix {
    pub precision: Precision,
    pub level: SparsityLevel,
    pub rows: usize,
    /// Column count before padding to a multiple of the group size.
    pub cols: usize,
    /// Padded (uncompressed) K.
    pub logical_cols: usize,
    pub values: Vec<Word>,
    pub indices: Vec<u8>,
}

impl CompressedMatrix {
    /// Stored values per row.
    pub fn row_len(&self) -> usize {
        self.logical_cols / self.level.group_size() * self.level.nonzeros_per_group()
    }

    pub fn value(&self, row: usize, k: usize) -> (Word, u8) {
        let i = row * self.row_len() + k;
        (self.values[i], self.indices[i])
    }

    /// Logical column of the `k`-th stored value of a row.
    pub fn logical_col(&self, row: usize, k: usize) -> usize {
        let (_, idx) = self.value(row, k);
        k / self.level.nonzeros_per_group() * self.level.group_size() + idx as usize
    }

    pub fn storage_bits(&self) -> usize {
        self.values.len() * (self.precision.value_bits() + INDEX_BITS) as usize
    }

    pub fn storage_bytes(&self) -> usize {
        self.storage_bits().div_ceil(8)
    }

    /// Structural checks: shape, index range, canonical ordering.
    pub fn check(&self) -> Result<()> {
        let gs = self.level.group_size();
        if !self.level.is_sparse() {
            return Err(Error::InvalidValue("compressed matrix cannot be dense".into()));
        }
        if self.logical_cols != padded_cols(self.cols, self.level) {
            return Err(Error::Dimension(format!(
                "logical_cols {} is not the padded width of {} for {}",
                self.logical_cols, self.cols, self.level
            )));
        }
        let expect = self.rows * self.row_len();
        if self.values.len() != expect || self.indices.len() != expect {
            return Err(Error::Dimension(format!(
                "expected {expect} values and indices, got {} and {}",
                self.values.len(),
                self.indices.len()
            )));
        }
        for (position, &index) in self.indices.iter().enumerate() {
            if index as usize >= gs {
                return Err(Error::IndexOutOfGroup {
                    index,
                    group_size: gs,
                    position,
                });
            }
        }
        if let Some(bad) = self.values.iter().find(|w| !self.precision.is_valid_word(**w)) {
            return Err(Error::InvalidValue(format!("word {bad:#06x} is not a valid {}", self.precision)));
        }
        if self.level.nonzeros_per_group() == 2 {
            for (g, pair) in self.indices.chunks_exact(2).enumerate() {
                if pair[0] >= pair[1] {
                    return Err(Error::InvalidValue(format!(
                        "2:4 group {g} indices {pair:?} are not strictly increasing"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn padded_cols(cols: usize, level: SparsityLevel) -> usize {
    cols.div_ceil(level.group_size()) * level.group_size()
}

/// First (row, group) breaking the pattern, treating trailing partial
/// groups as zero-padded.
pub fn first_violation(m: &DenseMatrix, level: SparsityLevel) -> Option<(usize, usize)> {
    let gs = level.group_size();
    let n = level.nonzeros_per_group();
    let zero = m.precision.zero();
    for r in 0..m.rows {
        for (g, group) in m.row(r).chunks(gs).enumerate() {
            if group.iter().filter(|w| **w != zero).count() > n {
                return Some((r, g));
            }
        }
    }
    None
}

pub fn validate_pattern(m: &DenseMatrix, level: SparsityLevel) -> bool {
    first_violation(m, level).is_none()
}

pub fn encode(m: &DenseMatrix, level: SparsityLevel) -> Result<CompressedMatrix> {
    if !level.is_sparse() {
        return Err(Error::InvalidValue("cannot compress to the dense level".into()));
    }
    if let Some((row, group)) = first_violation(m, level) {
        return Err(Error::PatternViolation { level, row, group });
    }
    let gs = level.group_size();
    let n = level.nonzeros_per_group();
    let logical_cols = padded_cols(m.cols, level);
    let zero = m.precision.zero();
    let groups = logical_cols / gs;
    let mut values = Vec::with_capacity(m.rows * groups * n);
    let mut indices = Vec::with_capacity(m.rows * groups * n);
    let mut slots: Vec<(u8, Word)> = Vec::with_capacity(gs);
    for r in 0..m.rows {
        for g in 0..groups {
            slots.clear();
            let at = |p: usize| {
                let c = g * gs + p;
                if c < m.cols {
                    m.get(r, c)
                } else {
                    zero
                }
            };
            for p in 0..gs {
                if at(p) != zero {
                    slots.push((p as u8, at(p)));
                }
            }
            // Canonical zero-fill at the smallest unused positions.
            let mut p = 0u8;
            while slots.len() < n {
                if !slots.iter().any(|(i, _)| *i == p) {
                    slots.push((p, zero));
                }
                p += 1;
            }
            slots.sort_unstable_by_key(|(i, _)| *i);
            for (i, w) in &slots {
                indices.push(*i);
                values.push(*w);
            }
        }
    }
    Ok(CompressedMatrix {
        precision: m.precision,
        level,
        rows: m.rows,
        cols: m.cols,
        logical_cols,
        values,
        indices,
    })
}

/// Expands to `rows` x `logical_cols`.
pub fn decode(c: &CompressedMatrix) -> Result<DenseMatrix> {
    c.check()?;
    let mut out = DenseMatrix::zeros(c.precision, c.rows, c.logical_cols);
    for r in 0..c.rows {
        for k in 0..c.row_len() {
            let (w, _) = c.value(r, k);
            out.set(r, c.logical_col(r, k), w);
        }
    }
    Ok(out)
}

/// Keeps the `nonzeros_per_group` largest magnitudes of every group; ties
/// go to the lower position.
pub fn prune_magnitude(m: &DenseMatrix, level: SparsityLevel) -> DenseMatrix {
    let gs = level.group_size();
    let keep = level.nonzeros_per_group();
    let mut out = m.clone();
    if !level.is_sparse() {
        return out;
    }
    let mut order: Vec<usize> = Vec::with_capacity(gs);
    for r in 0..m.rows {
        for start in (0..m.cols).step_by(gs) {
            let end = (start + gs).min(m.cols);
            order.clear();
            order.extend(start..end);
            // Stable sort: equal magnitudes keep ascending position order.
            order.sort_by(|a, b| {
                let ma = m.precision.magnitude(m.get(r, *a));
                let mb = m.precision.magnitude(m.get(r, *b));
                mb.total_cmp(&ma)
            });
            for &c in order.iter().skip(keep) {
                out.set(r, c, m.precision.zero());
            }
        }
    }
    out
}

/// Dense storage bits over index-format storage bits.
pub fn compression_ratio(level: SparsityLevel, p: Precision) -> f64 {
    if !level.is_sparse() {
        return 1.0;
    }
    let vb = p.value_bits() as f64;
    (level.group_size() as f64 * vb) / (level.nonzeros_per_group() as f64 * (vb + INDEX_BITS as f64))
}

/// Ratio for a bitmap format (one presence bit per logical element plus
/// the stored values).
pub fn bitmap_compression_ratio(level: SparsityLevel, p: Precision) -> f64 {
    if !level.is_sparse() {
        return 1.0;
    }
    let vb = p.value_bits() as f64;
    let gs = level.group_size() as f64;
    (gs * vb) / (gs + level.nonzeros_per_group() as f64 * vb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::{i8_to_word, word_to_i8};

    fn row(v: &[i8]) -> DenseMatrix {
        DenseMatrix::from_i8(1, v.len(), v).unwrap()
    }

    fn i8s(ws: &[Word]) -> Vec<i8> {
        ws.iter().map(|w| word_to_i8(*w)).collect()
    }

    #[test]
    fn level_geometry() {
        for l in SparsityLevel::ALL {
            assert!([1, 3, 4].contains(&l.group_size()));
            assert!([1, 2].contains(&l.nonzeros_per_group()));
        }
        assert_eq!(SparsityLevel::S2of4.speedup_factor(), 2);
        assert_eq!(SparsityLevel::S1of3.speedup_factor(), 3);
        assert_eq!(SparsityLevel::S1of4.speedup_factor(), 4);
        assert_eq!(SparsityLevel::Dense.speedup_factor(), 1);
        assert_eq!("1:3".parse::<SparsityLevel>().unwrap(), SparsityLevel::S1of3);
        assert!("2:3".parse::<SparsityLevel>().is_err());
    }

    #[test]
    fn validate_examples() {
        assert!(validate_pattern(&row(&[0, 5, 0, 7]), SparsityLevel::S2of4));
        assert!(!validate_pattern(&row(&[1, 2, 3, 0]), SparsityLevel::S2of4));
        let z = DenseMatrix::zeros(Precision::Int8, 4, 8);
        for l in SparsityLevel::SPARSE {
            assert!(validate_pattern(&z, l));
        }
        // Partial trailing group is zero-padded.
        assert!(validate_pattern(&row(&[0, 0, 0, 0, 1, 2]), SparsityLevel::S2of4));
        assert!(!validate_pattern(&row(&[0, 0, 0, 0, 1, 2]), SparsityLevel::S1of4));
    }

    #[test]
    fn encode_examples() {
        let c = encode(&row(&[0, 5, 0, 7]), SparsityLevel::S2of4).unwrap();
        assert_eq!(i8s(&c.values), vec![5, 7]);
        assert_eq!(c.indices, vec![1, 3]);

        let c = encode(&row(&[0, 0, 9]), SparsityLevel::S1of3).unwrap();
        assert_eq!(i8s(&c.values), vec![9]);
        assert_eq!(c.indices, vec![2]);

        let c = encode(&row(&[0, 0, 0, 0]), SparsityLevel::S1of4).unwrap();
        assert_eq!(i8s(&c.values), vec![0]);
        assert_eq!(c.indices, vec![0]);

        // Single non-zero in a 2:4 group: zero fill at the lowest free slot.
        let c = encode(&row(&[0, 0, 4, 0]), SparsityLevel::S2of4).unwrap();
        assert_eq!(i8s(&c.values), vec![0, 4]);
        assert_eq!(c.indices, vec![0, 2]);
        let c = encode(&row(&[4, 0, 0, 0]), SparsityLevel::S2of4).unwrap();
        assert_eq!(c.indices, vec![0, 1]);
    }

    #[test]
    fn encode_pads_columns() {
        let c = encode(&row(&[0, 3, 0, 0, 0, 6]), SparsityLevel::S1of4).unwrap();
        assert_eq!(c.cols, 6);
        assert_eq!(c.logical_cols, 8);
        assert_eq!(i8s(&c.values), vec![3, 6]);
        assert_eq!(c.indices, vec![1, 1]);
    }

    #[test]
    fn encode_reports_first_violation() {
        let m = DenseMatrix::from_i8(2, 8, &[0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0]).unwrap();
        match encode(&m, SparsityLevel::S1of4) {
            Err(Error::PatternViolation { row, group, .. }) => assert_eq!((row, group), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decode_examples() {
        let c = CompressedMatrix {
            precision: Precision::Int8,
            level: SparsityLevel::S2of4,
            rows: 1,
            cols: 4,
            logical_cols: 4,
            values: vec![i8_to_word(5), i8_to_word(7)],
            indices: vec![1, 3],
        };
        assert_eq!(decode(&c).unwrap(), row(&[0, 5, 0, 7]));

        let empty = encode(&DenseMatrix::zeros(Precision::Int8, 0, 0), SparsityLevel::S2of4).unwrap();
        let d = decode(&empty).unwrap();
        assert_eq!((d.rows, d.cols), (0, 0));
    }

    #[test]
    fn decode_rejects_bad_indices() {
        let mut c = encode(&row(&[0, 0, 9]), SparsityLevel::S1of3).unwrap();
        c.indices[0] = 3;
        assert!(matches!(decode(&c), Err(Error::IndexOutOfGroup { index: 3, .. })));
    }

    #[test]
    fn prune_examples() {
        let p = prune_magnitude(&row(&[1, -9, 3, 2]), SparsityLevel::S2of4);
        assert_eq!(i8s(&p.data), vec![0, -9, 3, 0]);
        let p = prune_magnitude(&row(&[4, 4, 4, 4]), SparsityLevel::S1of4);
        assert_eq!(i8s(&p.data), vec![4, 0, 0, 0]);
        let conforming = row(&[0, 0, 5, -1, 0, 0]);
        assert_eq!(prune_magnitude(&conforming, SparsityLevel::S1of3), conforming);
        // -128 has the largest magnitude.
        let p = prune_magnitude(&row(&[127, -128, 0, 0]), SparsityLevel::S1of4);
        assert_eq!(i8s(&p.data), vec![0, -128, 0, 0]);
    }

    #[test]
    fn ratio_examples() {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        assert!(close(compression_ratio(SparsityLevel::S2of4, Precision::Int8), 1.6));
        assert!(close(compression_ratio(SparsityLevel::S1of4, Precision::Bfloat16), 64.0 / 18.0));
        assert!(close(compression_ratio(SparsityLevel::Dense, Precision::Int8), 1.0));
        assert!(close(bitmap_compression_ratio(SparsityLevel::S2of4, Precision::Int8), 1.6));
        assert!(close(bitmap_compression_ratio(SparsityLevel::S1of4, Precision::Int8), 32.0 / 12.0));
        assert!(close(bitmap_compression_ratio(SparsityLevel::S1of4, Precision::Bfloat16), 3.2));
    }

    #[test]
    fn storage_bytes_follow_ratio() {
        let m = DenseMatrix::zeros(Precision::Int8, 8, 16);
        let c = encode(&m, SparsityLevel::S2of4).unwrap();
        assert_eq!(c.storage_bits() as f64 * 1.6, (m.storage_bytes() * 8) as f64);
    }
}
