use crate::error::{Error, Result};
use crate::precision::{f32_to_bf16_word, i8_to_word, word_to_f32, word_to_i8, AccWord, Precision, Word};

/// Row-major operand matrix in one of the slice precisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseMatrix {
    pub precision: Precision,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Word>,
}

impl DenseMatrix {
    pub fn zeros(precision: Precision, rows: usize, cols: usize) -> Self {
        Self {
            precision,
            rows,
            cols,
            data: vec![precision.zero(); rows * cols],
        }
    }

    pub fn from_words(precision: Precision, rows: usize, cols: usize, data: Vec<Word>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|w| !precision.is_valid_word(**w)) {
            return Err(Error::InvalidValue(format!("word {bad:#06x} is not a valid {precision} value")));
        }
        Ok(Self {
            precision,
            rows,
            cols,
            data,
        })
    }

    pub fn from_i8(rows: usize, cols: usize, values: &[i8]) -> Result<Self> {
        Self::from_words(Precision::Int8, rows, cols, values.iter().map(|v| i8_to_word(*v)).collect())
    }

    /// Builds a bfloat16 matrix, rounding each value to nearest even.
    pub fn from_f32(rows: usize, cols: usize, values: &[f32]) -> Result<Self> {
        Self::from_words(
            Precision::Bfloat16,
            rows,
            cols,
            values.iter().map(|v| f32_to_bf16_word(*v)).collect(),
        )
    }

    pub fn identity(precision: Precision, n: usize) -> Self {
        let one = precision.word_from_f64(1.0);
        let mut m = Self::zeros(precision, n, n);
        for i in 0..n {
            m.data[i * n + i] = one;
        }
        m
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Word {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, w: Word) {
        self.data[row * self.cols + col] = w;
    }

    pub fn row(&self, row: usize) -> &[Word] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn get_i8(&self, row: usize, col: usize) -> i8 {
        word_to_i8(self.get(row, col))
    }

    pub fn get_f32(&self, row: usize, col: usize) -> f32 {
        match self.precision {
            Precision::Int8 => self.get_i8(row, col) as f32,
            Precision::Bfloat16 => word_to_f32(self.get(row, col)),
        }
    }

    /// Copy zero-padded (or truncated) to `rows` x `cols`.
    pub fn resized(&self, rows: usize, cols: usize) -> Self {
        let mut out = Self::zeros(self.precision, rows, cols);
        for r in 0..rows.min(self.rows) {
            for c in 0..cols.min(self.cols) {
                out.set(r, c, self.get(r, c));
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.precision, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn count_zeros(&self) -> usize {
        self.data.iter().filter(|w| **w == self.precision.zero()).count()
    }

    pub fn storage_bytes(&self) -> usize {
        self.data.len() * self.precision.value_bits() as usize / 8
    }
}

/// Row-major matrix of 32-bit accumulator words (int32 or fp32 bits).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccumMatrix {
    pub precision: Precision,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<AccWord>,
}

impl AccumMatrix {
    pub fn zeros(precision: Precision, rows: usize, cols: usize) -> Self {
        Self {
            precision,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> AccWord {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: AccWord) {
        self.data[row * self.cols + col] = v;
    }

    pub fn get_i32(&self, row: usize, col: usize) -> i32 {
        self.get(row, col) as i32
    }

    pub fn get_f32(&self, row: usize, col: usize) -> f32 {
        f32::from_bits(self.get(row, col))
    }

    pub fn get_f64(&self, row: usize, col: usize) -> f64 {
        self.precision.acc_to_f64(self.get(row, col))
    }

    pub fn cropped(&self, rows: usize, cols: usize) -> Self {
        let mut out = Self::zeros(self.precision, rows, cols);
        for r in 0..rows.min(self.rows) {
            for c in 0..cols.min(self.cols) {
                out.set(r, c, self.get(r, c));
            }
        }
        out
    }

    /// FNV-1a over the little-endian accumulator bits, row-major.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for w in &self.data {
            for byte in w.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_is_checked() {
        assert!(DenseMatrix::from_i8(2, 2, &[1, 2, 3]).is_err());
        assert!(DenseMatrix::from_words(Precision::Int8, 1, 1, vec![0x1ff]).is_err());
    }

    #[test]
    fn resize_pads_with_zeros() {
        let m = DenseMatrix::from_i8(1, 2, &[3, -4]).unwrap();
        let p = m.resized(2, 4);
        assert_eq!(p.get_i8(0, 1), -4);
        assert_eq!(p.get_i8(0, 3), 0);
        assert_eq!(p.get_i8(1, 0), 0);
    }

    #[test]
    fn checksum_distinguishes_signed_zero() {
        let mut a = AccumMatrix::zeros(Precision::Bfloat16, 1, 1);
        let b = a.clone();
        a.set(0, 0, (-0.0f32).to_bits());
        assert_ne!(a.checksum(), b.checksum());
    }
}
