//! Value and accumulator arithmetic for the two slice data types.
//!
//! Operands travel through the simulator as raw 16-bit words and
//! accumulators as raw 32-bit words; the slice-wide `d_type` decides how
//! they are interpreted. Int8 operands occupy the low byte of the word.

use std::fmt;
use std::str::FromStr;

use half::bf16;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Raw operand word (int8 in the low byte, or bfloat16 bits).
pub type Word = u16;
/// Raw accumulator word (int32 or fp32 bits).
pub type AccWord = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Precision {
    #[serde(rename = "int8")]
    Int8,
    #[serde(rename = "bfloat16")]
    Bfloat16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccumulatorKind {
    Int32,
    Fp32,
}

impl Precision {
    pub const ALL: [Precision; 2] = [Precision::Int8, Precision::Bfloat16];

    pub fn value_bits(self) -> u32 {
        match self {
            Precision::Int8 => 8,
            Precision::Bfloat16 => 16,
        }
    }

    pub fn accumulator(self) -> AccumulatorKind {
        match self {
            Precision::Int8 => AccumulatorKind::Int32,
            Precision::Bfloat16 => AccumulatorKind::Fp32,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Precision::Int8 => "int8",
            Precision::Bfloat16 => "bfloat16",
        }
    }

    /// Structural zero used for padding and for unselected group positions.
    pub fn zero(self) -> Word {
        0
    }

    /// Operand fed on bubble cycles. For bfloat16 this is -0.0: a product
    /// with a +0 B bubble is -0.0, the additive identity of fp32, so bubbles
    /// never perturb an accumulator.
    pub fn bubble(self) -> Word {
        match self {
            Precision::Int8 => 0,
            Precision::Bfloat16 => 0x8000,
        }
    }

    pub fn is_valid_word(self, w: Word) -> bool {
        match self {
            Precision::Int8 => w <= 0xff,
            Precision::Bfloat16 => true,
        }
    }

    /// Exact product of two operands as an accumulator word.
    pub fn product(self, a: Word, b: Word) -> AccWord {
        match self {
            Precision::Int8 => (word_to_i8(a) as i32 * word_to_i8(b) as i32) as u32,
            // 8-bit significands: the 16-bit product always fits fp32 exactly.
            Precision::Bfloat16 => (word_to_f32(a) * word_to_f32(b)).to_bits(),
        }
    }

    pub fn add(self, acc: AccWord, addend: AccWord) -> AccWord {
        match self {
            Precision::Int8 => (acc as i32).wrapping_add(addend as i32) as u32,
            Precision::Bfloat16 => (f32::from_bits(acc) + f32::from_bits(addend)).to_bits(),
        }
    }

    pub fn mac(self, acc: AccWord, a: Word, b: Word) -> AccWord {
        self.add(acc, self.product(a, b))
    }

    /// Magnitude used for pruning decisions.
    pub fn magnitude(self, w: Word) -> f32 {
        match self {
            Precision::Int8 => (word_to_i8(w) as f32).abs(),
            Precision::Bfloat16 => word_to_f32(w).abs(),
        }
    }

    /// Converts a real number into this precision (saturating for int8,
    /// round-to-nearest-even for bfloat16).
    pub fn word_from_f64(self, v: f64) -> Word {
        match self {
            Precision::Int8 => i8_to_word(v.round().clamp(-128.0, 127.0) as i8),
            Precision::Bfloat16 => bf16::from_f64(v).to_bits(),
        }
    }

    pub fn word_to_f64(self, w: Word) -> f64 {
        match self {
            Precision::Int8 => word_to_i8(w) as f64,
            Precision::Bfloat16 => word_to_f32(w) as f64,
        }
    }

    pub fn acc_to_f64(self, acc: AccWord) -> f64 {
        match self {
            Precision::Int8 => acc as i32 as f64,
            Precision::Bfloat16 => f32::from_bits(acc) as f64,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "int8" | "i8" => Ok(Precision::Int8),
            "bfloat16" | "bf16" => Ok(Precision::Bfloat16),
            other => Err(Error::InvalidValue(format!("unknown precision '{other}'"))),
        }
    }
}

pub fn i8_to_word(v: i8) -> Word {
    v as u8 as Word
}

pub fn word_to_i8(w: Word) -> i8 {
    w as u8 as i8
}

/// Round-to-nearest-even conversion from fp32 to bfloat16 bits.
pub fn f32_to_bf16_word(v: f32) -> Word {
    bf16::from_f32(v).to_bits()
}

pub fn word_to_f32(w: Word) -> f32 {
    bf16::from_bits(w).to_f32()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bf16_conversion_rounds_to_nearest_even() {
        // 1 + 2^-8 sits exactly between 1.0 and 1 + 2^-7: ties to even (1.0).
        assert_eq!(f32_to_bf16_word(1.0 + 1.0 / 256.0), 0x3f80);
        // 1 + 3*2^-8 is a tie between 1+2^-7 (odd) and 1+2^-6 (even).
        assert_eq!(f32_to_bf16_word(1.0 + 3.0 / 256.0), 0x3f82);
        assert_eq!(word_to_f32(0x3fc0), 1.5);
    }

    #[test]
    fn int8_words_round_trip() {
        for v in i8::MIN..=i8::MAX {
            let w = i8_to_word(v);
            assert!(Precision::Int8.is_valid_word(w));
            assert_eq!(word_to_i8(w), v);
        }
        assert!(!Precision::Int8.is_valid_word(0x100));
    }

    #[test]
    fn bubble_is_additive_identity() {
        let p = Precision::Bfloat16;
        let bubble_product = p.product(p.bubble(), p.zero());
        for acc in [0.0f32, -0.0, 1.5, -3.25, f32::MIN_POSITIVE] {
            let out = p.add(acc.to_bits(), bubble_product);
            assert_eq!(out, acc.to_bits());
        }
    }

    #[test]
    fn bf16_products_are_exact() {
        let a = f32_to_bf16_word(1.0078125); // 1 + 2^-7
        let b = f32_to_bf16_word(1.0078125);
        let prod = f32::from_bits(Precision::Bfloat16.product(a, b));
        assert_eq!(prod as f64, 1.0078125f64 * 1.0078125f64);
    }
}
