//! Sparse processing element.
//!
//! One MAC per enabled cycle in every mode. A operands arrive with their
//! group position; B arrives as a vector of 1 (dense), 3 (1:3) or 4 (2:4,
//! 1:4) values and the position selects the multiplicand. In 2:4 mode the
//! B registers are reloaded every other cycle, counted from the cycle the
//! tile's accumulate-deassert reaches this SPE, because two A values share
//! each B group.

use crate::error::{Error, Result};
use crate::precision::{AccWord, Precision, Word};
use crate::sparse_format::SparsityLevel;

/// Longest int8 reduction whose int32 sum cannot overflow (|a*b| <= 2^14).
pub const MAX_INT8_REDUCTION: usize = 1 << 17;

/// A operand plus its position inside the B group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AOperand {
    pub value: Word,
    pub index: u8,
    /// Simulation-only tag: false for bubbles. Not part of the datapath.
    pub live: bool,
}

impl AOperand {
    pub fn new(value: Word, index: u8) -> Self {
        Self {
            value,
            index,
            live: true,
        }
    }

    pub fn bubble(p: Precision) -> Self {
        Self {
            value: p.bubble(),
            index: 0,
            live: false,
        }
    }
}

/// Up to four B lanes; `len` is the mode's arity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BVector {
    pub lanes: [Word; 4],
    pub len: u8,
}

impl BVector {
    pub fn new(values: &[Word]) -> Self {
        assert!(values.len() <= 4, "at most four B lanes");
        let mut lanes = [0; 4];
        lanes[..values.len()].copy_from_slice(values);
        Self {
            lanes,
            len: values.len() as u8,
        }
    }

    pub fn zeros(level: SparsityLevel) -> Self {
        Self {
            lanes: [0; 4],
            len: level.b_lanes() as u8,
        }
    }

    pub fn values(&self) -> &[Word] {
        &self.lanes[..self.len as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpeInput {
    pub a: AOperand,
    pub b: BVector,
    pub accumulate: bool,
    pub enable: bool,
}

/// Register contents visible to the right (A) and lower (B) neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpeForward {
    pub a: AOperand,
    pub b: BVector,
    pub accumulate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpeStep {
    /// Finished accumulator of the previous tile, handed over when a new
    /// tile starts.
    pub released: Option<AccWord>,
    /// A MAC on live (non-bubble) operands executed this cycle.
    pub live_mac: bool,
    /// Any MAC executed this cycle.
    pub mac: bool,
}

#[derive(Debug, Clone)]
pub struct SpeState {
    pub mode: SparsityLevel,
    pub precision: Precision,
    pub accumulator: AccWord,
    pub a_reg: AOperand,
    pub b_regs: BVector,
    pub accumulate_reg: bool,
    /// Cycle parity within the current tile (2:4 reload cadence).
    pub phase: u8,
    pub has_result: bool,
    /// Number of tiles started so far.
    pub tiles_started: u64,
    pub macs: u64,
}

impl SpeState {
    pub fn new(mode: SparsityLevel, precision: Precision) -> Self {
        Self {
            mode,
            precision,
            accumulator: 0,
            a_reg: AOperand::bubble(precision),
            b_regs: BVector::zeros(mode),
            accumulate_reg: true,
            phase: 0,
            has_result: false,
            tiles_started: 0,
            macs: 0,
        }
    }

    pub fn a_pipeline_depth(&self) -> usize {
        1
    }

    pub fn forwarded(&self) -> SpeForward {
        SpeForward {
            a: self.a_reg,
            b: self.b_regs,
            accumulate: self.accumulate_reg,
        }
    }

    /// Switches mode/precision between tiles.
    pub fn configure(&mut self, mode: SparsityLevel, precision: Precision) {
        if mode != self.mode {
            self.b_regs = BVector::zeros(mode);
        }
        self.mode = mode;
        self.precision = precision;
    }

    pub fn step(&mut self, input: &SpeInput) -> Result<SpeStep> {
        if !input.enable {
            return Ok(SpeStep::default());
        }
        let expected = self.mode.b_lanes();
        if input.b.len as usize != expected {
            return Err(Error::ArityMismatch {
                level: self.mode,
                expected,
                got: input.b.len as usize,
            });
        }
        let tile_start = !input.accumulate;
        if tile_start {
            self.phase = 0;
        }

        let reload = self.mode != SparsityLevel::S2of4 || self.phase == 0;
        if reload {
            self.b_regs = input.b;
        }
        let selected = match self.mode {
            SparsityLevel::Dense => self.b_regs.lanes[0],
            mode => {
                let idx = input.a.index as usize;
                if idx >= mode.group_size() {
                    return Err(Error::IndexOutOfGroup {
                        index: input.a.index,
                        group_size: mode.group_size(),
                        position: 0,
                    });
                }
                self.b_regs.lanes[idx]
            }
        };

        let product = self.precision.product(input.a.value, selected);
        let released = (tile_start && self.has_result).then_some(self.accumulator);
        self.accumulator = if tile_start {
            product
        } else {
            self.precision.add(self.accumulator, product)
        };
        if tile_start {
            self.has_result = true;
            self.tiles_started += 1;
        }
        self.a_reg = input.a;
        self.accumulate_reg = input.accumulate;
        if self.mode == SparsityLevel::S2of4 {
            self.phase ^= 1;
        }
        self.macs += 1;
        Ok(SpeStep {
            released,
            live_mac: input.a.live,
            mac: true,
        })
    }
}

/// Stream-order dot product: exact int32 for int8; for bfloat16 each
/// product is exact in fp32 and the running sum rounds to nearest even.
pub fn mac_reference(a: &[Word], b: &[Word], precision: Precision) -> AccWord {
    assert_eq!(a.len(), b.len(), "streams must have equal length");
    if precision == Precision::Int8 {
        assert!(a.len() <= MAX_INT8_REDUCTION, "int8 reduction longer than 2^17");
    }
    let mut terms = a.iter().zip(b).map(|(x, y)| precision.product(*x, *y));
    let Some(first) = terms.next() else {
        return 0;
    };
    terms.fold(first, |acc, t| precision.add(acc, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::{f32_to_bf16_word, i8_to_word};

    fn feed(spe: &mut SpeState, a: AOperand, b: &[Word], first: bool) -> SpeStep {
        spe.step(&SpeInput {
            a,
            b: BVector::new(b),
            accumulate: !first,
            enable: true,
        })
        .unwrap()
    }

    #[test]
    fn int8_reference_examples() {
        let a = [i8_to_word(127), i8_to_word(127)];
        assert_eq!(mac_reference(&a, &a, Precision::Int8) as i32, 32258);
        let one = f32_to_bf16_word(1.0);
        let b = f32_to_bf16_word(1.5);
        assert_eq!(f32::from_bits(mac_reference(&[one], &[b], Precision::Bfloat16)), 1.5);
    }

    #[test]
    fn dense_mode_accumulates_k_cycles() {
        let p = Precision::Int8;
        let mut spe = SpeState::new(SparsityLevel::Dense, p);
        let a: Vec<i8> = vec![1, -2, 3, 4, 5, -6, 7, 8];
        let b: Vec<i8> = vec![8, 7, -6, 5, 4, 3, 2, -1];
        for k in 0..8 {
            feed(&mut spe, AOperand::new(i8_to_word(a[k]), 0), &[i8_to_word(b[k])], k == 0);
        }
        let expect: i32 = a.iter().zip(&b).map(|(x, y)| *x as i32 * *y as i32).sum();
        assert_eq!(spe.accumulator as i32, expect);
        assert_eq!(spe.macs, 8);
    }

    #[test]
    fn two_of_four_holds_b_for_two_cycles() {
        let p = Precision::Int8;
        let mut spe = SpeState::new(SparsityLevel::S2of4, p);
        let g0: Vec<Word> = [1i8, 2, 3, 4].iter().map(|v| i8_to_word(*v)).collect();
        let g1: Vec<Word> = [5i8, 6, 7, 8].iter().map(|v| i8_to_word(*v)).collect();
        let junk: Vec<Word> = vec![i8_to_word(100); 4];
        // K = 8 dense-equivalent, 4 enabled cycles.
        feed(&mut spe, AOperand::new(i8_to_word(2), 1), &g0, true);
        feed(&mut spe, AOperand::new(i8_to_word(3), 3), &junk, false);
        feed(&mut spe, AOperand::new(i8_to_word(-1), 0), &g1, false);
        feed(&mut spe, AOperand::new(i8_to_word(4), 2), &junk, false);
        assert_eq!(spe.accumulator as i32, 2 * 2 + 3 * 4 - 5 + 4 * 7);
        assert_eq!(spe.macs, 4);
    }

    #[test]
    fn one_of_three_and_four_finish_in_k_over_r() {
        for (level, k) in [(SparsityLevel::S1of3, 12usize), (SparsityLevel::S1of4, 12)] {
            let gs = level.group_size();
            let p = Precision::Int8;
            let mut spe = SpeState::new(level, p);
            let dense_b: Vec<i8> = (0..k as i8).map(|v| v - 5).collect();
            let mut expect = 0i32;
            for g in 0..k / gs {
                let idx = (g % gs) as u8;
                let a = (g as i8) + 1;
                expect += a as i32 * dense_b[g * gs + idx as usize] as i32;
                let lanes: Vec<Word> = dense_b[g * gs..(g + 1) * gs].iter().map(|v| i8_to_word(*v)).collect();
                feed(&mut spe, AOperand::new(i8_to_word(a), idx), &lanes, g == 0);
            }
            assert_eq!(spe.macs as usize, k / level.speedup_factor());
            assert_eq!(spe.accumulator as i32, expect);
        }
    }

    #[test]
    fn accumulate_deassert_resets_to_product_and_releases() {
        let p = Precision::Int8;
        let mut spe = SpeState::new(SparsityLevel::Dense, p);
        assert_eq!(feed(&mut spe, AOperand::new(i8_to_word(3), 0), &[i8_to_word(3)], true).released, None);
        feed(&mut spe, AOperand::new(i8_to_word(1), 0), &[i8_to_word(1)], false);
        let step = feed(&mut spe, AOperand::new(i8_to_word(2), 0), &[i8_to_word(5)], true);
        assert_eq!(step.released, Some(10));
        assert_eq!(spe.accumulator as i32, 10);
    }

    #[test]
    fn disabled_cycles_do_nothing() {
        let p = Precision::Int8;
        let mut spe = SpeState::new(SparsityLevel::S1of4, p);
        feed(&mut spe, AOperand::new(i8_to_word(3), 2), &[0, 0, i8_to_word(4), 0], true);
        let before = spe.clone();
        let step = spe
            .step(&SpeInput {
                a: AOperand::new(i8_to_word(9), 1),
                b: BVector::new(&[1, 1, 1, 1]),
                accumulate: false,
                enable: false,
            })
            .unwrap();
        assert_eq!(step, SpeStep::default());
        assert_eq!(spe.accumulator, before.accumulator);
        assert_eq!(spe.macs, before.macs);
        assert_eq!(spe.forwarded(), before.forwarded());
    }

    #[test]
    fn arity_is_checked() {
        let mut spe = SpeState::new(SparsityLevel::S1of3, Precision::Int8);
        let err = spe
            .step(&SpeInput {
                a: AOperand::new(0, 0),
                b: BVector::new(&[0, 0, 0, 0]),
                accumulate: false,
                enable: true,
            })
            .unwrap_err();
        assert!(matches!(err, Error::ArityMismatch { expected: 3, got: 4, .. }));
    }

    #[test]
    fn one_of_three_never_reads_position_three() {
        let mut spe = SpeState::new(SparsityLevel::S1of3, Precision::Int8);
        let err = spe
            .step(&SpeInput {
                a: AOperand::new(1, 3),
                b: BVector::new(&[0, 0, 0]),
                accumulate: false,
                enable: true,
            })
            .unwrap_err();
        assert!(matches!(err, Error::IndexOutOfGroup { index: 3, .. }));
    }
}
