//! Per-slice channel coding.
//!
//! `HammingSecded` is a shortened extended Hamming code in systematic form:
//! the codeword is `data || parity || overall`. Parity-check columns are
//! assigned by syndrome value: parity bit `j` owns column `2^j`, and data bit
//! `i` owns the `i`-th smallest value that is not a power of two.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;

/// Total coded bits the preambles of one connection can carry.
pub const PREAMBLE_BUDGET_BITS: usize = 260;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("expected {expected} bits, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("data width must be at least 1")]
    ZeroWidth,
    #[error("{n_frames} frames x {code_width} bits = {total} exceeds the {PREAMBLE_BUDGET_BITS}-bit budget")]
    OverBudget {
        n_frames: usize,
        code_width: usize,
        total: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    #[default]
    Identity,
    HammingSecded,
}

impl CodecKind {
    pub fn is_coded(self) -> bool {
        self != CodecKind::Identity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodecSpec {
    pub kind: CodecKind,
    pub data_width: usize,
    pub code_width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStatus {
    Clean,
    Corrected,
    DetectedUncorrectable,
}

/// Smallest `r` with `2^r >= k + r + 1`.
fn parity_bits_for(k: usize) -> usize {
    let mut r = 1;
    while (1usize << r) < k + r + 1 {
        r += 1;
    }
    r
}

impl CodecSpec {
    pub fn identity(data_width: usize) -> Result<Self, CodecError> {
        if data_width == 0 {
            return Err(CodecError::ZeroWidth);
        }
        Ok(CodecSpec {
            kind: CodecKind::Identity,
            data_width,
            code_width: data_width,
        })
    }

    /// Gives 13→19, 12→18 and 11→16 for the slice widths in use.
    pub fn hamming_secded(data_width: usize) -> Result<Self, CodecError> {
        if data_width == 0 {
            return Err(CodecError::ZeroWidth);
        }
        Ok(CodecSpec {
            kind: CodecKind::HammingSecded,
            data_width,
            code_width: data_width + parity_bits_for(data_width) + 1,
        })
    }

    pub fn new(kind: CodecKind, data_width: usize) -> Result<Self, CodecError> {
        match kind {
            CodecKind::Identity => Self::identity(data_width),
            CodecKind::HammingSecded => Self::hamming_secded(data_width),
        }
    }

    fn parity_bits(&self) -> usize {
        self.code_width - self.data_width - 1
    }

    /// Fails when `n_frames` codewords would not fit in the preamble budget.
    pub fn check_budget(&self, n_frames: usize) -> Result<usize, CodecError> {
        let total = n_frames * self.code_width;
        if total > PREAMBLE_BUDGET_BITS {
            return Err(CodecError::OverBudget {
                n_frames,
                code_width: self.code_width,
                total,
            });
        }
        Ok(total)
    }

    /// Code rate relative to a `payload_bits` message spread over `n_frames`.
    pub fn effective_rate(&self, payload_bits: usize, n_frames: usize) -> f64 {
        payload_bits as f64 / (n_frames * self.code_width) as f64
    }

    /// Syndrome columns of the data bits.
    fn data_columns(&self) -> Vec<usize> {
        (3usize..)
            .filter(|v| !v.is_power_of_two())
            .take(self.data_width)
            .collect()
    }

    pub fn encode(&self, data: &Bits) -> Result<Bits, CodecError> {
        if data.len() != self.data_width {
            return Err(CodecError::WidthMismatch {
                expected: self.data_width,
                actual: data.len(),
            });
        }
        if self.kind == CodecKind::Identity {
            return Ok(data.clone());
        }
        let r = self.parity_bits();
        let syndrome = self
            .data_columns()
            .iter()
            .zip(data.iter())
            .filter(|(_, bit)| *bit)
            .fold(0usize, |acc, (col, _)| acc ^ col);
        let mut word = data.clone();
        for j in 0..r {
            word.extend(&Bits::from_bools(vec![(syndrome >> j) & 1 == 1]));
        }
        let overall = word.count_ones() % 2 == 1;
        word.extend(&Bits::from_bools(vec![overall]));
        Ok(word)
    }

    pub fn decode(&self, word: &Bits) -> Result<(Bits, DecodeStatus), CodecError> {
        if word.len() != self.code_width {
            return Err(CodecError::WidthMismatch {
                expected: self.code_width,
                actual: word.len(),
            });
        }
        let k = self.data_width;
        if self.kind == CodecKind::Identity {
            return Ok((word.clone(), DecodeStatus::Clean));
        }
        let r = self.parity_bits();
        let columns = self.data_columns();
        let mut syndrome = 0usize;
        for (i, col) in columns.iter().enumerate() {
            if word.get(i) {
                syndrome ^= col;
            }
        }
        for j in 0..r {
            if word.get(k + j) {
                syndrome ^= 1 << j;
            }
        }
        let odd = word.count_ones() % 2 == 1;
        let mut data = word.range(0, k);
        let status = match (syndrome, odd) {
            (0, false) => DecodeStatus::Clean,
            // overall parity bit alone flipped
            (0, true) => DecodeStatus::Corrected,
            (_, false) => DecodeStatus::DetectedUncorrectable,
            (s, true) if s.is_power_of_two() => DecodeStatus::Corrected,
            (s, true) => match columns.iter().position(|&c| c == s) {
                Some(i) => {
                    data.flip(i);
                    DecodeStatus::Corrected
                }
                // syndrome of a column removed by shortening
                None => DecodeStatus::DetectedUncorrectable,
            },
        };
        Ok((data, status))
    }
}

pub fn encode_slice(data: &Bits, spec: &CodecSpec) -> Result<Bits, CodecError> {
    spec.encode(data)
}

pub fn decode_slice(word: &Bits, spec: &CodecSpec) -> Result<(Bits, DecodeStatus), CodecError> {
    spec.decode(word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_codewords(spec: &CodecSpec) -> Vec<(Bits, Bits)> {
        (0..1u64 << spec.data_width)
            .map(|v| {
                let d = Bits::from_u64(v, spec.data_width);
                let c = spec.encode(&d).unwrap();
                (d, c)
            })
            .collect()
    }

    #[test]
    fn widths_match_slice_table() {
        assert_eq!(CodecSpec::hamming_secded(13).unwrap().code_width, 19);
        assert_eq!(CodecSpec::hamming_secded(12).unwrap().code_width, 18);
        assert_eq!(CodecSpec::hamming_secded(11).unwrap().code_width, 16);
        assert_eq!(CodecSpec::identity(12).unwrap().code_width, 12);
    }

    #[test]
    fn budget_holds_for_every_offered_pair() {
        for (n, k) in [(13, 13), (14, 12), (15, 11)] {
            for spec in [
                CodecSpec::identity(k).unwrap(),
                CodecSpec::hamming_secded(k).unwrap(),
            ] {
                let total = spec.check_budget(n).unwrap();
                assert!(total <= PREAMBLE_BUDGET_BITS);
                assert!(spec.effective_rate(160, n) >= 160.0 / 260.0);
            }
        }
        assert!(matches!(
            CodecSpec::hamming_secded(13).unwrap().check_budget(14),
            Err(CodecError::OverBudget { .. })
        ));
    }

    #[test]
    fn zero_data_gives_zero_word() {
        let spec = CodecSpec::hamming_secded(13).unwrap();
        assert_eq!(spec.encode(&Bits::zeros(13)).unwrap(), Bits::zeros(19));
    }

    #[test]
    fn identity_is_passthrough() {
        let spec = CodecSpec::identity(11).unwrap();
        let d = Bits::parse_binary("10110011101").unwrap();
        assert_eq!(spec.encode(&d).unwrap(), d);
        assert_eq!(spec.decode(&d).unwrap(), (d, DecodeStatus::Clean));
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let spec = CodecSpec::hamming_secded(11).unwrap();
        assert_eq!(
            spec.encode(&Bits::zeros(12)),
            Err(CodecError::WidthMismatch {
                expected: 11,
                actual: 12
            })
        );
        assert!(spec.decode(&Bits::zeros(15)).is_err());
    }

    #[test]
    fn systematic_layout() {
        let spec = CodecSpec::hamming_secded(12).unwrap();
        let d = Bits::parse_binary("100000000001").unwrap();
        let c = spec.encode(&d).unwrap();
        assert_eq!(c.range(0, 12), d);
        // data bit 0 owns column 3, bit 11 owns column 17 (0b10001): parity = 3 ^ 17 = 0b10010
        assert_eq!(c.range(12, 17).to_string(), "01001");
    }

    #[test]
    fn minimum_distance_is_four_at_k11() {
        let spec = CodecSpec::hamming_secded(11).unwrap();
        // linear code: minimum distance = minimum nonzero weight
        let min = all_codewords(&spec)
            .iter()
            .skip(1)
            .map(|(_, c)| c.count_ones())
            .min()
            .unwrap();
        assert_eq!(min, 4);
    }

    #[test]
    fn single_flips_are_corrected_for_wide_slices() {
        for k in [12, 13] {
            let spec = CodecSpec::hamming_secded(k).unwrap();
            for v in [0u64, 1, 0x5a5, (1 << k) - 1] {
                let d = Bits::from_u64(v, k);
                let c = spec.encode(&d).unwrap();
                for i in 0..spec.code_width {
                    let mut w = c.clone();
                    w.flip(i);
                    assert_eq!(
                        spec.decode(&w).unwrap(),
                        (d.clone(), DecodeStatus::Corrected)
                    );
                    for j in i + 1..spec.code_width {
                        let mut w2 = w.clone();
                        w2.flip(j);
                        assert_eq!(
                            spec.decode(&w2).unwrap().1,
                            DecodeStatus::DetectedUncorrectable
                        );
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn encoding_is_linear(x in 0u64..(1 << 13), y in 0u64..(1 << 13)) {
            let spec = CodecSpec::hamming_secded(13).unwrap();
            let bx = Bits::from_u64(x, 13);
            let by = Bits::from_u64(y, 13);
            let lhs = spec.encode(&bx.xor(&by)).unwrap();
            let rhs = spec.encode(&bx).unwrap().xor(&spec.encode(&by).unwrap());
            prop_assert_eq!(lhs, rhs);
        }
    }
}
