//! Keyed Pearson hash with variable output width.

use crate::bits::Bits;

use super::SigchainError;

/// The fixed affine byte permutation `i -> 167 i + 13 (mod 256)`.
#[inline]
pub fn permute(i: u8) -> u8 {
    167u8.wrapping_mul(i).wrapping_add(13)
}

/// Output byte `j` runs the Pearson walk from `h = 0` over
/// `[j] || key || input`; bytes are concatenated and the result truncated to
/// its `width` most significant bits.
pub fn pearson_hash(input: &[u8], key: &[u8], width: usize) -> Result<Bits, SigchainError> {
    if !(1..=64).contains(&width) {
        return Err(SigchainError::HashWidth(width));
    }
    let out: Vec<u8> = (0..width.div_ceil(8))
        .map(|j| {
            std::iter::once(j as u8)
                .chain(key.iter().copied())
                .chain(input.iter().copied())
                .fold(0u8, |h, b| permute(h ^ b))
        })
        .collect();
    let mut bits = Bits::from_bytes(&out);
    bits.truncate(width);
    Ok(bits)
}
