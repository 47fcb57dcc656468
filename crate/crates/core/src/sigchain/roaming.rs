//! Fast re-authentication when a station roams to another AP of the same
//! network: both sides derive a 160-bit HMAC under the PMK, slice it, and the
//! new AP reveals two slices.

use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::bits::Bits;

use super::{slice_signature, SigchainError, SignMessage, SliceSet, SIGNATURE_BITS};

pub const ROAMING_FRAMES: usize = 13;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfferedSlice {
    pub index: usize,
    pub bits: Bits,
}

/// `HMAC-SHA256(pmk, m)` truncated to 160 bits and cut into 13 slices.
pub fn roaming_slices(pmk: &[u8], msg: &SignMessage) -> SliceSet {
    let mut mac = Hmac::<Sha256>::new_from_slice(pmk).expect("HMAC accepts any key length");
    mac.update(&msg.bits().to_bytes());
    let mut bits = Bits::from_bytes(&mac.finalize().into_bytes());
    bits.truncate(SIGNATURE_BITS);
    slice_signature(&bits, ROAMING_FRAMES).expect("13 frames is a supported layout")
}

/// True iff both offered slices equal the local ones at their indices.
pub fn roaming_verify(
    offered: &[OfferedSlice; 2],
    local: &SliceSet,
) -> Result<bool, SigchainError> {
    let [a, b] = offered;
    let max = local.n_frames;
    if a.index == b.index || !(1..=max).contains(&a.index) || !(1..=max).contains(&b.index) {
        return Err(SigchainError::BadRoamingIndices {
            a: a.index,
            b: b.index,
            max,
        });
    }
    Ok(offered
        .iter()
        .all(|o| local.slices[o.index - 1].bits == o.bits))
}
