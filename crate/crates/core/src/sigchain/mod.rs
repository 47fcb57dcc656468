//! The sliced signature chain.
//!
//! An AP signs `mac || utc_time` once per connection, splits the 160-bit tag
//! into one slice per pre-authentication frame, masks the final (EAPOL3)
//! slice with a keyed hash of its operating channel and sequence number, and
//! embeds each slice in a frame preamble. The station collects the slices,
//! undoes any channel-switch transforms, unmasks, reassembles and verifies.

mod chain;
mod guess;
mod pearson;
mod roaming;
mod scheme;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;

pub use chain::{
    embed_chain, last_frame_switch, mask_last_slice, reassemble, reassemble_and_verify,
    recover_chain, slice_signature, slice_with_width, switch_xor_transform, unmask_last_slice,
    FailureReason, ReceivedChain, VerifyOutcome,
};
pub use guess::guess_success_probability;
pub use pearson::pearson_hash;
pub use roaming::{roaming_slices, roaming_verify, OfferedSlice};
pub use scheme::{sign, sign_with, verify_sig, KeyedTagScheme, SignatureScheme};

pub const MESSAGE_BITS: usize = 112;
pub const SIGNATURE_BITS: usize = 160;
/// Authentication attempt limit `L`.
pub const ATTEMPT_LIMIT: u8 = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SigchainError {
    #[error("private key not available")]
    MissingPrivateKey,
    #[error("signature must be {SIGNATURE_BITS} bits, got {0}")]
    SignatureLength(usize),
    #[error("message must be {MESSAGE_BITS} bits, got {0}")]
    MessageLength(usize),
    #[error("hash width must be in 1..=64, got {0}")]
    HashWidth(usize),
    #[error("unsupported frame count {0}; expected 13, 14 or 15")]
    UnsupportedFrameCount(usize),
    #[error("{len} bits do not fit {n_frames} slices of {width} bits")]
    TooManyBits {
        len: usize,
        n_frames: usize,
        width: usize,
    },
    #[error("slice {0} is not the last slice")]
    NotLastSlice(usize),
    #[error("slice {0} is already masked")]
    AlreadyMasked(usize),
    #[error("slice {0} is not masked")]
    NotMasked(usize),
    #[error("switch transform needs at least 2 remaining slices, got {0}")]
    TooFewRemaining(usize),
    #[error("slice {0} is missing")]
    MissingSlice(usize),
    #[error("slice {0} appears more than once")]
    DuplicateSlice(usize),
    #[error("slices are not in index order")]
    OutOfOrder,
    #[error("switch positions must be strictly increasing and below {n_frames}: {after_index}")]
    BadSwitchPosition { after_index: usize, n_frames: usize },
    #[error("PTK must be at least 16 bytes, got {0}")]
    ShortPtk(usize),
    #[error("roaming slice indices must be distinct and within 1..={max}: {a}, {b}")]
    BadRoamingIndices { a: usize, b: usize, max: usize },
    #[error("location must be finite")]
    NonFiniteLocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub fn parse(s: &str) -> Option<Self> {
        let parts: Vec<u8> = s
            .split(':')
            .map(|p| u8::from_str_radix(p, 16).ok())
            .collect::<Option<_>>()?;
        Some(MacAddr(parts.try_into().ok()?))
    }
}

impl std::fmt::Display for MacAddr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.0.iter().map(|b| format!("{b:02X}")).collect();
        f.write_str(&s.join(":"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Location {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApIdentity {
    pub mac: MacAddr,
    pub location: Location,
    pub key_handle: String,
}

impl ApIdentity {
    pub fn new(mac: MacAddr) -> Self {
        ApIdentity {
            mac,
            location: Location::default(),
            key_handle: mac.to_string(),
        }
    }

    pub fn with_location(mut self, location: Location) -> Result<Self, SigchainError> {
        let l = location;
        if ![l.latitude_deg, l.longitude_deg, l.altitude_m]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(SigchainError::NonFiniteLocation);
        }
        self.location = location;
        Ok(self)
    }
}

/// AP key pair plus the session keys shared with one station.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyMaterial {
    pub public_key: Vec<u8>,
    #[serde(skip)]
    pub private_key: Option<Vec<u8>>,
    pub ptk: Vec<u8>,
    pub pmk: Vec<u8>,
}

impl std::fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyMaterial")
            .field("public_key", &self.public_key.len())
            .field(
                "private_key",
                &self.private_key.as_ref().map(|_| "<redacted>"),
            )
            .field("ptk", &self.ptk.len())
            .field("pmk", &self.pmk.len())
            .finish()
    }
}

impl KeyMaterial {
    pub fn new(
        public_key: Vec<u8>,
        private_key: Option<Vec<u8>>,
        ptk: Vec<u8>,
        pmk: Vec<u8>,
    ) -> Result<Self, SigchainError> {
        if ptk.len() < 16 {
            return Err(SigchainError::ShortPtk(ptk.len()));
        }
        Ok(KeyMaterial {
            public_key,
            private_key,
            ptk,
            pmk,
        })
    }

    pub fn generate(
        scheme: &dyn SignatureScheme,
        seed: &[u8],
        ptk: &[u8],
        pmk: &[u8],
    ) -> Result<Self, SigchainError> {
        let (public, private) = scheme.keygen(seed);
        Self::new(public, Some(private), ptk.to_vec(), pmk.to_vec())
    }

    /// The station's view: everything but the private key.
    pub fn public_view(&self) -> KeyMaterial {
        KeyMaterial {
            private_key: None,
            ..self.clone()
        }
    }
}

/// `mac (48) || utc_seconds (64)`, big-endian.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignMessage(Bits);

impl SignMessage {
    pub fn from_bits(bits: Bits) -> Result<Self, SigchainError> {
        if bits.len() != MESSAGE_BITS {
            return Err(SigchainError::MessageLength(bits.len()));
        }
        Ok(SignMessage(bits))
    }

    pub fn bits(&self) -> &Bits {
        &self.0
    }
}

pub fn build_message(ap: &ApIdentity, utc_seconds: u64) -> SignMessage {
    let bits = Bits::from_bytes(&ap.mac.0).concat(&Bits::from_u64(utc_seconds, 64));
    SignMessage(bits)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature(Bits);

impl Signature {
    pub fn from_bits(bits: Bits) -> Result<Self, SigchainError> {
        if bits.len() != SIGNATURE_BITS {
            return Err(SigchainError::SignatureLength(bits.len()));
        }
        Ok(Signature(bits))
    }

    pub fn bits(&self) -> &Bits {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slice {
    /// 1-based position in the chain.
    pub index: usize,
    pub bits: Bits,
    pub is_last: bool,
    pub masked: bool,
}

/// JSON form used in reports; bits are MSB-first packed hex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub index: usize,
    pub width: usize,
    pub bits_hex: String,
    pub is_last: bool,
}

impl From<&Slice> for SliceRecord {
    fn from(s: &Slice) -> Self {
        SliceRecord {
            index: s.index,
            width: s.bits.len(),
            bits_hex: s.bits.to_hex(),
            is_last: s.is_last,
        }
    }
}

impl SliceRecord {
    /// A last slice read back from a report is taken to be on-wire, i.e. masked.
    pub fn to_slice(&self) -> Option<Slice> {
        Some(Slice {
            index: self.index,
            bits: Bits::from_hex(&self.bits_hex, self.width)?,
            is_last: self.is_last,
            masked: self.is_last,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceSet {
    pub n_frames: usize,
    pub width: usize,
    pub slices: Vec<Slice>,
    pub pad_bits: usize,
}

impl SliceSet {
    pub fn records(&self) -> Vec<SliceRecord> {
        self.slices.iter().map(SliceRecord::from).collect()
    }

    pub fn last(&self) -> &Slice {
        self.slices.last().expect("slice set is never empty")
    }
}

/// Bits per slice for the supported frame counts.
pub fn width_for_frames(n_frames: usize) -> Result<usize, SigchainError> {
    match n_frames {
        13 => Ok(13),
        14 => Ok(12),
        15 => Ok(11),
        n => Err(SigchainError::UnsupportedFrameCount(n)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchRecord {
    /// The switch happened after slice `after_index` was sent.
    pub after_index: usize,
    pub new_channel: u8,
    /// Set once the chain verifies (or fails) with this switch applied.
    pub valid: Option<bool>,
}

/// Station-side chain state: expected operating channel and EAPOL3
/// sequence number, remaining attempts, and the channel switches observed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainContext {
    pub channel: u8,
    pub last_seq: u16,
    pub attempts_left: u8,
    pub switch_log: Vec<SwitchRecord>,
}

impl ChainContext {
    pub fn new(channel: u8, last_seq: u16) -> Self {
        ChainContext {
            channel,
            last_seq,
            attempts_left: ATTEMPT_LIMIT,
            switch_log: Vec::new(),
        }
    }

    pub fn record_switch(
        &mut self,
        after_index: usize,
        new_channel: u8,
        n_frames: usize,
    ) -> Result<(), SigchainError> {
        let increasing = self
            .switch_log
            .last()
            .is_none_or(|prev| prev.after_index < after_index);
        if after_index == 0 || after_index >= n_frames || !increasing {
            return Err(SigchainError::BadSwitchPosition {
                after_index,
                n_frames,
            });
        }
        self.switch_log.push(SwitchRecord {
            after_index,
            new_channel,
            valid: None,
        });
        self.channel = new_channel;
        Ok(())
    }

    pub fn switch_positions(&self) -> Vec<usize> {
        self.switch_log.iter().map(|s| s.after_index).collect()
    }

    pub fn settle_switches(&mut self, valid: bool) {
        for s in &mut self.switch_log {
            s.valid = Some(valid);
        }
    }

    pub fn limit_ok(&self) -> bool {
        self.attempts_left > 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_message() {
        let ap = ApIdentity::new(MacAddr([0; 6]));
        assert_eq!(*build_message(&ap, 0).bits(), Bits::zeros(112));
    }

    #[test]
    fn all_ones_mac_then_zero_time() {
        let ap = ApIdentity::new(MacAddr([0xff; 6]));
        let m = build_message(&ap, 0);
        assert_eq!(m.bits().range(0, 48), Bits::ones(48));
        assert_eq!(m.bits().range(48, 112), Bits::zeros(64));
    }

    #[test]
    fn message_layout_matches_hex_concatenation() {
        let ap = ApIdentity::new(MacAddr::parse("AA:BB:CC:DD:EE:FF").unwrap());
        let m = build_message(&ap, 1_700_000_000);
        // independent oracle: concatenate the hex strings and parse
        let hex = format!("{}{:016x}", "aabbccddeeff", 1_700_000_000u64);
        assert_eq!(hex, "aabbccddeeff000000006553f100");
        let oracle = Bits::from_hex(&hex, 112).unwrap();
        assert_eq!(*m.bits(), oracle);
    }

    #[test]
    fn short_ptk_rejected() {
        assert_eq!(
            KeyMaterial::new(vec![], None, vec![0; 15], vec![]),
            Err(SigchainError::ShortPtk(15))
        );
    }

    #[test]
    fn private_key_never_serialized() {
        let k = KeyMaterial::new(vec![1], Some(vec![0xde, 0xad]), vec![0; 16], vec![2]).unwrap();
        let json = serde_json::to_string(&k).unwrap();
        assert!(!json.contains("private"));
        assert!(!format!("{k:?}").contains("222"));
    }

    #[test]
    fn non_finite_location_rejected() {
        let ap = ApIdentity::new(MacAddr([1; 6]));
        let bad = Location {
            latitude_deg: f64::NAN,
            ..Default::default()
        };
        assert_eq!(ap.with_location(bad), Err(SigchainError::NonFiniteLocation));
    }

    #[test]
    fn switch_log_must_increase() {
        let mut ctx = ChainContext::new(6, 100);
        ctx.record_switch(3, 11, 13).unwrap();
        assert!(ctx.record_switch(3, 1, 13).is_err());
        assert!(ctx.record_switch(13, 1, 13).is_err());
        ctx.record_switch(12, 1, 13).unwrap();
        assert_eq!(ctx.channel, 1);
        assert_eq!(ctx.switch_positions(), vec![3, 12]);
    }

    #[test]
    fn slice_record_json_shape() {
        let s = Slice {
            index: 1,
            bits: Bits::from_hex("1a28", 13).unwrap(),
            is_last: false,
            masked: false,
        };
        let json = serde_json::to_string(&SliceRecord::from(&s)).unwrap();
        assert_eq!(
            json,
            r#"{"index":1,"width":13,"bits_hex":"1a28","is_last":false}"#
        );
    }
}
