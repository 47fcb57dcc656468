//! Signature schemes producing 160-bit tags.

use sha2::{Digest, Sha256};

use crate::bits::Bits;

use super::{KeyMaterial, SigchainError, SignMessage, Signature, SIGNATURE_BITS};

/// A short signature scheme whose output fits the preamble chain.
///
/// A pairing-based scheme (e.g. BLS over a 160-bit curve) can be dropped in
/// behind this trait without touching the chain logic.
pub trait SignatureScheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// Derives a key pair from a seed.
    fn keygen(&self, seed: &[u8]) -> (Vec<u8>, Vec<u8>);

    fn sign(&self, msg: &SignMessage, private_key: &[u8]) -> Signature;

    fn verify(&self, msg: &SignMessage, sig: &Signature, public_key: &[u8]) -> bool;
}

/// Deterministic keyed-tag stand-in.
///
/// `public = SHA-256("pk" || private)` and the tag is the leading 160 bits of
/// `SHA-256(public || message)`. Correct and deterministic, but anyone holding
/// the public key can compute tags: it is not unforgeable.
#[derive(Debug, Default, Clone, Copy)]
pub struct KeyedTagScheme;

impl KeyedTagScheme {
    fn public_from_private(private_key: &[u8]) -> Vec<u8> {
        let mut h = Sha256::new();
        h.update(b"pk");
        h.update(private_key);
        h.finalize().to_vec()
    }

    fn tag(public_key: &[u8], msg: &SignMessage) -> Bits {
        let mut h = Sha256::new();
        h.update(public_key);
        h.update(msg.bits().to_bytes());
        let mut bits = Bits::from_bytes(&h.finalize());
        bits.truncate(SIGNATURE_BITS);
        bits
    }
}

impl SignatureScheme for KeyedTagScheme {
    fn name(&self) -> &'static str {
        "keyed-tag-sha256"
    }

    fn keygen(&self, seed: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let mut h = Sha256::new();
        h.update(b"sk");
        h.update(seed);
        let private = h.finalize().to_vec();
        (Self::public_from_private(&private), private)
    }

    fn sign(&self, msg: &SignMessage, private_key: &[u8]) -> Signature {
        let public = Self::public_from_private(private_key);
        Signature::from_bits(Self::tag(&public, msg)).expect("tag is 160 bits")
    }

    fn verify(&self, msg: &SignMessage, sig: &Signature, public_key: &[u8]) -> bool {
        Self::tag(public_key, msg) == *sig.bits()
    }
}

pub fn sign_with(
    scheme: &dyn SignatureScheme,
    msg: &SignMessage,
    key: &KeyMaterial,
) -> Result<Signature, SigchainError> {
    let private = key
        .private_key
        .as_deref()
        .ok_or(SigchainError::MissingPrivateKey)?;
    Ok(scheme.sign(msg, private))
}

/// Signs with the default scheme.
pub fn sign(msg: &SignMessage, key: &KeyMaterial) -> Result<Signature, SigchainError> {
    sign_with(&KeyedTagScheme, msg, key)
}

/// Verifies `sig` over `msg`. `sig` is taken as raw bits so that length
/// errors surface here rather than at construction.
pub fn verify_sig(msg: &SignMessage, sig: &Bits, public_key: &[u8]) -> Result<bool, SigchainError> {
    let sig = Signature::from_bits(sig.clone())?;
    Ok(KeyedTagScheme.verify(msg, &sig, public_key))
}
