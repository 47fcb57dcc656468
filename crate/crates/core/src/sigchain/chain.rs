use serde::{Deserialize, Serialize};

use crate::bits::Bits;

use super::{
    pearson_hash, scheme::KeyedTagScheme, width_for_frames, ChainContext, KeyMaterial,
    SigchainError, SignMessage, Signature, SignatureScheme, Slice, SliceSet, SIGNATURE_BITS,
};

/// Splits `bits` into `n_frames` slices of the tabulated width, zero-padding
/// the tail.
pub fn slice_signature(bits: &Bits, n_frames: usize) -> Result<SliceSet, SigchainError> {
    slice_with_width(bits, n_frames, width_for_frames(n_frames)?)
}

/// Like [`slice_signature`] with an explicit width, for layouts stretched by
/// extra EAP frames.
pub fn slice_with_width(
    bits: &Bits,
    n_frames: usize,
    width: usize,
) -> Result<SliceSet, SigchainError> {
    let capacity = n_frames * width;
    if n_frames == 0 || width == 0 || bits.len() > capacity {
        return Err(SigchainError::TooManyBits {
            len: bits.len(),
            n_frames,
            width,
        });
    }
    let pad_bits = capacity - bits.len();
    let padded = bits.concat(&Bits::zeros(pad_bits));
    let slices = (0..n_frames)
        .map(|i| Slice {
            index: i + 1,
            bits: padded.range(i * width, (i + 1) * width),
            is_last: i + 1 == n_frames,
            masked: false,
        })
        .collect();
    Ok(SliceSet {
        n_frames,
        width,
        slices,
        pad_bits,
    })
}

/// Concatenates the slices and strips the padding. Returns `None` when a
/// padding bit is set.
pub fn reassemble(set: &SliceSet) -> Option<Bits> {
    let mut all = Bits::default();
    for s in &set.slices {
        all.extend(&s.bits);
    }
    let payload_len = all.len() - set.pad_bits;
    if all.range(payload_len, all.len()).count_ones() != 0 {
        return None;
    }
    all.truncate(payload_len);
    Some(all)
}

fn last_slice_pad(channel: u8, seq: u16, ptk: &[u8], width: usize) -> Result<Bits, SigchainError> {
    let [hi, lo] = seq.to_be_bytes();
    pearson_hash(&[channel, hi, lo], ptk, width)
}

/// XORs the last slice with `Hash(channel || seq)_PTK`.
pub fn mask_last_slice(
    s: &Slice,
    ctx: &ChainContext,
    key: &KeyMaterial,
) -> Result<Slice, SigchainError> {
    if !s.is_last {
        return Err(SigchainError::NotLastSlice(s.index));
    }
    if s.masked {
        return Err(SigchainError::AlreadyMasked(s.index));
    }
    let pad = last_slice_pad(ctx.channel, ctx.last_seq, &key.ptk, s.bits.len())?;
    Ok(Slice {
        bits: s.bits.xor(&pad),
        masked: true,
        ..s.clone()
    })
}

pub fn unmask_last_slice(
    s: &Slice,
    ctx: &ChainContext,
    key: &KeyMaterial,
) -> Result<Slice, SigchainError> {
    if !s.is_last {
        return Err(SigchainError::NotLastSlice(s.index));
    }
    if !s.masked {
        return Err(SigchainError::NotMasked(s.index));
    }
    let pad = last_slice_pad(ctx.channel, ctx.last_seq, &key.ptk, s.bits.len())?;
    Ok(Slice {
        bits: s.bits.xor(&pad),
        masked: false,
        ..s.clone()
    })
}

/// `P'_{n+1} = P_{n+1} ^ P_{n+2} ^ ... ^ P_N`, sent over the new channel in
/// place of `P_{n+1}`.
pub fn switch_xor_transform(remaining: &[Slice]) -> Result<Slice, SigchainError> {
    if remaining.len() < 2 {
        return Err(SigchainError::TooFewRemaining(remaining.len()));
    }
    let first = &remaining[0];
    let bits = remaining[1..]
        .iter()
        .fold(first.bits.clone(), |acc, s| acc.xor(&s.bits));
    Ok(Slice {
        index: first.index,
        bits,
        is_last: false,
        masked: false,
    })
}

/// Switch right before EAPOL3: the last slice is additionally XORed with
/// `Hash([])_PTK`. Applying it twice is the identity.
pub fn last_frame_switch(p_last: &Slice, key: &KeyMaterial) -> Result<Slice, SigchainError> {
    if !p_last.is_last {
        return Err(SigchainError::NotLastSlice(p_last.index));
    }
    let pad = pearson_hash(&[], &key.ptk, p_last.bits.len())?;
    Ok(Slice {
        bits: p_last.bits.xor(&pad),
        ..p_last.clone()
    })
}

fn check_switch_positions(switches: &[usize], n_frames: usize) -> Result<(), SigchainError> {
    let mut prev = 0;
    for &n in switches {
        if n <= prev || n >= n_frames {
            return Err(SigchainError::BadSwitchPosition {
                after_index: n,
                n_frames,
            });
        }
        prev = n;
    }
    Ok(())
}

/// AP side: turns raw slices into what goes on air.
///
/// `eapol3` is the AP's `(channel, seq)` for the last frame; `switches` lists
/// the positions `n` after which the AP changed channel. Transforms are
/// computed over the raw slices, so any number of switches can be undone by
/// the station in descending order.
pub fn embed_chain(
    raw: &SliceSet,
    eapol3: (u8, u16),
    key: &KeyMaterial,
    switches: &[usize],
) -> Result<SliceSet, SigchainError> {
    let n = raw.n_frames;
    check_switch_positions(switches, n)?;
    let mut wire = raw.clone();
    for &after in switches.iter().filter(|&&a| a + 2 <= n) {
        // slices after..n are indices after+1..=n
        wire.slices[after] = switch_xor_transform(&raw.slices[after..])?;
    }
    let ap_ctx = ChainContext::new(eapol3.0, eapol3.1);
    let mut last = mask_last_slice(&raw.slices[n - 1], &ap_ctx, key)?;
    if switches.last() == Some(&(n - 1)) {
        last = last_frame_switch(&last, key)?;
    }
    wire.slices[n - 1] = last;
    Ok(wire)
}

/// Station side inverse of [`embed_chain`] using the station's own view of
/// the channel, sequence number and switch positions.
pub fn recover_chain(
    wire: &SliceSet,
    ctx: &ChainContext,
    key: &KeyMaterial,
) -> Result<SliceSet, SigchainError> {
    let n = wire.n_frames;
    let switches = ctx.switch_positions();
    check_switch_positions(&switches, n)?;
    let mut raw = wire.clone();
    let mut last = wire.slices[n - 1].clone();
    if switches.last() == Some(&(n - 1)) {
        last = last_frame_switch(&last, key)?;
    }
    raw.slices[n - 1] = unmask_last_slice(&last, ctx, key)?;
    for &after in switches.iter().rev().filter(|&&a| a + 2 <= n) {
        let rest = raw.slices[after + 1..]
            .iter()
            .fold(Bits::zeros(wire.width), |acc, s| acc.xor(&s.bits));
        raw.slices[after].bits = raw.slices[after].bits.xor(&rest);
    }
    Ok(raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Channel,
    Sequence,
    Padding,
    Signature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyOutcome {
    Success,
    Failure(FailureReason),
}

impl VerifyOutcome {
    pub fn is_success(self) -> bool {
        self == VerifyOutcome::Success
    }
}

/// What the station holds once the AP's last frame has arrived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedChain {
    /// On-wire slices in arrival order.
    pub slices: SliceSet,
    /// Operating channel advertised in the AP's frames.
    pub advertised_channel: u8,
    /// Sequence number carried in the EAPOL3 header.
    pub eapol3_seq: u16,
}

fn check_structure(set: &SliceSet) -> Result<(), SigchainError> {
    let mut seen = vec![false; set.n_frames + 1];
    for s in &set.slices {
        if s.index == 0 || s.index > set.n_frames {
            return Err(SigchainError::OutOfOrder);
        }
        if std::mem::replace(&mut seen[s.index], true) {
            return Err(SigchainError::DuplicateSlice(s.index));
        }
    }
    if let Some(missing) = (1..=set.n_frames).find(|&i| !seen[i]) {
        return Err(SigchainError::MissingSlice(missing));
    }
    if set
        .slices
        .iter()
        .enumerate()
        .any(|(pos, s)| s.index != pos + 1)
    {
        return Err(SigchainError::OutOfOrder);
    }
    if set.slices.iter().any(|s| s.bits.len() != set.width) {
        return Err(SigchainError::OutOfOrder);
    }
    Ok(())
}

/// Checks the advertised channel and EAPOL3 sequence number against the
/// station's expectations, undoes switches and masking, reassembles and
/// verifies. The first failed check is reported.
pub fn reassemble_and_verify(
    received: &ReceivedChain,
    public_key: &[u8],
    ctx: &ChainContext,
    key: &KeyMaterial,
    msg: &SignMessage,
) -> Result<VerifyOutcome, SigchainError> {
    verify_with(&KeyedTagScheme, received, public_key, ctx, key, msg)
}

pub(crate) fn verify_with(
    scheme: &dyn SignatureScheme,
    received: &ReceivedChain,
    public_key: &[u8],
    ctx: &ChainContext,
    key: &KeyMaterial,
    msg: &SignMessage,
) -> Result<VerifyOutcome, SigchainError> {
    check_structure(&received.slices)?;
    if received.advertised_channel != ctx.channel {
        return Ok(VerifyOutcome::Failure(FailureReason::Channel));
    }
    if received.eapol3_seq != ctx.last_seq {
        return Ok(VerifyOutcome::Failure(FailureReason::Sequence));
    }
    let raw = recover_chain(&received.slices, ctx, key)?;
    let Some(bits) = reassemble(&raw) else {
        return Ok(VerifyOutcome::Failure(FailureReason::Padding));
    };
    if bits.len() != SIGNATURE_BITS {
        return Ok(VerifyOutcome::Failure(FailureReason::Signature));
    }
    let sig = Signature::from_bits(bits)?;
    Ok(if scheme.verify(msg, &sig, public_key) {
        VerifyOutcome::Success
    } else {
        VerifyOutcome::Failure(FailureReason::Signature)
    })
}
