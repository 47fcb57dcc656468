//! Seeded end-to-end channel establishment: sign, slice, embed, send each
//! frame through the timing and bit channels, check it at the station, and
//! verify the reassembled chain.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, ScenarioConfig};
use crate::bits::Bits;
use crate::codec::{CodecKind, CodecSpec, DecodeStatus};
use crate::phych::{flip_bits, flip_probability, ChannelModel};
use crate::protofsm::{enforce_limit, sta_step, AdversaryAction, Observation, StaState};
use crate::sigchain::{
    build_message, embed_chain, reassemble_and_verify, sign, slice_with_width, verify_sig,
    ApIdentity, ChainContext, FailureReason, KeyMaterial, KeyedTagScheme, MacAddr, ReceivedChain,
    SignatureScheme, SliceSet, VerifyOutcome, SIGNATURE_BITS,
};
use crate::timebound::TimingParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Connected,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TimeBoundViolation,
    ChannelMismatch,
    SequenceMismatch,
    PaddingError,
    SignatureFailure,
}

impl From<FailureReason> for RejectReason {
    fn from(r: FailureReason) -> Self {
        match r {
            FailureReason::Channel => RejectReason::ChannelMismatch,
            FailureReason::Sequence => RejectReason::SequenceMismatch,
            FailureReason::Padding => RejectReason::PaddingError,
            FailureReason::Signature => RejectReason::SignatureFailure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceStatus {
    Clean,
    Corrected,
    DetectedUncorrectable,
    /// Arrived after `t_in` and was discarded.
    Late,
}

impl From<DecodeStatus> for SliceStatus {
    fn from(s: DecodeStatus) -> Self {
        match s {
            DecodeStatus::Clean => SliceStatus::Clean,
            DecodeStatus::Corrected => SliceStatus::Corrected,
            DecodeStatus::DetectedUncorrectable => SliceStatus::DetectedUncorrectable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    pub index: usize,
    pub attempt: usize,
    /// Channel the station listened on.
    pub channel: u8,
    pub gap_ms: f64,
    pub within_t_in: bool,
    /// Delivered by the adversary rather than the AP.
    pub via_adversary: bool,
    pub slice_status: SliceStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeReport {
    pub outcome: Outcome,
    pub reason: Option<RejectReason>,
    /// Connected while accepting adversary-delivered frames.
    pub compromised: bool,
    pub sta_state: StaState,
    pub adversary: Option<AdversaryAction>,
    pub n_frames: usize,
    pub slice_width: usize,
    pub codec: CodecKind,
    pub code_width: usize,
    pub base_ce_ms: f64,
    pub t_extract_ms: f64,
    pub t_ce_ms: f64,
    pub overhead_percent: f64,
    pub frames: Vec<FrameLog>,
}

impl CeReport {
    pub fn ok(&self) -> bool {
        self.outcome == Outcome::Connected && !self.compromised
    }
}

/// Rounds away accumulated binary error so reported sums such as
/// 300 + 0.65 + 5.63 + 0.26 print as written.
fn tidy(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn third_channel(a: u8, b: u8) -> u8 {
    (1..=14).find(|c| *c != a && *c != b).expect("14 channels")
}

/// How frames reach the station, decided per chain position.
struct Plan {
    /// Positions after which the AP transforms the chain.
    ap_switches: Vec<usize>,
    /// Switches the station records, with its new channel.
    sta_switches: Vec<(usize, u8)>,
    /// Channel the AP advertises in its last frame.
    ap_final_channel: u8,
    /// Channel advertised to the station in the last frame.
    advertised_final: u8,
    /// First chain index delivered through the adversary.
    relay_from: Option<usize>,
    /// Replace every slice with random bits.
    forge: bool,
    /// Replay an earlier session's chain.
    replay: bool,
    /// Adversary frames are forwarded AP frames and pay the relay delay.
    relayed: bool,
}

fn plan(cfg: &ScenarioConfig) -> Plan {
    let (a, y) = (cfg.ap_channel, cfg.switch_channel);
    let z = third_channel(a, y);
    let mut p = Plan {
        ap_switches: vec![],
        sta_switches: vec![],
        ap_final_channel: a,
        advertised_final: a,
        relay_from: None,
        forge: false,
        replay: false,
        relayed: true,
    };
    if let Some(s) = cfg.switch_after {
        p.ap_switches.push(s);
        p.sta_switches.push((s, y));
        p.ap_final_channel = y;
        p.advertised_final = y;
    }
    let Some(adv) = &cfg.adversary else {
        return p;
    };
    let at = adv.switch_after;
    match adv.action {
        AdversaryAction::FakeCsaToSta => {
            p.sta_switches = vec![(at, y)];
            p.relay_from = Some(at + 1);
        }
        AdversaryAction::JamAndForceApSwitch => {
            p.ap_switches = vec![at];
            p.ap_final_channel = z;
            p.advertised_final = z;
            p.relay_from = Some(at + 1);
        }
        AdversaryAction::DualChannelCsaMitm => {
            p.ap_switches = vec![at];
            p.sta_switches = vec![(at, y)];
            p.ap_final_channel = z;
            // the man in the middle rewrites the element to the station's channel
            p.advertised_final = y;
            p.relay_from = Some(at + 1);
        }
        AdversaryAction::SpoofElementKeepPreamble => p.relay_from = Some(1),
        AdversaryAction::SpoofPreambleBits => {
            p.relay_from = Some(1);
            p.forge = true;
            p.relayed = false;
        }
        AdversaryAction::ReplaySliceChain => {
            p.relay_from = Some(1);
            p.replay = true;
            p.relayed = false;
        }
    }
    p
}

struct Session {
    ap: ApIdentity,
    key: KeyMaterial,
    msg: crate::sigchain::SignMessage,
    seq: u16,
}

fn session(rng: &mut ChaCha8Rng, utc: u64) -> Session {
    let mut mac = [0u8; 6];
    rng.fill(&mut mac[..]);
    mac[0] = (mac[0] | 0x02) & 0xFE;
    let mut seed = [0u8; 32];
    let mut ptk = [0u8; 32];
    let mut pmk = [0u8; 32];
    rng.fill(&mut seed[..]);
    rng.fill(&mut ptk[..]);
    rng.fill(&mut pmk[..]);
    let key = KeyMaterial::generate(&KeyedTagScheme, &seed, &ptk, &pmk).expect("32-byte ptk");
    let ap = ApIdentity::new(MacAddr(mac));
    let msg = build_message(&ap, utc);
    Session {
        ap,
        key,
        msg,
        seq: rng.random(),
    }
}

pub fn ce_run(cfg: &ScenarioConfig) -> Result<CeReport, ConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.effective_frames();
    let width = SIGNATURE_BITS.div_ceil(n);
    let spec = CodecSpec::new(cfg.codec, width).map_err(|e| ConfigError::Invalid {
        field: "codec".into(),
        message: e.to_string(),
    })?;
    spec.check_budget(n).map_err(|e| ConfigError::Invalid {
        field: "codec".into(),
        message: e.to_string(),
    })?;
    let plan = plan(cfg);

    let live = session(&mut rng, cfg.utc_seconds);
    let station_key = live.key.public_view();
    let wire = build_wire(&live, &plan, cfg, n, width, &mut rng);

    let mut timing: TimingParams = cfg.timing.clone();
    let t_alter = match &cfg.adversary {
        Some(a) => {
            timing.d_a1_m = a.d_a1_m.unwrap_or(timing.d_a1_m);
            timing.d_a2_m = a.d_a2_m.unwrap_or(timing.d_a2_m);
            match a.action {
                AdversaryAction::SpoofElementKeepPreamble => a.t_alter_ms,
                _ => 0.0,
            }
        }
        None => 0.0,
    };
    timing.t_alter_ms = t_alter;
    let channel_p = cfg
        .channel
        .snr_db
        .map(|snr| flip_probability(&ChannelModel::new(cfg.channel.kind, snr).expect("validated")));

    let mut ctx = ChainContext::new(cfg.ap_channel, live.seq);
    let mut sta = StaState::Disconnected;
    let mut frames = Vec::new();
    let mut received = wire.clone();
    let mut tainted = false;
    let mut reason = None;

    'chain: for i in 1..=n {
        let via_adversary = plan.relay_from.is_some_and(|r| i >= r);
        let mut attempt = 0;
        loop {
            attempt += 1;
            // the first frame has no predecessor to time against
            let gap_ms = if i == 1 {
                0.0
            } else if via_adversary && plan.relayed {
                timing.draw_relayed(&mut rng)
            } else {
                timing.draw_benign(&mut rng)
            };
            let within = gap_ms < timing.t_in_ms;
            let limit_ok = ctx.limit_ok();
            let mut log = FrameLog {
                index: i,
                attempt,
                channel: ctx.channel,
                gap_ms: tidy(gap_ms),
                within_t_in: within,
                via_adversary,
                slice_status: SliceStatus::Late,
            };
            if !within {
                frames.push(log);
                let obs = Observation {
                    limit_ok,
                    ..Default::default()
                };
                sta = sta_step(sta, &obs);
                if sta == StaState::Disconnected || enforce_limit(&mut ctx).is_err() {
                    reason = Some(RejectReason::TimeBoundViolation);
                    break 'chain;
                }
                continue;
            }
            let word = spec
                .encode(&wire.slices[i - 1].bits)
                .expect("slice width matches codec");
            let noisy = match channel_p {
                Some(p) => flip_bits(&word, p, &mut rng),
                None => word,
            };
            let (data, status) = spec.decode(&noisy).expect("code width matches codec");
            received.slices[i - 1].bits = data;
            log.slice_status = status.into();
            frames.push(log);
            tainted |= via_adversary;
            if i < n {
                sta = sta_step(
                    sta,
                    &Observation {
                        c_as1: i == 1,
                        within_t_in: true,
                        limit_ok,
                        ch_ok: true,
                        seq_ok: true,
                        slice_ok: true,
                        ..Default::default()
                    },
                );
            }
            break;
        }
        for &(after, ch) in plan.sta_switches.iter().filter(|(after, _)| *after == i) {
            ctx.record_switch(after, ch, n)
                .expect("validated switch position");
        }
    }

    if reason.is_none() {
        let rc = ReceivedChain {
            slices: received,
            advertised_channel: plan.advertised_final,
            eapol3_seq: wire_seq(&plan, &live),
        };
        let outcome =
            reassemble_and_verify(&rc, &live.key.public_key, &ctx, &station_key, &live.msg)
                .expect("chain structure is intact");
        let failure = match outcome {
            VerifyOutcome::Success => None,
            VerifyOutcome::Failure(r) => Some(r),
        };
        let obs = Observation {
            c_as_n: true,
            c_sa_n: failure.is_none(),
            within_t_in: true,
            limit_ok: ctx.limit_ok(),
            ch_ok: failure != Some(FailureReason::Channel),
            seq_ok: failure != Some(FailureReason::Sequence),
            slice_ok: !matches!(
                failure,
                Some(FailureReason::Padding | FailureReason::Signature)
            ),
            ..Default::default()
        };
        sta = sta_step(sta, &obs);
        ctx.settle_switches(failure.is_none());
        reason = failure.map(RejectReason::from);
    }

    let costs = &cfg.costs;
    let base = if costs.base_ce_sd_ms > 0.0 {
        let mut base_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        base_rng.set_stream(1);
        Normal::new(costs.base_ce_ms, costs.base_ce_sd_ms)
            .expect("validated")
            .sample(&mut base_rng)
            .max(0.0)
    } else {
        costs.base_ce_ms
    };
    let base = tidy(base);
    let t_extract = tidy(costs.extract_per_slice_ms * n as f64);
    let t_ce = tidy(base + costs.sign_ms + costs.verify_ms + t_extract);
    let overhead = if base > 0.0 {
        tidy((t_ce - base) / base * 100.0)
    } else {
        0.0
    };

    let connected = sta == StaState::Connected;
    Ok(CeReport {
        outcome: if connected {
            Outcome::Connected
        } else {
            Outcome::Rejected
        },
        reason: if connected {
            None
        } else {
            reason.or(Some(RejectReason::TimeBoundViolation))
        },
        compromised: connected && tainted,
        sta_state: sta,
        adversary: cfg.adversary.as_ref().map(|a| a.action),
        n_frames: n,
        slice_width: width,
        codec: cfg.codec,
        code_width: spec.code_width,
        base_ce_ms: base,
        t_extract_ms: t_extract,
        t_ce_ms: t_ce,
        overhead_percent: overhead,
        frames,
    })
}

fn wire_seq(plan: &Plan, live: &Session) -> u16 {
    if plan.replay {
        live.seq.wrapping_sub(1)
    } else {
        live.seq
    }
}

/// What the station receives before channel noise.
fn build_wire(
    live: &Session,
    plan: &Plan,
    cfg: &ScenarioConfig,
    n: usize,
    width: usize,
    rng: &mut ChaCha8Rng,
) -> SliceSet {
    if plan.replay {
        // an earlier session of the same AP: older timestamp, older sequence number
        let old = Session {
            ap: live.ap.clone(),
            key: live.key.clone(),
            msg: build_message(&live.ap, cfg.utc_seconds.saturating_sub(3600)),
            seq: live.seq.wrapping_sub(1),
        };
        return signed_chain(&old, cfg.ap_channel, &[], n, width);
    }
    let mut wire = signed_chain(live, plan.ap_final_channel, &plan.ap_switches, n, width);
    if plan.forge {
        for s in &mut wire.slices {
            s.bits = Bits::random(rng, width);
        }
    }
    wire
}

fn signed_chain(s: &Session, channel: u8, switches: &[usize], n: usize, width: usize) -> SliceSet {
    let sig = sign(&s.msg, &s.key).expect("AP holds its private key");
    let raw = slice_with_width(sig.bits(), n, width).expect("width covers the signature");
    embed_chain(&raw, (channel, s.seq), &s.key, switches).expect("validated switch positions")
}

/// Wall-clock cost of this build's own sign and verify, averaged over
/// `iterations`. Informational only; reports use the configured constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CryptoTimings {
    pub scheme: &'static str,
    pub iterations: u32,
    pub sign_ms: f64,
    pub verify_ms: f64,
}

pub fn crypto_timings(iterations: u32) -> CryptoTimings {
    let iterations = iterations.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let s = session(&mut rng, 1_700_000_000);
    let start = Instant::now();
    let mut sig = sign(&s.msg, &s.key).expect("AP holds its private key");
    for _ in 1..iterations {
        sig = sign(&s.msg, &s.key).expect("AP holds its private key");
    }
    let sign_ms = start.elapsed().as_secs_f64() * 1e3 / iterations as f64;
    let start = Instant::now();
    for _ in 0..iterations {
        assert!(verify_sig(&s.msg, sig.bits(), &s.key.public_key).expect("160-bit tag"));
    }
    let verify_ms = start.elapsed().as_secs_f64() * 1e3 / iterations as f64;
    CryptoTimings {
        scheme: KeyedTagScheme.name(),
        iterations,
        sign_ms,
        verify_ms,
    }
}
