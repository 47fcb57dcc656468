//! Synthetic SIG-field corpus for five APs.

#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FrameClass, PcaError, SigRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub n_aps: usize,
    pub ce_frames_per_ap: usize,
    pub other_frames_per_ap: usize,
    /// Relative jitter on frame length.
    pub length_jitter: f64,
    /// Absolute jitter on duration, µs.
    pub duration_jitter_us: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_aps: 5,
            ce_frames_per_ap: 40,
            other_frames_per_ap: 40,
            length_jitter: 0.01,
            duration_jitter_us: 1.0,
        }
    }
}

const CE_RATES: [f64; 5] = [6.0, 9.0, 12.0, 18.0, 24.0];
const PREAMBLE_US: f64 = 20.0;

/// Each AP sends its CE frames at a fixed rate with a per-AP length, and
/// beacons / acks at basic rates with class-typical lengths. Durations are
/// `preamble + 8 * length / rate` plus jitter.
pub fn synthetic_corpus(params: &SynthParams, seed: u64) -> Result<Vec<SigRecord>, PcaError> {
    if params.n_aps == 0 || params.n_aps > CE_RATES.len() {
        return Err(PcaError::Csv(format!(
            "n_aps must be in 1..={}",
            CE_RATES.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dur_noise = Normal::new(0.0, params.duration_jitter_us.max(0.0)).expect("finite sd");
    let frame = |rng: &mut ChaCha8Rng, rate: f64, length: f64, ap: usize, class: FrameClass| {
        let length = (length * (1.0 + params.length_jitter * rng.random_range(-1.0..1.0)))
            .round()
            .max(1.0);
        let duration = (PREAMBLE_US + 8.0 * length / rate + dur_noise.sample(rng)).max(1.0);
        SigRecord {
            rate_mbps: rate,
            length_bytes: length,
            duration_us: duration,
            ap: Some(format!("ap{}", ap + 1)),
            frame_class: Some(class),
        }
    };
    let mut out = Vec::new();
    for ap in 0..params.n_aps {
        for _ in 0..params.ce_frames_per_ap {
            out.push(frame(
                &mut rng,
                CE_RATES[ap],
                120.0 + 60.0 * ap as f64,
                ap,
                FrameClass::Ce,
            ));
        }
        for i in 0..params.other_frames_per_ap {
            let (rate, length, class) = match i % 3 {
                0 => (1.0, 300.0, FrameClass::Beacon),
                1 => (2.0, 14.0, FrameClass::Ack),
                _ => (1.0, 60.0, FrameClass::Other),
            };
            out.push(frame(&mut rng, rate, length, ap, class));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let p = SynthParams::default();
        let a = synthetic_corpus(&p, 1).unwrap();
        assert_eq!(a.len(), 5 * 80);
        assert_eq!(a, synthetic_corpus(&p, 1).unwrap());
        assert_ne!(a, synthetic_corpus(&p, 2).unwrap());
        assert!(a
            .iter()
            .all(|r| r.rate_mbps > 0.0 && r.length_bytes > 0.0 && r.duration_us > 0.0));
    }
}
