//! Bit-level channel for preamble-embedded bits and Monte Carlo BER / SR
//! sweeps over it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::codec::{CodecError, CodecKind, CodecSpec};
use crate::numfmt::sig6;
use crate::sigchain::{slice_signature, width_for_frames, SigchainError, SIGNATURE_BITS};

/// User-defined bits one preamble can carry.
pub const PREAMBLE_CAPACITY_BITS: usize = 20;

pub const SWEEP_CSV_HEADER: &str = "snr_db,coded,ber,sr,trials";

#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("snr_db must be finite, got {0}")]
    NonFiniteSnr(f64),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Sigchain(#[from] SigchainError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    #[default]
    Awgn,
    Rayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    pub snr_db: f64,
}

impl ChannelModel {
    pub fn new(kind: ChannelKind, snr_db: f64) -> Result<Self, PhyError> {
        if !snr_db.is_finite() {
            return Err(PhyError::NonFiniteSnr(snr_db));
        }
        Ok(ChannelModel { kind, snr_db })
    }

    pub fn capacity_bits_per_preamble(&self) -> usize {
        PREAMBLE_CAPACITY_BITS
    }
}

/// Gaussian tail `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Per-bit flip probability: `Q(sqrt(g))` for AWGN and
/// `(1 - sqrt(g / (2 + g))) / 2` for Rayleigh, with `g = 10^(snr_db / 10)`.
pub fn flip_probability(model: &ChannelModel) -> f64 {
    let g = 10f64.powf(model.snr_db / 10.0);
    let p = match model.kind {
        ChannelKind::Awgn => q_function(g.sqrt()),
        ChannelKind::Rayleigh => 0.5 * (1.0 - (g / (2.0 + g)).sqrt()),
    };
    p.clamp(0.0, 1.0)
}

/// Flips each bit independently with probability `p`.
pub fn flip_bits<R: Rng + ?Sized>(bits: &Bits, p: f64, rng: &mut R) -> Bits {
    let p = p.clamp(0.0, 1.0);
    bits.iter().map(|b| b ^ rng.random_bool(p)).collect()
}

pub fn transmit_bits(bits: &Bits, model: &ChannelModel, rng_seed: u64) -> Bits {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    flip_bits(bits, flip_probability(model), &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub coded: bool,
    pub ber: f64,
    pub sr: f64,
    /// Signatures sent per frame count.
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                sig6(r.snr_db),
                r.coded,
                sig6(r.ber),
                sig6(r.sr),
                r.trials
            ));
        }
        out
    }

    pub fn row(&self, snr_db: f64, coded: bool) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.coded == coded)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub channel: ChannelKind,
    pub snrs_db: Vec<f64>,
    /// `None` averages over 13, 14 and 15 frames.
    pub n_frames: Option<usize>,
    pub codecs: Vec<CodecKind>,
    pub trials: u64,
}

/// Errors and exact-signature successes for one `(snr, codec, N)` cell.
fn run_cell(
    p: f64,
    kind: CodecKind,
    n_frames: usize,
    trials: u64,
    rng: &mut ChaCha8Rng,
) -> Result<(u64, u64, u64), PhyError> {
    let width = width_for_frames(n_frames)?;
    let spec = CodecSpec::new(kind, width)?;
    spec.check_budget(n_frames)?;
    let (mut bit_errors, mut bits_total, mut successes) = (0u64, 0u64, 0u64);
    for _ in 0..trials {
        let sig = Bits::random(rng, SIGNATURE_BITS);
        let sent = slice_signature(&sig, n_frames)?;
        let mut errors = 0u64;
        for s in &sent.slices {
            let word = spec.encode(&s.bits)?;
            let received = flip_bits(&word, p, rng);
            let (data, _) = spec.decode(&received)?;
            errors += data.hamming_distance(&s.bits) as u64;
        }
        bit_errors += errors;
        bits_total += (n_frames * width) as u64;
        successes += (errors == 0) as u64;
    }
    Ok((bit_errors, bits_total, successes))
}

/// One row per `(snr, codec)` in input order. Each row draws from its own
/// ChaCha stream so rows can be computed in parallel and still reproduce.
pub fn ber_sr_sweep(params: &SweepParams, rng_seed: u64) -> Result<SweepResult, PhyError> {
    if params.trials == 0 {
        return Err(PhyError::NoTrials);
    }
    let frame_counts = match params.n_frames {
        Some(n) => {
            width_for_frames(n)?;
            vec![n]
        }
        None => vec![13, 14, 15],
    };
    let cells: Vec<(f64, CodecKind)> = params
        .snrs_db
        .iter()
        .flat_map(|&s| params.codecs.iter().map(move |&c| (s, c)))
        .collect();
    let rows = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(snr_db, kind))| {
            let model = ChannelModel::new(params.channel, snr_db)?;
            let p = flip_probability(&model);
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(i as u64);
            let (mut errs, mut total, mut ok) = (0, 0, 0);
            for &n in &frame_counts {
                let (e, t, s) = run_cell(p, kind, n, params.trials, &mut rng)?;
                errs += e;
                total += t;
                ok += s;
            }
            Ok(SweepRow {
                snr_db,
                coded: kind.is_coded(),
                ber: errs as f64 / total as f64,
                sr: ok as f64 / (params.trials * frame_counts.len() as u64) as f64,
                trials: params.trials,
            })
        })
        .collect::<Result<Vec<_>, PhyError>>()?;
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn awgn(snr: f64) -> ChannelModel {
        ChannelModel::new(ChannelKind::Awgn, snr).unwrap()
    }

    #[test]
    fn awgn_anchor_points() {
        for (snr, expected) in [(0.0, 0.1587), (3.0, 0.0789), (6.0, 0.0230)] {
            let p = flip_probability(&awgn(snr));
            assert!((p - expected).abs() < 1e-4, "{snr} dB: {p}");
        }
        assert!(flip_probability(&awgn(60.0)) < 1e-300);
    }

    #[test]
    fn rayleigh_is_worse_than_awgn() {
        for snr in [0.0, 6.0, 12.0] {
            let r = flip_probability(&ChannelModel::new(ChannelKind::Rayleigh, snr).unwrap());
            assert!(r > flip_probability(&awgn(snr)));
        }
        // g = 1: (1 - sqrt(1/3)) / 2
        let r = flip_probability(&ChannelModel::new(ChannelKind::Rayleigh, 0.0).unwrap());
        assert!((r - 0.5 * (1.0 - (1.0f64 / 3.0).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn non_finite_snr_rejected() {
        assert!(ChannelModel::new(ChannelKind::Awgn, f64::NAN).is_err());
        assert!(ChannelModel::new(ChannelKind::Awgn, f64::INFINITY).is_err());
    }

    #[test]
    fn extreme_flip_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Bits::random(&mut rng, 500);
        assert_eq!(flip_bits(&x, 0.0, &mut rng), x);
        let inv: Bits = x.iter().map(|b| !b).collect();
        assert_eq!(flip_bits(&x, 1.0, &mut rng), inv);
    }

    #[test]
    fn empirical_flip_rate_within_three_sigma() {
        let model = awgn(3.0);
        let p = flip_probability(&model);
        let n = 1_000_000;
        let rx = transmit_bits(&Bits::zeros(n), &model, 42);
        let rate = rx.count_ones() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((rate - p).abs() < 3.0 * se, "{rate} vs {p}");
    }

    #[test]
    fn transmit_is_deterministic() {
        let m = awgn(0.0);
        let x = Bits::ones(300);
        assert_eq!(transmit_bits(&x, &m, 9), transmit_bits(&x, &m, 9));
        assert_ne!(transmit_bits(&x, &m, 9), transmit_bits(&x, &m, 10));
    }

    fn params(snrs: Vec<f64>, n: Option<usize>, trials: u64) -> SweepParams {
        SweepParams {
            channel: ChannelKind::Awgn,
            snrs_db: snrs,
            n_frames: n,
            codecs: vec![CodecKind::Identity, CodecKind::HammingSecded],
            trials,
        }
    }

    #[test]
    fn sweep_row_order_and_csv() {
        let r = ber_sr_sweep(&params(vec![6.0, 0.0], Some(13), 20), 3).unwrap();
        let keys: Vec<_> = r.rows.iter().map(|r| (r.snr_db, r.coded)).collect();
        assert_eq!(
            keys,
            vec![(6.0, false), (6.0, true), (0.0, false), (0.0, true)]
        );
        let csv = r.to_csv();
        assert!(csv.starts_with("snr_db,coded,ber,sr,trials\n6,false,"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn sweep_is_deterministic() {
        let p = params(vec![0.0, 3.0, 9.0], None, 50);
        assert_eq!(ber_sr_sweep(&p, 8).unwrap(), ber_sr_sweep(&p, 8).unwrap());
    }

    #[test]
    fn sweep_validation() {
        assert_eq!(
            ber_sr_sweep(&params(vec![0.0], None, 0), 1),
            Err(PhyError::NoTrials)
        );
        assert!(ber_sr_sweep(&params(vec![0.0], Some(12), 5), 1).is_err());
    }

    #[test]
    fn noiseless_sweep_is_perfect() {
        let r = ber_sr_sweep(&params(vec![40.0], None, 30), 1).unwrap();
        assert!(r.rows.iter().all(|r| r.ber == 0.0 && r.sr == 1.0));
    }

    #[test]
    fn uncoded_sr_matches_independence_oracle() {
        let trials = 4000;
        let r = ber_sr_sweep(&params(vec![6.0, 9.0], Some(14), trials), 77).unwrap();
        for row in r.rows.iter().filter(|r| !r.coded) {
            let p = flip_probability(&awgn(row.snr_db));
            let expected = (1.0 - p).powi(14 * 12);
            let se = (expected * (1.0 - expected) / trials as f64).sqrt();
            assert!(
                (row.sr - expected).abs() <= 3.0 * se + 1e-9,
                "{row:?} vs {expected}"
            );
        }
    }

    /// Probability that a codeword's data bits survive, by enumerating
    /// every error pattern. Decoding is syndrome-based, so the all-zero
    /// codeword stands for all of them.
    fn exact_word_survival(spec: &CodecSpec, p: f64) -> f64 {
        let n = spec.code_width;
        (0u64..1 << n)
            .map(|e| {
                let pattern = Bits::from_u64(e, n);
                let (data, _) = spec.decode(&pattern).unwrap();
                if data.count_ones() == 0 {
                    let w = pattern.count_ones() as i32;
                    p.powi(w) * (1.0 - p).powi(n as i32 - w)
                } else {
                    0.0
                }
            })
            .sum()
    }

    #[test]
    fn coded_sr_matches_per_codeword_oracle() {
        let trials = 4000;
        let spec = CodecSpec::hamming_secded(11).unwrap();
        let r = ber_sr_sweep(&params(vec![3.0, 6.0], Some(15), trials), 78).unwrap();
        for row in r.rows.iter().filter(|r| r.coded) {
            let p = flip_probability(&awgn(row.snr_db));
            let n = 16;
            let at_most_one = ((1.0 - p).powi(n) + n as f64 * p * (1.0 - p).powi(n - 1)).powi(15);
            let exact = exact_word_survival(&spec, p).powi(15);
            // double errors confined to parity bits leave the data intact
            assert!(exact >= at_most_one);
            let se = (exact * (1.0 - exact) / trials as f64).sqrt();
            assert!(
                (row.sr - exact).abs() <= 3.0 * se + 1e-9,
                "{row:?} vs {exact}"
            );
            assert!(row.sr >= at_most_one - 3.0 * se, "{row:?} vs {at_most_one}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn flip_probability_is_monotone(a in -10.0f64..30.0, d in 0.0f64..10.0) {
            for kind in [ChannelKind::Awgn, ChannelKind::Rayleigh] {
                let lo = flip_probability(&ChannelModel::new(kind, a).unwrap());
                let hi = flip_probability(&ChannelModel::new(kind, a + d).unwrap());
                prop_assert!(hi <= lo);
                prop_assert!((0.0..=0.5).contains(&lo));
            }
        }
    }
}
