//! Inter-frame timing: benign vs relayed duration models, relay detectors,
//! and the per-frame `t_in` check.

mod detector;
mod metrics;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detector::{train_detector, Detector, DetectorKind, ForestParams, RandomForest};
pub use metrics::{evaluate_detector, Confusion, DetectionMetrics};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;
pub const T_OTHER_MIN_MS: f64 = 0.045;
pub const T_OTHER_MAX_MS: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum TimingError {
    #[error("invalid jitter distribution: {0}")]
    Distribution(String),
    #[error("relay path {relay_m} m is shorter than the direct path {direct_m} m")]
    Geometry { relay_m: f64, direct_m: f64 },
    #[error("invalid parameter {field}: {value}")]
    Param { field: &'static str, value: f64 },
    #[error("count must be at least 1")]
    EmptyCount,
    #[error("training data needs both benign and relayed samples")]
    SingleClass,
    #[error("no samples to evaluate")]
    NoSamples,
    #[error("sample csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Benign,
    Relayed,
}

/// Normal(mean, sd) truncated to `[lo, hi]`, then shifted by `offset_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterDist {
    pub mean_ms: f64,
    pub sd_ms: f64,
    pub lo_ms: f64,
    pub hi_ms: f64,
    pub offset_ms: f64,
}

impl Default for JitterDist {
    fn default() -> Self {
        JitterDist {
            mean_ms: 18.66,
            sd_ms: 2.0,
            lo_ms: T_OTHER_MIN_MS,
            hi_ms: T_OTHER_MAX_MS,
            offset_ms: 0.0,
        }
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl JitterDist {
    pub fn validate(&self) -> Result<(), TimingError> {
        let bad = |m: &str| Err(TimingError::Distribution(m.into()));
        let all = [
            self.mean_ms,
            self.sd_ms,
            self.lo_ms,
            self.hi_ms,
            self.offset_ms,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("parameters must be finite");
        }
        if self.sd_ms < 0.0 {
            return bad("sd_ms must be non-negative");
        }
        if self.lo_ms > self.hi_ms {
            return bad("lo_ms exceeds hi_ms");
        }
        if self.sd_ms > 0.0 && self.mass() < 1e-9 {
            return bad("almost no probability mass inside [lo_ms, hi_ms]");
        }
        Ok(())
    }

    /// Probability mass of the untruncated normal inside the bounds.
    fn mass(&self) -> f64 {
        let a = (self.lo_ms - self.mean_ms) / self.sd_ms;
        let b = (self.hi_ms - self.mean_ms) / self.sd_ms;
        std_normal_cdf(b) - std_normal_cdf(a)
    }

    /// Analytic mean of the draw, offset included.
    pub fn mean(&self) -> f64 {
        if self.sd_ms == 0.0 {
            return self.mean_ms.clamp(self.lo_ms, self.hi_ms) + self.offset_ms;
        }
        let a = (self.lo_ms - self.mean_ms) / self.sd_ms;
        let b = (self.hi_ms - self.mean_ms) / self.sd_ms;
        let z = std_normal_cdf(b) - std_normal_cdf(a);
        self.mean_ms + self.sd_ms * (std_normal_pdf(a) - std_normal_pdf(b)) / z + self.offset_ms
    }

    /// Analytic standard deviation of the draw.
    pub fn std_dev(&self) -> f64 {
        if self.sd_ms == 0.0 {
            return 0.0;
        }
        let a = (self.lo_ms - self.mean_ms) / self.sd_ms;
        let b = (self.hi_ms - self.mean_ms) / self.sd_ms;
        let z = std_normal_cdf(b) - std_normal_cdf(a);
        let (pa, pb) = (std_normal_pdf(a), std_normal_pdf(b));
        let var = 1.0 + (a * pa - b * pb) / z - ((pa - pb) / z).powi(2);
        self.sd_ms * var.max(0.0).sqrt()
    }

    /// Rejection sampling; callers must have validated the distribution.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sd_ms == 0.0 {
            return self.mean_ms.clamp(self.lo_ms, self.hi_ms) + self.offset_ms;
        }
        let normal = Normal::new(self.mean_ms, self.sd_ms).expect("validated");
        loop {
            let x = normal.sample(rng);
            if (self.lo_ms..=self.hi_ms).contains(&x) {
                return x + self.offset_ms;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingParams {
    /// AP to station distance, m.
    pub d_m: f64,
    /// AP to adversary, m.
    pub d_a1_m: f64,
    /// Adversary to station, m.
    pub d_a2_m: f64,
    pub c_mps: f64,
    pub t_other: JitterDist,
    /// Adversary-side processing, including any extra relay latency.
    pub t_other_a: JitterDist,
    pub t_alter_ms: f64,
    pub t_in_ms: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            d_m: 30.0,
            d_a1_m: 20.0,
            d_a2_m: 20.0,
            c_mps: SPEED_OF_LIGHT,
            t_other: JitterDist::default(),
            t_other_a: JitterDist {
                offset_ms: 3.0,
                ..JitterDist::default()
            },
            t_alter_ms: 0.0,
            t_in_ms: 20.1,
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<(), TimingError> {
        for (field, value) in [
            ("d_m", self.d_m),
            ("d_a1_m", self.d_a1_m),
            ("d_a2_m", self.d_a2_m),
            ("t_alter_ms", self.t_alter_ms),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(TimingError::Param { field, value });
            }
        }
        for (field, value) in [("c_mps", self.c_mps), ("t_in_ms", self.t_in_ms)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(TimingError::Param { field, value });
            }
        }
        self.t_other.validate()?;
        self.t_other_a.validate()?;
        let relay_m = self.d_a1_m + self.d_a2_m;
        if relay_m < self.d_m {
            return Err(TimingError::Geometry {
                relay_m,
                direct_m: self.d_m,
            });
        }
        Ok(())
    }

    /// One-way propagation over `metres`, in ms.
    pub fn propagation_ms(&self, metres: f64) -> f64 {
        metres / self.c_mps * 1e3
    }

    pub fn draw_benign<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.propagation_ms(self.d_m) + self.t_other.draw(rng)
    }

    pub fn draw_relayed<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.propagation_ms(self.d_a1_m + self.d_a2_m) + self.t_other_a.draw(rng) + self.t_alter_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSample {
    pub duration_ms: f64,
    pub label: Label,
    pub location_tag: Option<String>,
}

fn sample_with(
    params: &TimingParams,
    count: usize,
    rng_seed: u64,
    label: Label,
) -> Result<Vec<TimingSample>, TimingError> {
    if count == 0 {
        return Err(TimingError::EmptyCount);
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok((0..count)
        .map(|_| TimingSample {
            duration_ms: match label {
                Label::Benign => params.draw_benign(&mut rng),
                Label::Relayed => params.draw_relayed(&mut rng),
            },
            label,
            location_tag: None,
        })
        .collect())
}

/// `d / c + t_other`.
pub fn sample_benign(
    params: &TimingParams,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<TimingSample>, TimingError> {
    sample_with(params, count, rng_seed, Label::Benign)
}

/// `(d_a1 + d_a2) / c + t_other_a + t_alter`.
pub fn sample_relayed(
    params: &TimingParams,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<TimingSample>, TimingError> {
    sample_with(params, count, rng_seed, Label::Relayed)
}

/// Benign and relayed samples for one location, shuffled together.
pub fn labeled_dataset(
    params: &TimingParams,
    per_class: usize,
    location: Option<&str>,
    rng_seed: u64,
) -> Result<Vec<TimingSample>, TimingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = sample_benign(params, per_class, rng.random())?;
    out.extend(sample_relayed(params, per_class, rng.random())?);
    for s in &mut out {
        s.location_tag = location.map(str::to_string);
    }
    out.shuffle(&mut rng);
    Ok(out)
}

/// Shuffles and splits into `(train, test)`.
pub fn train_test_split(
    samples: &[TimingSample],
    test_fraction: f64,
    rng_seed: u64,
) -> (Vec<TimingSample>, Vec<TimingSample>) {
    let mut all = samples.to_vec();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
    let n_test = ((all.len() as f64) * test_fraction.clamp(0.0, 1.0)).round() as usize;
    let train = all.split_off(n_test);
    (train, all)
}

/// Pass iff `gap < t_in`.
pub fn check_inter_frame(gaps_ms: &[f64], t_in_ms: f64) -> Vec<bool> {
    gaps_ms.iter().map(|&g| g < t_in_ms).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    duration_ms: f64,
    label: Label,
    location: Option<String>,
}

pub const SAMPLE_CSV_HEADER: &str = "duration_ms,label,location";

pub fn samples_to_csv(samples: &[TimingSample]) -> String {
    let mut out = format!("{SAMPLE_CSV_HEADER}\n");
    for s in samples {
        let label = match s.label {
            Label::Benign => "benign",
            Label::Relayed => "relayed",
        };
        out.push_str(&format!(
            "{},{label},{}\n",
            crate::numfmt::sig6(s.duration_ms),
            s.location_tag.as_deref().unwrap_or("")
        ));
    }
    out
}

pub fn samples_from_csv<R: std::io::Read>(reader: R) -> Result<Vec<TimingSample>, TimingError> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(|e| TimingError::Csv(e.to_string()))?;
            if !(row.duration_ms.is_finite() && row.duration_ms > 0.0) {
                return Err(TimingError::Csv(format!(
                    "bad duration {}",
                    row.duration_ms
                )));
            }
            Ok(TimingSample {
                duration_ms: row.duration_ms,
                label: row.label,
                location_tag: row.location.filter(|l| !l.is_empty()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(xs: &[TimingSample]) -> f64 {
        xs.iter().map(|s| s.duration_ms).sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn degenerate_jitter() {
        let p = TimingParams {
            t_other: JitterDist {
                mean_ms: 18.0,
                sd_ms: 0.0,
                ..Default::default()
            },
            ..Default::default()
        };
        for s in sample_benign(&p, 50, 1).unwrap() {
            assert!((s.duration_ms - 18.0001).abs() < 1e-6, "{}", s.duration_ms);
        }
    }

    #[test]
    fn samples_stay_in_range() {
        let p = TimingParams {
            t_other: JitterDist {
                mean_ms: 10.0,
                sd_ms: 8.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let d = p.propagation_ms(p.d_m);
        for s in sample_benign(&p, 20_000, 2).unwrap() {
            assert!((T_OTHER_MIN_MS + d..=T_OTHER_MAX_MS + d).contains(&s.duration_ms));
        }
    }

    #[test]
    fn sample_mean_matches_truncated_normal_mean() {
        let p = TimingParams::default();
        let n = 10_000;
        let xs = sample_benign(&p, n, 3).unwrap();
        let expected = p.propagation_ms(p.d_m) + p.t_other.mean();
        // the truncation at 20 ms pulls the mean well below 18.66
        assert!((expected - 17.81).abs() < 0.01, "{expected}");
        let se = p.t_other.std_dev() / (n as f64).sqrt();
        assert!(
            (mean(&xs) - expected).abs() < 3.0 * se,
            "{} vs {expected}",
            mean(&xs)
        );
    }

    #[test]
    fn truncated_moments_match_quadrature() {
        let d = JitterDist::default();
        // midpoint rule over the truncated density
        let steps = 200_000;
        let h = (d.hi_ms - d.lo_ms) / steps as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..steps {
            let x = d.lo_ms + (i as f64 + 0.5) * h;
            let w = (-0.5 * ((x - d.mean_ms) / d.sd_ms).powi(2)).exp() * h;
            z += w;
            m1 += w * x;
            m2 += w * x * x;
        }
        let mean = m1 / z;
        let sd = (m2 / z - mean * mean).sqrt();
        assert!((d.mean() - mean).abs() < 1e-6);
        assert!((d.std_dev() - sd).abs() < 1e-6);
    }

    #[test]
    fn relay_geometry_enforced() {
        let p = TimingParams {
            d_m: 50.0,
            d_a1_m: 10.0,
            d_a2_m: 20.0,
            ..Default::default()
        };
        assert!(matches!(
            sample_relayed(&p, 1, 0),
            Err(TimingError::Geometry { .. })
        ));
    }

    #[test]
    fn invalid_inputs() {
        let p = TimingParams::default();
        assert_eq!(sample_benign(&p, 0, 0), Err(TimingError::EmptyCount));
        let mut bad = p.clone();
        bad.t_other.sd_ms = -1.0;
        assert!(sample_benign(&bad, 1, 0).is_err());
        bad = p.clone();
        bad.t_other.mean_ms = 500.0;
        assert!(sample_benign(&bad, 1, 0).is_err());
        bad = p;
        bad.t_alter_ms = -1.0;
        assert!(sample_relayed(&bad, 1, 0).is_err());
    }

    #[test]
    fn alteration_shifts_relayed_mean() {
        let p = TimingParams {
            t_other_a: JitterDist::default(),
            t_alter_ms: 5.0,
            ..Default::default()
        };
        let n = 10_000;
        let b = mean(&sample_benign(&p, n, 4).unwrap());
        let r = mean(&sample_relayed(&p, n, 5).unwrap());
        let se = p.t_other.std_dev() * (2.0 / n as f64).sqrt();
        assert!(r - b > 5.0 - 3.0 * se, "{r} vs {b}");
    }

    #[test]
    fn relayed_dominates_with_equal_processing() {
        let p = TimingParams {
            t_other_a: JitterDist::default(),
            t_alter_ms: 0.2,
            ..Default::default()
        };
        let n = 10_000;
        let b = mean(&sample_benign(&p, n, 6).unwrap());
        let r = mean(&sample_relayed(&p, n, 7).unwrap());
        let se = p.t_other.std_dev() * (2.0 / n as f64).sqrt();
        assert!(r - b > 0.2 - 3.0 * se, "{r} vs {b}");
    }

    #[test]
    fn inter_frame_boundary_is_strict() {
        assert_eq!(
            check_inter_frame(&[18.0, 20.0, 19.999], 20.0),
            vec![true, false, true]
        );
    }

    #[test]
    fn default_benign_frames_pass_t_in() {
        let p = TimingParams::default();
        let xs: Vec<f64> = sample_benign(&p, 10_000, 8)
            .unwrap()
            .iter()
            .map(|s| s.duration_ms)
            .collect();
        let pass = check_inter_frame(&xs, p.t_in_ms)
            .iter()
            .filter(|&&b| b)
            .count();
        assert_eq!(pass, xs.len());
        let four_sigma = p.t_other.mean() + 4.0 * p.t_other.std_dev();
        let pass = check_inter_frame(&xs, four_sigma)
            .iter()
            .filter(|&&b| b)
            .count();
        assert!(pass as f64 >= 0.99 * xs.len() as f64);
    }

    #[test]
    fn csv_round_trip() {
        let mut xs = labeled_dataset(&TimingParams::default(), 5, Some("D1"), 9).unwrap();
        xs[0].location_tag = None;
        let csv = samples_to_csv(&xs);
        assert!(csv.starts_with("duration_ms,label,location\n"));
        let back = samples_from_csv(csv.as_bytes()).unwrap();
        assert_eq!(back.len(), xs.len());
        for (a, b) in xs.iter().zip(&back) {
            assert_eq!((a.label, &a.location_tag), (b.label, &b.location_tag));
            assert!((a.duration_ms - b.duration_ms).abs() < 1e-4);
        }
        assert!(samples_from_csv("duration_ms,label,location\n-1,benign,\n".as_bytes()).is_err());
    }

    #[test]
    fn split_sizes() {
        let xs = labeled_dataset(&TimingParams::default(), 50, None, 1).unwrap();
        let (train, test) = train_test_split(&xs, 0.3, 2);
        assert_eq!((train.len(), test.len()), (70, 30));
    }
}
