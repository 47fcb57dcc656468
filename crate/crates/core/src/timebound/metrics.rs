use serde::{Deserialize, Serialize};

use super::{Detector, Label, TimingError, TimingSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Relayed, Label::Relayed) => self.tp += 1,
            (Label::Relayed, Label::Benign) => self.fn_ += 1,
            (Label::Benign, Label::Benign) => self.tn += 1,
            (Label::Benign, Label::Relayed) => self.fp += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Relayed is the positive class. Undefined ratios (`0 / 0`) are reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub accuracy: f64,
    #[serde(rename = "f1_score")]
    pub f1: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub ppv: f64,
    pub npv: f64,
    pub confusion: Confusion,
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl From<Confusion> for DetectionMetrics {
    fn from(c: Confusion) -> Self {
        let tpr = ratio(c.tp, c.tp + c.fn_);
        let ppv = ratio(c.tp, c.tp + c.fp);
        let f1 = if ppv + tpr > 0.0 {
            2.0 * ppv * tpr / (ppv + tpr)
        } else {
            0.0
        };
        DetectionMetrics {
            accuracy: ratio(c.tp + c.tn, c.total()),
            f1,
            tpr,
            tnr: ratio(c.tn, c.tn + c.fp),
            ppv,
            npv: ratio(c.tn, c.tn + c.fn_),
            confusion: c,
        }
    }
}

pub fn evaluate_detector(
    detector: &Detector,
    samples: &[TimingSample],
) -> Result<DetectionMetrics, TimingError> {
    if samples.is_empty() {
        return Err(TimingError::NoSamples);
    }
    let mut c = Confusion::default();
    for s in samples {
        c.record(s.label, detector.predict(s));
    }
    Ok(c.into())
}
