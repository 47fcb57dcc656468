//! Frame identification from PHY SIG-field features (rate, length,
//! duration) via PCA and nearest-centroid classification.

mod classify;
mod linalg;
mod synth;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{ConfusionMatrix, NearestCentroid};
pub use linalg::{
    covariance, principal_components, project, standardize, symmetric_eigen, EigenPair, Matrix,
    Standardizer,
};
pub use synth::{synthetic_corpus, SynthParams};

#[derive(Debug, Error, PartialEq)]
pub enum PcaError {
    #[error("empty dataset")]
    Empty,
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("expected {expected} features, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("matrix is not square")]
    NotSquare,
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("k must be in 1..={dim}, got {k}")]
    BadK { k: usize, dim: usize },
    #[error("no labelled rows to fit centroids")]
    NoLabels,
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameClass {
    Ce,
    Beacon,
    Ack,
    Other,
}

impl FrameClass {
    pub fn is_ce(self) -> bool {
        self == FrameClass::Ce
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameClass::Ce => "ce",
            FrameClass::Beacon => "beacon",
            FrameClass::Ack => "ack",
            FrameClass::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigRecord {
    pub rate_mbps: f64,
    pub length_bytes: f64,
    pub duration_us: f64,
    pub ap: Option<String>,
    pub frame_class: Option<FrameClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Rate,
    Length,
    Duration,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Rate, Feature::Length, Feature::Duration];
}

impl SigRecord {
    pub fn feature(&self, f: Feature) -> f64 {
        match f {
            Feature::Rate => self.rate_mbps,
            Feature::Length => self.length_bytes,
            Feature::Duration => self.duration_us,
        }
    }
}

pub fn feature_matrix(records: &[SigRecord], features: &[Feature]) -> Matrix {
    records
        .iter()
        .map(|r| features.iter().map(|&f| r.feature(f)).collect())
        .collect()
}

/// Standardizer plus the sorted eigenpairs of the standardized covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub features: Vec<Feature>,
    pub standardizer: Standardizer,
    /// All eigenpairs, descending.
    pub eigenpairs: Vec<EigenPair>,
    pub k: usize,
}

impl PcaModel {
    pub fn fit(records: &[SigRecord], features: &[Feature], k: usize) -> Result<Self, PcaError> {
        let x = feature_matrix(records, features);
        let (z, standardizer) = standardize(&x)?;
        let sigma = covariance(&z)?;
        if k == 0 || k > sigma.len() {
            return Err(PcaError::BadK {
                k,
                dim: sigma.len(),
            });
        }
        Ok(PcaModel {
            features: features.to_vec(),
            standardizer,
            eigenpairs: symmetric_eigen(&sigma)?,
            k,
        })
    }

    pub fn retained(&self) -> &[EigenPair] {
        &self.eigenpairs[..self.k]
    }

    /// PC scores (`n x k`) of raw records.
    pub fn scores(&self, records: &[SigRecord]) -> Result<Matrix, PcaError> {
        let z = self
            .standardizer
            .transform(&feature_matrix(records, &self.features))?;
        project(&z, self.retained())
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenpairs.iter().map(|p| p.value).sum();
        self.eigenpairs.iter().map(|p| p.value / total).collect()
    }
}

const REQUIRED: [&str; 3] = ["rate_mbps", "length_bytes", "duration_us"];
pub const SIG_CSV_HEADER: &str = "rate_mbps,length_bytes,duration_us,ap,frame_class";

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Vec<SigRecord>, PcaError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| PcaError::Csv(e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required: Vec<usize> = REQUIRED
        .iter()
        .map(|&name| col(name).ok_or_else(|| PcaError::MissingColumn(name.into())))
        .collect::<Result<_, _>>()?;
    let (ap_col, class_col) = (col("ap"), col("frame_class"));
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| PcaError::Csv(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |message: String| PcaError::Row { line, message };
        let mut nums = [0.0; 3];
        for (slot, (&i, name)) in nums.iter_mut().zip(required.iter().zip(REQUIRED)) {
            let raw = row.get(i).unwrap_or("");
            let v: f64 = raw
                .parse()
                .map_err(|_| err(format!("{name} is not a number: {raw:?}")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(err(format!("{name} must be positive, got {v}")));
            }
            *slot = v;
        }
        let text = |c: Option<usize>| c.and_then(|i| row.get(i)).filter(|s| !s.is_empty());
        let frame_class = text(class_col)
            .map(|s| {
                serde_json::from_value::<FrameClass>(serde_json::Value::String(s.to_lowercase()))
                    .map_err(|_| err(format!("unknown frame_class {s:?}")))
            })
            .transpose()?;
        out.push(SigRecord {
            rate_mbps: nums[0],
            length_bytes: nums[1],
            duration_us: nums[2],
            ap: text(ap_col).map(str::to_string),
            frame_class,
        });
    }
    Ok(out)
}

pub fn ingest_csv(path: &std::path::Path) -> Result<Vec<SigRecord>, PcaError> {
    let file =
        std::fs::File::open(path).map_err(|e| PcaError::Csv(format!("{}: {e}", path.display())))?;
    read_csv(file)
}

/// Full-precision CSV; round-trips through [`read_csv`].
pub fn write_csv(records: &[SigRecord]) -> String {
    let mut out = format!("{SIG_CSV_HEADER}\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.rate_mbps,
            r.length_bytes,
            r.duration_us,
            r.ap.as_deref().unwrap_or(""),
            r.frame_class.map_or("", FrameClass::name)
        ));
    }
    out
}

/// Results of fitting and classifying one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaReport {
    pub model: PcaModel,
    pub explained_variance_ratio: Vec<f64>,
    /// Mean PC scores of each AP's CE frames.
    pub ap_centroids: BTreeMap<String, Vec<f64>>,
    pub ap_confusion: ConfusionMatrix,
    pub ap_accuracy: f64,
    pub ce_confusion: ConfusionMatrix,
    pub ce_accuracy: f64,
}

fn ce_label(c: FrameClass) -> String {
    if c.is_ce() { "ce" } else { "non_ce" }.to_string()
}

/// Fits PCA on every record, AP centroids on CE frames, and frame-class
/// centroids on all classed frames; predicted classes are collapsed to
/// CE / non-CE.
/// Accuracies are measured on the same records (resubstitution).
pub fn analyze(
    records: &[SigRecord],
    features: &[Feature],
    k: usize,
) -> Result<PcaReport, PcaError> {
    let model = PcaModel::fit(records, features, k)?;
    let scores = model.scores(records)?;

    let (ap_scores, ap_labels): (Vec<Vec<f64>>, Vec<String>) = records
        .iter()
        .zip(&scores)
        .filter(|(r, _)| r.frame_class.is_none_or(FrameClass::is_ce))
        .filter_map(|(r, s)| r.ap.clone().map(|ap| (s.clone(), ap)))
        .unzip();
    let ap_model = NearestCentroid::fit(&ap_scores, &ap_labels)?;
    let ap_pred = ap_model.classify(&ap_scores);
    let ap_confusion = ConfusionMatrix::build(&ap_labels, &ap_pred);

    // CE frames of different APs form separate clusters, so centroids are
    // kept per (class, AP) and only collapsed to CE / non-CE afterwards.
    let (class_scores, classes): (Vec<Vec<f64>>, Vec<(FrameClass, String)>) = records
        .iter()
        .zip(&scores)
        .filter_map(|(r, s)| {
            r.frame_class
                .map(|c| (s.clone(), (c, r.ap.clone().unwrap_or_default())))
        })
        .unzip();
    let fine: Vec<String> = classes
        .iter()
        .map(|(c, ap)| format!("{}/{ap}", c.name()))
        .collect();
    let class_model = NearestCentroid::fit(&class_scores, &fine)?;
    let truth: Vec<String> = classes.iter().map(|&(c, _)| ce_label(c)).collect();
    let pred: Vec<String> = class_model
        .classify(&class_scores)
        .iter()
        .map(|name| {
            ce_label(if name.starts_with("ce/") {
                FrameClass::Ce
            } else {
                FrameClass::Other
            })
        })
        .collect();
    let ce_confusion = ConfusionMatrix::build(&truth, &pred);

    Ok(PcaReport {
        explained_variance_ratio: model.explained_variance_ratio(),
        ap_centroids: ap_model
            .labels
            .iter()
            .cloned()
            .zip(ap_model.centroids.iter().cloned())
            .collect(),
        ap_accuracy: ap_confusion.accuracy(),
        ap_confusion,
        ce_accuracy: ce_confusion.accuracy(),
        ce_confusion,
        model,
    })
}
