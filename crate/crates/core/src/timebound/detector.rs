//! Relay detectors over inter-frame durations: a single cut and a bagged
//! CART forest.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Label, TimingError, TimingSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Threshold,
    #[default]
    Forest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 25,
            max_depth: 6,
            min_samples_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        /// Fraction of relayed training samples.
        p_relayed: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf { p_relayed } => *p_relayed,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<Node>,
    /// Ordinal code for each location tag seen in training.
    locations: BTreeMap<String, f64>,
}

impl RandomForest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    fn features(&self, s: &TimingSample) -> [f64; 2] {
        let loc = s
            .location_tag
            .as_ref()
            .and_then(|t| self.locations.get(t).copied())
            .unwrap_or(-1.0);
        [s.duration_ms, loc]
    }

    /// Mean of the per-tree relayed fractions.
    pub fn score(&self, s: &TimingSample) -> f64 {
        let x = self.features(s);
        self.trees.iter().map(|t| t.predict(&x)).sum::<f64>() / self.trees.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detector {
    /// Flags relayed when the duration is above (or, if `relayed_above` is
    /// false, at most) `cut_ms`.
    Threshold {
        cut_ms: f64,
        relayed_above: bool,
    },
    Forest(RandomForest),
}

impl Detector {
    pub fn predict(&self, s: &TimingSample) -> Label {
        let relayed = match self {
            Detector::Threshold {
                cut_ms,
                relayed_above,
            } => (s.duration_ms > *cut_ms) == *relayed_above,
            Detector::Forest(f) => f.score(s) >= 0.5,
        };
        if relayed {
            Label::Relayed
        } else {
            Label::Benign
        }
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Row {
    x: [f64; 2],
    y: bool,
}

fn best_split(rows: &[&Row], min_leaf: usize) -> Option<(usize, f64)> {
    let n = rows.len();
    let total_pos = rows.iter().filter(|r| r.y).count();
    let parent = gini(total_pos, n);
    let mut best: Option<(f64, usize, f64)> = None;
    for feature in 0..2 {
        let mut sorted: Vec<&Row> = rows.to_vec();
        sorted.sort_by(|a, b| a.x[feature].total_cmp(&b.x[feature]));
        let mut left_pos = 0;
        for i in 1..n {
            left_pos += sorted[i - 1].y as usize;
            let (lo, hi) = (sorted[i - 1].x[feature], sorted[i].x[feature]);
            if lo == hi || i < min_leaf || n - i < min_leaf {
                continue;
            }
            let impurity = (i as f64 * gini(left_pos, i)
                + (n - i) as f64 * gini(total_pos - left_pos, n - i))
                / n as f64;
            let gain = parent - impurity;
            if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, feature, 0.5 * (lo + hi)));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

fn grow(rows: &[&Row], depth: usize, params: &ForestParams) -> Node {
    let pos = rows.iter().filter(|r| r.y).count();
    let leaf = Node::Leaf {
        p_relayed: pos as f64 / rows.len() as f64,
    };
    if depth >= params.max_depth || pos == 0 || pos == rows.len() {
        return leaf;
    }
    let Some((feature, threshold)) = best_split(rows, params.min_samples_leaf.max(1)) else {
        return leaf;
    };
    let (l, r): (Vec<&Row>, Vec<&Row>) = rows.iter().partition(|row| row.x[feature] <= threshold);
    Node::Split {
        feature,
        threshold,
        left: Box::new(grow(&l, depth + 1, params)),
        right: Box::new(grow(&r, depth + 1, params)),
    }
}

fn train_forest(samples: &[TimingSample], params: &ForestParams, rng_seed: u64) -> RandomForest {
    let mut tags: Vec<&String> = samples
        .iter()
        .filter_map(|s| s.location_tag.as_ref())
        .collect();
    tags.sort();
    tags.dedup();
    let locations: BTreeMap<String, f64> = tags
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as f64))
        .collect();
    let mut forest = RandomForest {
        trees: Vec::new(),
        locations,
    };
    let rows: Vec<Row> = samples
        .iter()
        .map(|s| Row {
            x: forest.features(s),
            y: s.label == Label::Relayed,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = rows.len();
    forest.trees = (0..params.n_trees.max(1))
        .map(|_| {
            let bag: Vec<&Row> = (0..n).map(|_| &rows[rng.random_range(0..n)]).collect();
            grow(&bag, 0, params)
        })
        .collect();
    forest
}

/// Cut maximising Youden's J (`tpr + tnr - 1`) over midpoints between
/// distinct training durations, in either direction.
fn train_threshold(samples: &[TimingSample]) -> Detector {
    let mut sorted: Vec<(f64, bool)> = samples
        .iter()
        .map(|s| (s.duration_ms, s.label == Label::Relayed))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pos = sorted.iter().filter(|s| s.1).count() as f64;
    let neg = sorted.len() as f64 - pos;
    let (mut below_pos, mut below_neg) = (0.0, 0.0);
    let mut best = (f64::NEG_INFINITY, sorted[0].0 - 1.0, true);
    for i in 0..sorted.len() {
        if sorted[i].1 {
            below_pos += 1.0;
        } else {
            below_neg += 1.0;
        }
        let cut = match sorted.get(i + 1) {
            Some(next) if next.0 == sorted[i].0 => continue,
            Some(next) => 0.5 * (sorted[i].0 + next.0),
            None => sorted[i].0,
        };
        // relayed above the cut
        let j_above = (pos - below_pos) / pos + below_neg / neg - 1.0;
        let j_below = below_pos / pos + (neg - below_neg) / neg - 1.0;
        if j_above > best.0 {
            best = (j_above, cut, true);
        }
        if j_below > best.0 {
            best = (j_below, cut, false);
        }
    }
    Detector::Threshold {
        cut_ms: best.1,
        relayed_above: best.2,
    }
}

pub fn train_detector(
    samples: &[TimingSample],
    kind: DetectorKind,
    forest: &ForestParams,
    rng_seed: u64,
) -> Result<Detector, TimingError> {
    let relayed = samples.iter().filter(|s| s.label == Label::Relayed).count();
    if relayed == 0 || relayed == samples.len() {
        return Err(TimingError::SingleClass);
    }
    Ok(match kind {
        DetectorKind::Threshold => train_threshold(samples),
        DetectorKind::Forest => Detector::Forest(train_forest(samples, forest, rng_seed)),
    })
}
