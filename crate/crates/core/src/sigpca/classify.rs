use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PcaError;

/// Per-label mean points; labels kept sorted so that ties go to the
/// lexicographically smallest label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestCentroid {
    pub labels: Vec<String>,
    pub centroids: Vec<Vec<f64>>,
}

impl NearestCentroid {
    pub fn fit(points: &[Vec<f64>], labels: &[String]) -> Result<Self, PcaError> {
        if points.is_empty() || points.len() != labels.len() {
            return Err(PcaError::NoLabels);
        }
        let mut sums: BTreeMap<&String, (Vec<f64>, usize)> = BTreeMap::new();
        for (p, l) in points.iter().zip(labels) {
            let e = sums.entry(l).or_insert_with(|| (vec![0.0; p.len()], 0));
            e.0.iter_mut().zip(p).for_each(|(s, v)| *s += v);
            e.1 += 1;
        }
        let (labels, centroids) = sums
            .into_iter()
            .map(|(l, (s, n))| (l.clone(), s.into_iter().map(|v| v / n as f64).collect()))
            .unzip();
        Ok(NearestCentroid { labels, centroids })
    }

    pub fn predict(&self, point: &[f64]) -> &str {
        let mut best = (f64::INFINITY, 0);
        for (i, c) in self.centroids.iter().enumerate() {
            let d: f64 = c.iter().zip(point).map(|(a, b)| (a - b).powi(2)).sum();
            // strict comparison keeps the earlier (smaller) label on ties
            if d < best.0 {
                best = (d, i);
            }
        }
        &self.labels[best.1]
    }

    pub fn classify(&self, points: &[Vec<f64>]) -> Vec<String> {
        points.iter().map(|p| self.predict(p).to_string()).collect()
    }
}

/// `matrix[i][j]` counts rows with true label `labels[i]` predicted as
/// `labels[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn build(truth: &[String], predicted: &[String]) -> Self {
        let mut labels: Vec<String> = truth.iter().chain(predicted).cloned().collect();
        labels.sort();
        labels.dedup();
        let idx = |l: &String| labels.binary_search(l).expect("label collected above");
        let mut matrix = vec![vec![0; labels.len()]; labels.len()];
        for (t, p) in truth.iter().zip(predicted) {
            matrix[idx(t)][idx(p)] += 1;
        }
        ConfusionMatrix { labels, matrix }
    }

    pub fn accuracy(&self) -> f64 {
        let total: u64 = self.matrix.iter().flatten().sum();
        let correct: u64 = (0..self.labels.len()).map(|i| self.matrix[i][i]).sum();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn single_class_is_trivially_perfect() {
        let pts = vec![vec![1.0], vec![2.0]];
        let m = NearestCentroid::fit(&pts, &s(&["a", "a"])).unwrap();
        assert_eq!(m.classify(&pts), s(&["a", "a"]));
    }

    #[test]
    fn ties_go_to_smallest_label() {
        let pts = vec![vec![0.0], vec![0.0]];
        let m = NearestCentroid::fit(&pts, &s(&["zeta", "alpha"])).unwrap();
        assert_eq!(m.predict(&[0.0]), "alpha");
        let m = NearestCentroid::fit(&[vec![-1.0], vec![1.0]], &s(&["b", "a"])).unwrap();
        assert_eq!(m.predict(&[0.0]), "a");
    }

    #[test]
    fn empty_fit_rejected() {
        assert_eq!(NearestCentroid::fit(&[], &[]), Err(PcaError::NoLabels));
    }

    #[test]
    fn confusion_json_shape() {
        let c =
            ConfusionMatrix::build(&s(&["ce", "ce", "non_ce"]), &s(&["ce", "non_ce", "non_ce"]));
        assert_eq!(c.matrix, vec![vec![1, 1], vec![0, 1]]);
        assert!((c.accuracy() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            serde_json::to_string(&c).unwrap(),
            r#"{"labels":["ce","non_ce"],"matrix":[[1,1],[0,1]]}"#
        );
    }
}
