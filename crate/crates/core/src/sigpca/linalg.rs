//! Standardization, sample covariance and a cyclic Jacobi eigen-solver.

#![allow(clippy::needless_range_loop)]

use serde::{Deserialize, Serialize};

use super::PcaError;

pub type Matrix = Vec<Vec<f64>>;

/// Column means and `n - 1` standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub std_devs: Vec<f64>,
}

fn dims(x: &[Vec<f64>]) -> Result<usize, PcaError> {
    let d = x.first().ok_or(PcaError::Empty)?.len();
    if x.iter().any(|r| r.len() != d) {
        return Err(PcaError::Dimension {
            expected: d,
            actual: x.iter().map(Vec::len).find(|&l| l != d).unwrap(),
        });
    }
    Ok(d)
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self, PcaError> {
        let d = dims(x)?;
        let n = x.len();
        if n < 2 {
            return Err(PcaError::TooFewRows(n));
        }
        let means: Vec<f64> = (0..d)
            .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64)
            .collect();
        let std_devs = (0..d)
            .map(|j| {
                let ss: f64 = x.iter().map(|r| (r[j] - means[j]).powi(2)).sum();
                (ss / (n - 1) as f64).sqrt()
            })
            .collect();
        Ok(Standardizer { means, std_devs })
    }

    /// `(x - mean) / sd`, with constant features mapped to 0.
    pub fn transform(&self, x: &[Vec<f64>]) -> Result<Matrix, PcaError> {
        let d = self.means.len();
        x.iter()
            .map(|r| {
                if r.len() != d {
                    return Err(PcaError::Dimension {
                        expected: d,
                        actual: r.len(),
                    });
                }
                Ok(r.iter()
                    .zip(self.means.iter().zip(&self.std_devs))
                    .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
                    .collect())
            })
            .collect()
    }
}

pub fn standardize(x: &[Vec<f64>]) -> Result<(Matrix, Standardizer), PcaError> {
    let s = Standardizer::fit(x)?;
    Ok((s.transform(x)?, s))
}

/// `1 / (n - 1) * sum (z - mean)(z - mean)^T`.
pub fn covariance(z: &[Vec<f64>]) -> Result<Matrix, PcaError> {
    let d = dims(z)?;
    let n = z.len();
    if n < 2 {
        return Err(PcaError::TooFewRows(n));
    }
    let means: Vec<f64> = (0..d)
        .map(|j| z.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut c = vec![vec![0.0; d]; d];
    for r in z {
        for i in 0..d {
            for j in i..d {
                c[i][j] += (r[i] - means[i]) * (r[j] - means[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            c[i][j] /= (n - 1) as f64;
            c[j][i] = c[i][j];
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// All eigenpairs of a symmetric matrix, sorted by descending eigenvalue,
/// each vector unit-norm with its first nonzero entry positive.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> Result<Vec<EigenPair>, PcaError> {
    let n = a.len();
    if n == 0 {
        return Err(PcaError::Empty);
    }
    if a.iter().any(|r| r.len() != n) {
        return Err(PcaError::NotSquare);
    }
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + scale) {
                return Err(PcaError::NotSymmetric { row: i, col: j });
            }
        }
    }
    let mut m: Matrix = a.to_vec();
    let mut v: Matrix = (0..n)
        .map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect())
        .collect();
    for _ in 0..MAX_SWEEPS {
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(0.0f64, |acc, (i, j)| acc.max(m[i][j].abs()));
        if off < OFF_DIAGONAL_TOL {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut pairs: Vec<EigenPair> = (0..n)
        .map(|j| {
            let mut vector: Vec<f64> = v.iter().map(|row| row[j]).collect();
            let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            let first = vector
                .iter()
                .copied()
                .find(|x| x.abs() > 1e-15)
                .unwrap_or(1.0);
            let sign = if first < 0.0 { -1.0 } else { 1.0 };
            vector.iter_mut().for_each(|x| *x *= sign / norm);
            EigenPair {
                value: m[j][j],
                vector,
            }
        })
        .collect();
    pairs.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(pairs)
}

/// The top `k` eigenpairs.
pub fn principal_components(sigma: &[Vec<f64>], k: usize) -> Result<Vec<EigenPair>, PcaError> {
    if k == 0 || k > sigma.len() {
        return Err(PcaError::BadK {
            k,
            dim: sigma.len(),
        });
    }
    let mut pairs = symmetric_eigen(sigma)?;
    pairs.truncate(k);
    Ok(pairs)
}

/// `PC_i = Z v_i` for each retained pair.
pub fn project(z: &[Vec<f64>], pairs: &[EigenPair]) -> Result<Matrix, PcaError> {
    let d = pairs.first().map_or(0, |p| p.vector.len());
    z.iter()
        .map(|r| {
            if r.len() != d {
                return Err(PcaError::Dimension {
                    expected: d,
                    actual: r.len(),
                });
            }
            Ok(pairs
                .iter()
                .map(|p| r.iter().zip(&p.vector).map(|(a, b)| a * b).sum())
                .collect())
        })
        .collect()
}
