use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LearningError;
use crate::coding::power_transform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelKind {
    Hik,
    /// Gaussian kernel on `sign(x)|x|^power`.
    Rbf { sigma: f64, power: f64 },
}

impl KernelKind {
    fn check(&self) -> Result<(), LearningError> {
        match *self {
            KernelKind::Hik => Ok(()),
            KernelKind::Rbf { sigma, power } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(LearningError::InvalidParam(format!("sigma must be positive, got {sigma}")));
                }
                if !(power > 0.0) {
                    return Err(LearningError::InvalidParam(format!("power must be positive, got {power}")));
                }
                Ok(())
            }
        }
    }

    /// Input as seen by the kernel (power-transformed for RBF).
    fn prepare(&self, x: &[f64]) -> Result<Vec<f64>, LearningError> {
        match *self {
            KernelKind::Hik => {
                if let Some(&v) = x.iter().find(|v| !(**v >= 0.0)) {
                    return Err(LearningError::NegativeEntry(v));
                }
                Ok(x.to_vec())
            }
            KernelKind::Rbf { power, .. } => Ok(power_transform(x, power)),
        }
    }

    fn eval_prepared(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelKind::Hik => x.iter().zip(y).map(|(a, b)| a.min(*b)).sum(),
            KernelKind::Rbf { sigma, .. } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, LearningError> {
        self.check()?;
        if x.len() != y.len() {
            return Err(LearningError::LengthMismatch(x.len(), y.len()));
        }
        Ok(self.eval_prepared(&self.prepare(x)?, &self.prepare(y)?))
    }
}

/// Histogram intersection `Σ min(x_k, y_k)` of two nonnegative vectors.
pub fn hik(x: &[f64], y: &[f64]) -> Result<f64, LearningError> {
    KernelKind::Hik.eval(x, y)
}

pub fn rbf(x: &[f64], y: &[f64], sigma: f64, power: f64) -> Result<f64, LearningError> {
    KernelKind::Rbf { sigma, power }.eval(x, y)
}

fn prepare_all(vectors: &[Vec<f64>], kind: &KernelKind, len: usize) -> Result<Vec<Vec<f64>>, LearningError> {
    vectors
        .iter()
        .map(|v| {
            if v.len() != len {
                return Err(LearningError::LengthMismatch(len, v.len()));
            }
            kind.prepare(v)
        })
        .collect()
}

/// Dense symmetric Gram matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub kind: KernelKind,
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    /// Builds from explicit values; `values` must be `n × n` and symmetric.
    pub fn from_values(kind: KernelKind, n: usize, values: Vec<f64>) -> Result<Self, LearningError> {
        if values.len() != n * n {
            return Err(LearningError::LengthMismatch(n * n, values.len()));
        }
        let m = KernelMatrix { kind, n, values };
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (m.get(i, j), m.get(j, i));
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(LearningError::InvalidParam(format!("kernel matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn subset(&self, indices: &[usize]) -> KernelMatrix {
        let values = indices.iter().flat_map(|&i| indices.iter().map(move |&j| self.get(i, j))).collect();
        KernelMatrix { kind: self.kind, n: indices.len(), values }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let m = nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.values);
        nalgebra::SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Gram matrix of `vectors`, rows filled in parallel.
pub fn kernel_matrix(vectors: &[Vec<f64>], kind: KernelKind) -> Result<KernelMatrix, LearningError> {
    kind.check()?;
    let n = vectors.len();
    let len = vectors.first().map_or(0, Vec::len);
    let prepared = prepare_all(vectors, &kind, len)?;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| if j < i { 0.0 } else { kind.eval_prepared(&prepared[i], &prepared[j]) }).collect())
        .collect();
    let mut values: Vec<f64> = rows.into_iter().flatten().collect();
    for i in 0..n {
        for j in 0..i {
            values[i * n + j] = values[j * n + i];
        }
    }
    Ok(KernelMatrix { kind, n, values })
}

/// `result[q][t] = K(queries[q], train[t])`.
pub fn cross_kernel(queries: &[Vec<f64>], train: &[Vec<f64>], kind: KernelKind) -> Result<Vec<Vec<f64>>, LearningError> {
    kind.check()?;
    let len = train.first().or(queries.first()).map_or(0, Vec::len);
    let tp = prepare_all(train, &kind, len)?;
    let qp = prepare_all(queries, &kind, len)?;
    Ok(qp.par_iter().map(|q| tp.iter().map(|t| kind.eval_prepared(q, t)).collect()).collect())
}

/// Median pairwise Euclidean distance between power-transformed vectors;
/// 1 when every pair coincides.
pub fn median_sigma(vectors: &[Vec<f64>], power: f64) -> f64 {
    let t: Vec<Vec<f64>> = vectors.iter().map(|v| power_transform(v, power)).collect();
    let mut d: Vec<f64> = (0..t.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let t = &t;
            (i + 1..t.len()).map(move |j| t[i].iter().zip(&t[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        })
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d[(d.len() - 1) / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}
