use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{check_dims, dot, CodingError};

/// Upper bound on the reduced dimension of Fisher blocks.
pub const MAX_PCA_DIM: usize = 500;

/// Mean vector plus `d'` orthonormal directions, sorted by decreasing variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    /// Variance (population normalisation) along each retained direction.
    pub eigenvalues: Vec<f64>,
}

/// Target dimension for `n` training vectors of dimension `dim`.
pub fn pca_target_dim(n: usize, dim: usize) -> usize {
    MAX_PCA_DIM.min(n.saturating_sub(1)).min(dim).max(1)
}

fn canonical_sign(v: &mut [f64]) {
    let pivot = v.iter().cloned().fold(0.0, |b: f64, x| if x.abs() > b.abs() { x } else { b });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Completes `basis` to `target` orthonormal vectors with coordinate axes.
fn complete_basis(basis: &mut Vec<Vec<f64>>, dim: usize, target: usize) {
    for axis in 0..dim {
        if basis.len() >= target {
            break;
        }
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        for _ in 0..2 {
            for b in basis.iter() {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
}

/// Principal directions of the centred training vectors. Uses the `n × n`
/// Gram matrix when there are fewer vectors than dimensions.
pub fn pca_fit(vectors: &[Vec<f64>], target: usize) -> Result<Pca, CodingError> {
    if target == 0 {
        return Err(CodingError::InvalidParam("PCA dimension must be positive".into()));
    }
    if vectors.is_empty() {
        return Err(CodingError::InsufficientSamples { need: 1, got: 0 });
    }
    let dim = check_dims(vectors)?;
    if target > dim {
        return Err(CodingError::InvalidParam(format!("PCA dimension {target} exceeds input dimension {dim}")));
    }
    let n = vectors.len();
    let mut mean = vec![0.0; dim];
    for v in vectors {
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x / n as f64);
    }
    let centred = DMatrix::from_fn(n, dim, |i, j| vectors[i][j] - mean[j]);

    let (mut basis, mut eigenvalues) = (Vec::new(), Vec::new());
    if n < dim {
        let gram = (&centred * centred.transpose()) / n as f64;
        let eig = SymmetricEigen::new(gram);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);
        for &i in order.iter().take(target) {
            let lambda = eig.eigenvalues[i];
            if lambda <= 1e-12 * top.max(1e-300) {
                break;
            }
            let u: DVector<f64> = centred.transpose() * eig.eigenvectors.column(i);
            let mut v: Vec<f64> = (u / (n as f64 * lambda).sqrt()).iter().cloned().collect();
            canonical_sign(&mut v);
            basis.push(v);
            eigenvalues.push(lambda);
        }
    } else {
        let cov = (centred.transpose() * &centred) / n as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        for &i in order.iter().take(target) {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().cloned().collect();
            canonical_sign(&mut v);
            basis.push(v);
            eigenvalues.push(eig.eigenvalues[i].max(0.0));
        }
    }
    let found = basis.len();
    complete_basis(&mut basis, dim, target);
    eigenvalues.extend(std::iter::repeat(0.0).take(basis.len() - found));
    Ok(Pca { mean, basis, eigenvalues })
}

pub fn pca_project(x: &[f64], pca: &Pca) -> Result<Vec<f64>, CodingError> {
    if x.len() != pca.mean.len() {
        return Err(CodingError::DimensionMismatch { expected: pca.mean.len(), got: x.len() });
    }
    let centred: Vec<f64> = x.iter().zip(&pca.mean).map(|(a, m)| a - m).collect();
    Ok(pca.basis.iter().map(|b| dot(b, &centred)).collect())
}
