use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans_fit, nearest};
use super::{check_dims, CodingError};

const MAX_ITER: usize = 100;
/// Stop once the mean log-likelihood moves by at most this much.
const LL_TOL: f64 = 1e-3;
/// Per-dimension variance floor relative to the global data variance.
pub const VARIANCE_FLOOR: f64 = 1e-4;
/// Absolute floor for dimensions with no spread at all.
const ABS_FLOOR: f64 = 1e-10;
const MIN_WEIGHT: f64 = 1e-12;

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub gmm: Gmm,
    /// Average log-likelihood of the data before each M-step, plus the final value.
    pub log_likelihood: Vec<f64>,
}

impl Gmm {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    fn prepare(&self) -> Prepared<'_> {
        let log_norm = (0..self.k())
            .map(|k| self.weights[k].ln() - 0.5 * self.variances[k].iter().map(|v| (2.0 * PI * v).ln()).sum::<f64>())
            .collect();
        let inv_var = self.variances.iter().map(|v| v.iter().map(|x| 1.0 / x).collect()).collect();
        Prepared { gmm: self, log_norm, inv_var }
    }

    /// Posterior responsibilities of `x`; returns the log-likelihood of `x`.
    pub fn posteriors(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.prepare().posteriors(x, out)
    }

    pub fn average_log_likelihood(&self, samples: &[Vec<f64>]) -> f64 {
        let p = self.prepare();
        let mut buf = vec![0.0; self.k()];
        samples.iter().map(|x| p.posteriors(x, &mut buf)).sum::<f64>() / samples.len() as f64
    }
}

/// Per-component normalisers and precisions of a fixed mixture.
struct Prepared<'a> {
    gmm: &'a Gmm,
    /// `ln π_k − ½ Σ_l ln(2π σ²_kl)`
    log_norm: Vec<f64>,
    inv_var: Vec<Vec<f64>>,
}

impl Prepared<'_> {
    fn posteriors(&self, x: &[f64], out: &mut [f64]) -> f64 {
        for (k, o) in out.iter_mut().enumerate() {
            let mut q = 0.0;
            for ((xi, m), iv) in x.iter().zip(&self.gmm.means[k]).zip(&self.inv_var[k]) {
                let d = xi - m;
                q += d * d * iv;
            }
            *o = self.log_norm[k] - 0.5 * q;
        }
        let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in out.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in out.iter_mut() {
            *v /= sum;
        }
        max + sum.ln()
    }
}

/// EM for a diagonal GMM initialised from k-means.
pub fn gmm_fit(samples: &[Vec<f64>], k: usize, seed: u64) -> Result<GmmFit, CodingError> {
    if k == 0 {
        return Err(CodingError::InvalidParam("k must be positive".into()));
    }
    if samples.len() < 10 * k {
        return Err(CodingError::InsufficientSamples { need: 10 * k, got: samples.len() });
    }
    let h = check_dims(samples)?;
    let n = samples.len() as f64;
    let mut global_mean = vec![0.0; h];
    for x in samples {
        for (m, v) in global_mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut floor = vec![0.0; h];
    for x in samples {
        for l in 0..h {
            floor[l] += (x[l] - global_mean[l]).powi(2) / n;
        }
    }
    for f in &mut floor {
        *f = (*f * VARIANCE_FLOOR).max(ABS_FLOOR);
    }

    // initial parameters from a hard k-means partition
    let centroids = kmeans_fit(samples, k, seed)?.centroids;
    let mut resp = vec![vec![0.0; k]; samples.len()];
    for (x, r) in samples.iter().zip(resp.iter_mut()) {
        r[nearest(x, &centroids).0] = 1.0;
    }
    let mut gmm = m_step(samples, &resp, &floor, None);
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let ll = e_step(&gmm, samples, &mut resp);
        converged = history.last().is_some_and(|&prev: &f64| (ll - prev).abs() <= LL_TOL);
        history.push(ll);
        if converged {
            break;
        }
        gmm = m_step(samples, &resp, &floor, Some(&gmm));
    }
    if !converged {
        history.push(gmm.average_log_likelihood(samples));
    }
    Ok(GmmFit { gmm, log_likelihood: history })
}

fn e_step(gmm: &Gmm, samples: &[Vec<f64>], resp: &mut [Vec<f64>]) -> f64 {
    let p = gmm.prepare();
    let total: f64 = samples.par_iter().zip(resp.par_iter_mut()).map(|(x, r)| p.posteriors(x, r)).sum();
    total / samples.len() as f64
}

fn m_step(samples: &[Vec<f64>], resp: &[Vec<f64>], floor: &[f64], prev: Option<&Gmm>) -> Gmm {
    let k = resp[0].len();
    let h = floor.len();
    let n = samples.len() as f64;
    let mut mass = vec![0.0; k];
    let mut means = vec![vec![0.0; h]; k];
    for (x, r) in samples.iter().zip(resp) {
        for c in 0..k {
            if r[c] > 0.0 {
                mass[c] += r[c];
                for l in 0..h {
                    means[c][l] += r[c] * x[l];
                }
            }
        }
    }
    let mut variances = vec![vec![0.0; h]; k];
    for c in 0..k {
        if mass[c] > 0.0 {
            for m in &mut means[c] {
                *m /= mass[c];
            }
        } else if let Some(p) = prev {
            means[c] = p.means[c].clone();
        }
    }
    for (x, r) in samples.iter().zip(resp) {
        for c in 0..k {
            if r[c] > 0.0 {
                for l in 0..h {
                    variances[c][l] += r[c] * (x[l] - means[c][l]).powi(2);
                }
            }
        }
    }
    for c in 0..k {
        for l in 0..h {
            variances[c][l] = if mass[c] > 0.0 {
                (variances[c][l] / mass[c]).max(floor[l])
            } else {
                prev.map_or(floor[l], |p| p.variances[c][l])
            };
        }
    }
    let mut weights: Vec<f64> = mass.iter().map(|m| (m / n).max(MIN_WEIGHT)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Gmm { weights, means, variances }
}

/// Fisher vector `[u_1..u_K, v_1..v_K]` of a sample set; zeros when empty.
pub fn fisher_encode(samples: &[Vec<f64>], gmm: &Gmm) -> Result<Vec<f64>, CodingError> {
    let (k, h) = (gmm.k(), gmm.dim());
    let mut out = vec![0.0; 2 * h * k];
    if samples.is_empty() {
        return Ok(out);
    }
    let n = samples.len() as f64;
    let p = gmm.prepare();
    let mut q = vec![0.0; k];
    for x in samples {
        if x.len() != h {
            return Err(CodingError::DimensionMismatch { expected: h, got: x.len() });
        }
        p.posteriors(x, &mut q);
        for c in 0..k {
            if q[c] == 0.0 {
                continue;
            }
            for l in 0..h {
                let z = (x[l] - gmm.means[c][l]) / gmm.variances[c][l].sqrt();
                out[c * h + l] += q[c] * z;
                out[(k + c) * h + l] += q[c] * (z * z - 1.0);
            }
        }
    }
    for c in 0..k {
        let su = 1.0 / (n * gmm.weights[c].sqrt());
        let sv = 1.0 / (n * (2.0 * gmm.weights[c]).sqrt());
        for l in 0..h {
            out[c * h + l] *= su;
            out[(k + c) * h + l] *= sv;
        }
    }
    Ok(out)
}
