use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_dims, dot, CodingError};

/// Stopping threshold on the KKT violation; strictly inside the 1e-6 contract.
const KKT_TOL: f64 = 5e-7;
const MAX_SWEEPS: usize = 100_000;
const MAX_ALTERNATIONS: usize = 50;
const OBJ_REL_TOL: f64 = 1e-4;
/// Unused atoms are re-seeded only during the first rounds.
const RESTART_ROUNDS: usize = 10;

/// Coordinate-descent solver for `min ½‖x − Dα‖² + λ‖α‖₁` with a fixed
/// dictionary; the Gram matrix is shared across samples.
#[derive(Debug, Clone)]
pub struct Lasso {
    atoms: Vec<Vec<f64>>,
    gram: Vec<f64>,
    lambda: f64,
}

impl Lasso {
    pub fn new(atoms: &[Vec<f64>], lambda: f64) -> Result<Self, CodingError> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(CodingError::InvalidParam("lambda must be finite and non-negative".into()));
        }
        if atoms.is_empty() {
            return Err(CodingError::InvalidParam("empty dictionary".into()));
        }
        check_dims(atoms)?;
        let k = atoms.len();
        let mut gram = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                gram[i * k + j] = dot(&atoms[i], &atoms[j]);
            }
        }
        Ok(Self { atoms: atoms.to_vec(), gram, lambda })
    }

    pub fn k(&self) -> usize {
        self.atoms.len()
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>, CodingError> {
        self.encode_from(x, vec![0.0; self.k()])
    }

    /// Solves starting from `alpha` (or the homotopy path when that is
    /// better); coordinate steps never increase the objective, so a warm
    /// start yields an objective no larger than its own.
    pub fn encode_from(&self, x: &[f64], mut alpha: Vec<f64>) -> Result<Vec<f64>, CodingError> {
        let h = self.atoms[0].len();
        if x.len() != h {
            return Err(CodingError::DimensionMismatch { expected: h, got: x.len() });
        }
        let k = self.k();
        let g = &self.gram;
        if let Some(path) = self.homotopy(x) {
            if self.objective(x, &path) <= self.objective(x, &alpha) {
                alpha = path;
            }
        }
        // corr = Dᵀ(x − Dα)
        let mut corr: Vec<f64> = self.atoms.iter().map(|d| dot(d, x)).collect();
        for j in 0..k {
            if alpha[j] != 0.0 {
                for i in 0..k {
                    corr[i] -= g[i * k + j] * alpha[j];
                }
            }
        }
        for _ in 0..MAX_SWEEPS {
            for j in 0..k {
                let gjj = g[j * k + j];
                if gjj <= 0.0 {
                    alpha[j] = 0.0;
                    continue;
                }
                let rho = corr[j] + gjj * alpha[j];
                let new = soft_threshold(rho, self.lambda) / gjj;
                let delta = new - alpha[j];
                if delta != 0.0 {
                    for i in 0..k {
                        corr[i] -= g[i * k + j] * delta;
                    }
                    alpha[j] = new;
                }
            }
            // recompute the correlation exactly before judging convergence
            let exact = self.correlation(x, &alpha);
            if kkt_violation(&exact, &alpha, self.lambda) < KKT_TOL {
                return Ok(alpha);
            }
            corr = exact;
        }
        Ok(alpha)
    }

    /// LARS-lasso path from α = 0 down to λ. `None` when the active Gram
    /// block turns singular or the step count runs out.
    fn homotopy(&self, x: &[f64]) -> Option<Vec<f64>> {
        let k = self.k();
        let g = &self.gram;
        let mut corr: Vec<f64> = self.atoms.iter().map(|d| dot(d, x)).collect();
        let mut alpha = vec![0.0; k];
        let (mut j0, mut c_max) = (0, 0.0);
        for (j, c) in corr.iter().enumerate() {
            if c.abs() > c_max {
                (j0, c_max) = (j, c.abs());
            }
        }
        if c_max <= self.lambda {
            return Some(alpha);
        }
        let mut active = vec![j0];
        let mut sign = vec![corr[j0].signum()];
        let mut dropped = None;
        for _ in 0..8 * k {
            let m = active.len();
            let g_aa = DMatrix::from_fn(m, m, |a, b| g[active[a] * k + active[b]]);
            let chol = g_aa.cholesky()?;
            let w = chol.solve(&DVector::from_column_slice(&sign));
            // a_j = (G_{·A} w)_j: rate at which each correlation falls
            let rate: Vec<f64> = (0..k).map(|j| active.iter().zip(w.iter()).map(|(&a, wa)| g[j * k + a] * wa).sum()).collect();
            let mut step = c_max - self.lambda;
            let mut event = None;
            for j in 0..k {
                if active.contains(&j) || dropped == Some(j) {
                    continue;
                }
                for gamma in [(c_max - corr[j]) / (1.0 - rate[j]), (c_max + corr[j]) / (1.0 + rate[j])] {
                    if gamma > 0.0 && gamma < step {
                        (step, event) = (gamma, Some((j, true)));
                    }
                }
            }
            for (a, &j) in active.iter().enumerate() {
                if w[a] * sign[a] < 0.0 {
                    let gamma = (-alpha[j] / w[a]).max(0.0);
                    if gamma < step {
                        (step, event) = (gamma, Some((j, false)));
                    }
                }
            }
            for (a, &j) in active.iter().enumerate() {
                alpha[j] += step * w[a];
            }
            for j in 0..k {
                corr[j] -= step * rate[j];
            }
            c_max -= step;
            dropped = None;
            match event {
                None => {
                    // exact refit on the final support and signs
                    let rhs = DVector::from_iterator(
                        m,
                        active.iter().zip(&sign).map(|(&j, s)| dot(&self.atoms[j], x) - self.lambda * s),
                    );
                    let exact = chol.solve(&rhs);
                    if exact.iter().zip(&sign).all(|(v, s)| v * s > 0.0) {
                        for (&j, v) in active.iter().zip(exact.iter()) {
                            alpha[j] = *v;
                        }
                    }
                    return Some(alpha);
                }
                Some((j, true)) => {
                    active.push(j);
                    sign.push(corr[j].signum());
                }
                Some((j, false)) => {
                    alpha[j] = 0.0;
                    let pos = active.iter().position(|&a| a == j).unwrap();
                    active.remove(pos);
                    sign.remove(pos);
                    dropped = Some(j);
                    if active.is_empty() {
                        return None;
                    }
                }
            }
        }
        None
    }

    fn correlation(&self, x: &[f64], alpha: &[f64]) -> Vec<f64> {
        let r = residual(x, &self.atoms, alpha);
        self.atoms.iter().map(|d| dot(d, &r)).collect()
    }

    pub fn objective(&self, x: &[f64], alpha: &[f64]) -> f64 {
        lasso_objective(x, &self.atoms, alpha, self.lambda)
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn residual(x: &[f64], atoms: &[Vec<f64>], alpha: &[f64]) -> Vec<f64> {
    let mut r = x.to_vec();
    for (d, &a) in atoms.iter().zip(alpha) {
        if a != 0.0 {
            for (ri, di) in r.iter_mut().zip(d) {
                *ri -= a * di;
            }
        }
    }
    r
}

/// Largest deviation from the lasso optimality conditions given the
/// correlations `Dᵀ(x − Dα)`.
pub fn kkt_violation(corr: &[f64], alpha: &[f64], lambda: f64) -> f64 {
    corr.iter()
        .zip(alpha)
        .map(|(&c, &a)| {
            if a == 0.0 {
                (c.abs() - lambda).max(0.0)
            } else {
                (c - lambda * a.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

pub fn lasso_objective(x: &[f64], atoms: &[Vec<f64>], alpha: &[f64], lambda: f64) -> f64 {
    let r = residual(x, atoms, alpha);
    0.5 * dot(&r, &r) + lambda * alpha.iter().map(|a| a.abs()).sum::<f64>()
}

/// Sparse code of one sample.
pub fn lasso_encode(x: &[f64], atoms: &[Vec<f64>], lambda: f64) -> Result<Vec<f64>, CodingError> {
    Lasso::new(atoms, lambda)?.encode(x)
}

/// Soft-voting histogram: elementwise sum of absolute codes.
pub fn sc_histogram(codes: &[Vec<f64>], k: usize) -> Vec<f64> {
    let mut h = vec![0.0; k];
    for c in codes {
        for (hi, v) in h.iter_mut().zip(c) {
            *hi += v.abs();
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryFit {
    /// Unit-norm atoms.
    pub atoms: Vec<Vec<f64>>,
    /// Objective after every alternation.
    pub objective: Vec<f64>,
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = dot(v, v).sqrt();
    (n > 1e-12).then(|| v.iter().map(|x| x / n).collect())
}

fn random_unit(rng: &mut ChaCha8Rng, h: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..h).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        if let Some(u) = normalized(&v) {
            return u;
        }
    }
}

/// Alternating minimisation of `Σ ½‖x_i − Dα_i‖² + λ‖α_i‖₁` over unit-norm
/// atoms, on a random subset of `n_d` samples.
pub fn dict_learn(samples: &[Vec<f64>], k: usize, lambda: f64, seed: u64, n_d: usize) -> Result<DictionaryFit, CodingError> {
    if k == 0 || !(lambda > 0.0) {
        return Err(CodingError::InvalidParam("need k > 0 and lambda > 0".into()));
    }
    if samples.len() < k {
        return Err(CodingError::InsufficientSamples { need: k, got: samples.len() });
    }
    let h = check_dims(samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_d = n_d.clamp(k, samples.len());
    let mut picked = sample_indices(&mut rng, samples.len(), n_d).into_vec();
    picked.sort_unstable();
    let data: Vec<&Vec<f64>> = picked.iter().map(|&i| &samples[i]).collect();

    // initial atoms: samples in random order, skipping near-parallel directions
    let mut atoms: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in sample_indices(&mut rng, data.len(), data.len()) {
        if atoms.len() == k {
            break;
        }
        if let Some(d) = normalized(data[i]) {
            if atoms.iter().all(|a| dot(a, &d).abs() < 0.99) {
                atoms.push(d);
            }
        }
    }
    while atoms.len() < k {
        atoms.push(random_unit(&mut rng, h));
    }
    let mut codes = vec![vec![0.0; k]; data.len()];
    let mut history: Vec<f64> = Vec::new();

    for round in 0..MAX_ALTERNATIONS {
        let lasso = Lasso::new(&atoms, lambda)?;
        codes = data
            .par_iter()
            .zip(codes.into_par_iter())
            .map(|(x, a)| lasso.encode_from(x, a))
            .collect::<Result<_, _>>()?;

        // residuals E = X − DA, then exact per-atom updates on the unit sphere
        let mut resid: Vec<Vec<f64>> = data.iter().zip(&codes).map(|(x, a)| residual(x, &atoms, a)).collect();
        let mut restarted = false;
        let mut taken: Vec<usize> = Vec::new();
        for j in 0..k {
            let mut u = vec![0.0; h];
            let mut energy = 0.0;
            for (e, a) in resid.iter().zip(&codes) {
                let aj = a[j];
                if aj != 0.0 {
                    energy += aj * aj;
                    for l in 0..h {
                        u[l] += (e[l] + atoms[j][l] * aj) * aj;
                    }
                }
            }
            let new = if energy > 0.0 {
                match normalized(&u) {
                    Some(d) => d,
                    None => continue,
                }
            } else if round >= RESTART_ROUNDS {
                continue;
            } else {
                // unused atom: restart it on the worst-represented sample
                restarted = true;
                let worst = (0..resid.len())
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &b| dot(&resid[a], &resid[a]).total_cmp(&dot(&resid[b], &resid[b])).then(b.cmp(&a)));
                match worst.and_then(|i| {
                    taken.push(i);
                    normalized(&resid[i])
                }) {
                    Some(d) => d,
                    None => random_unit(&mut rng, h),
                }
            };
            for (e, a) in resid.iter_mut().zip(&codes) {
                let aj = a[j];
                if aj != 0.0 {
                    for l in 0..h {
                        e[l] += (atoms[j][l] - new[l]) * aj;
                    }
                }
            }
            atoms[j] = new;
        }
        let obj: f64 = resid.iter().map(|e| 0.5 * dot(e, e)).sum::<f64>()
            + lambda * codes.iter().flatten().map(|a| a.abs()).sum::<f64>();
        let done = !restarted && history.last().is_some_and(|&prev: &f64| (prev - obj).abs() <= OBJ_REL_TOL * prev.abs());
        history.push(obj);
        if done {
            break;
        }
    }
    Ok(DictionaryFit { atoms, objective: history })
}
