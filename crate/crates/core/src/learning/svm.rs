use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KernelKind, KernelMatrix, LearningError};

pub const DEFAULT_C: f64 = 10.0;
/// Maximal KKT violation `m(α) − M(α)` at which SMO stops.
pub const KKT_TOLERANCE: f64 = 1e-3;
pub const MODEL_FORMAT_VERSION: u32 = 1;

const TAU: f64 = 1e-12;

/// Solution of one binary soft-margin dual.
#[derive(Debug, Clone)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Final `m(α) − M(α)`.
    pub violation: f64,
    /// Dual objective `Σα − ½αᵀQα` after every iteration (only when requested).
    pub objective_trace: Vec<f64>,
}

/// SMO with second-order working-set selection on
/// `max Σα − ½ Σ αᵢαⱼyᵢyⱼK(i,j)`, `0 ≤ α ≤ C`, `Σ αᵢyᵢ = 0`.
/// `kernel(a, b)` addresses local indices `0..y.len()`.
pub fn solve_binary(kernel: impl Fn(usize, usize) -> f64, y: &[f64], c: f64, trace: bool) -> BinarySolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let diag: Vec<f64> = (0..n).map(|i| kernel(i, i)).collect();
    let max_iter = (100 * n * n).clamp(100_000, 50_000_000);
    let mut objective_trace = Vec::new();
    let up = |a: f64, yi: f64| if yi > 0.0 { a < c } else { a > 0.0 };
    let low = |a: f64, yi: f64| if yi > 0.0 { a > 0.0 } else { a < c };

    let mut iterations = 0;
    let mut violation;
    loop {
        // i: maximal violating index in I_up
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > g_max {
                    g_max = v;
                    i_sel = t;
                }
            }
        }
        let mut g_min = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            g_min = g_min.min(v);
            if i_sel != usize::MAX && v < g_max {
                let b = g_max - v;
                let mut a = diag[i_sel] + diag[t] - 2.0 * kernel(i_sel, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let score = -b * b / a;
                if score < best {
                    best = score;
                    j_sel = t;
                }
            }
        }
        violation = if i_sel == usize::MAX || g_min == f64::INFINITY { 0.0 } else { g_max - g_min };
        if violation < KKT_TOLERANCE || j_sel == usize::MAX || iterations >= max_iter {
            if iterations >= max_iter {
                log::warn!("SMO stopped at the iteration cap with violation {violation:.3e}");
            }
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel, j_sel);
        let kij = kernel(i, j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = diag[i] + diag[j] - 2.0 * kij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = diag[i] + diag[j] - 2.0 * kij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * kernel(i, t) * di + y[j] * kernel(j, t) * dj);
        }
        if trace {
            // f(α) = ½ αᵀ(∇f − e) and the dual objective is −f
            objective_trace.push(-0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>());
        }
    }

    // bias from free vectors, else the midpoint of the feasible interval
    let (mut lb, mut ub) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        match (lb.is_finite(), ub.is_finite()) {
            (true, true) => (ub + lb) / 2.0,
            (true, false) => lb,
            (false, true) => ub,
            (false, false) => 0.0,
        }
    };
    BinarySolution { alpha, bias: -rho, iterations, violation, objective_trace }
}

/// One pairwise machine: positive side `classes.0`, negative side `classes.1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub classes: (usize, usize),
    /// Training indices with α > 0.
    pub support: Vec<usize>,
    /// α of each support index, in `[0, C]`.
    pub alpha: Vec<f64>,
    /// +1 for `classes.0`, −1 for `classes.1`.
    pub sign: Vec<i8>,
    pub bias: f64,
}

impl BinaryMachine {
    /// Decision value from kernel values against every training sample.
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.alpha)
            .zip(&self.sign)
            .map(|((&s, &a), &y)| a * y as f64 * row[s])
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub version: u32,
    pub kernel: KernelKind,
    pub c: f64,
    /// Sorted distinct training labels.
    pub classes: Vec<usize>,
    pub n_train: usize,
    pub machines: Vec<BinaryMachine>,
}

/// Permutation-invariant processing order: label, self-similarity, then the
/// sorted kernel row. Identical keys only occur for interchangeable samples.
fn canonical_order(kernel: &KernelMatrix, labels: &[usize]) -> Vec<usize> {
    let keys: Vec<Vec<f64>> = (0..labels.len())
        .into_par_iter()
        .map(|i| {
            let mut row = kernel.row(i).to_vec();
            row.sort_by(f64::total_cmp);
            row.insert(0, kernel.get(i, i));
            row
        })
        .collect();
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| {
        labels[a].cmp(&labels[b]).then_with(|| {
            keys[a].iter().zip(&keys[b]).map(|(x, y)| x.total_cmp(y)).find(|o| *o != Ordering::Equal).unwrap_or(Ordering::Equal)
        })
    });
    order
}

/// One-vs-one soft-margin SVM on a precomputed kernel; machines train in parallel.
pub fn svm_train(kernel: &KernelMatrix, labels: &[usize], c: f64) -> Result<SvmModel, LearningError> {
    if labels.len() != kernel.len() {
        return Err(LearningError::LengthMismatch(kernel.len(), labels.len()));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(LearningError::InvalidParam(format!("C must be positive, got {c}")));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(LearningError::SingleClass);
    }
    let order = canonical_order(kernel, labels);
    let pairs: Vec<(usize, usize)> =
        (0..classes.len()).flat_map(|a| (a + 1..classes.len()).map(move |b| (a, b))).collect();
    let machines = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (ca, cb) = (classes[a], classes[b]);
            let idx: Vec<usize> = order.iter().copied().filter(|&i| labels[i] == ca || labels[i] == cb).collect();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == ca { 1.0 } else { -1.0 }).collect();
            let sol = solve_binary(|p, q| kernel.get(idx[p], idx[q]), &y, c, false);
            let mut m = BinaryMachine { classes: (ca, cb), support: vec![], alpha: vec![], sign: vec![], bias: sol.bias };
            for (p, &a) in sol.alpha.iter().enumerate() {
                if a > 0.0 {
                    m.support.push(idx[p]);
                    m.alpha.push(a);
                    m.sign.push(y[p] as i8);
                }
            }
            m
        })
        .collect();
    Ok(SvmModel { version: MODEL_FORMAT_VERSION, kernel: kernel.kind, c, classes, n_train: labels.len(), machines })
}

impl SvmModel {
    /// Majority vote over pairwise machines; ties go to the smaller label.
    /// `row[t]` is the kernel value against training sample `t`.
    pub fn predict(&self, row: &[f64]) -> Result<usize, LearningError> {
        if row.len() != self.n_train {
            return Err(LearningError::LengthMismatch(self.n_train, row.len()));
        }
        let mut votes = vec![0usize; self.classes.len()];
        for m in &self.machines {
            let winner = if m.decision(row) >= 0.0 { m.classes.0 } else { m.classes.1 };
            votes[self.classes.binary_search(&winner).expect("machine class is a model class")] += 1;
        }
        let best = votes.iter().enumerate().fold(0, |b, (i, &v)| if v > votes[b] { i } else { b });
        Ok(self.classes[best])
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, LearningError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn validate(&self) -> Result<(), LearningError> {
        let bad = |s: String| Err(LearningError::Model(s));
        if self.version != MODEL_FORMAT_VERSION {
            return bad(format!("unsupported model version {}", self.version));
        }
        if !(self.c > 0.0) || self.classes.len() < 2 || self.classes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("bad C or class list".into());
        }
        if self.machines.len() != self.classes.len() * (self.classes.len() - 1) / 2 {
            return bad("machine count does not match class count".into());
        }
        for m in &self.machines {
            if m.support.len() != m.alpha.len() || m.support.len() != m.sign.len() {
                return bad("support tables of different lengths".into());
            }
            if m.support.iter().any(|&s| s >= self.n_train) || !m.bias.is_finite() {
                return bad("support index out of range".into());
            }
            if m.alpha.iter().any(|&a| !(a >= 0.0 && a <= self.c)) || m.sign.iter().any(|&s| s != 1 && s != -1) {
                return bad("dual coefficient outside [0, C]".into());
            }
            if self.classes.binary_search(&m.classes.0).is_err() || self.classes.binary_search(&m.classes.1).is_err() {
                return bad("machine refers to an unknown class".into());
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, LearningError> {
        let m: SvmModel = serde_json::from_str(text).map_err(|e| LearningError::Model(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }
}

/// Fraction of matching entries.
pub fn classify_accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64, LearningError> {
    if predictions.len() != truth.len() {
        return Err(LearningError::LengthMismatch(predictions.len(), truth.len()));
    }
    if truth.is_empty() {
        return Err(LearningError::Empty);
    }
    let correct = predictions.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(correct as f64 / truth.len() as f64)
}

/// Mean accuracy of stratified `folds`-fold cross-validation.
pub fn cross_validate(kernel: &KernelMatrix, labels: &[usize], c: f64, folds: usize, seed: u64) -> Result<f64, LearningError> {
    if folds < 2 {
        return Err(LearningError::InvalidParam("need at least two folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    for &cl in &classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == cl).collect();
        members.shuffle(&mut rng);
        for (r, &i) in members.iter().enumerate() {
            fold_of[i] = r % folds;
        }
    }
    let mut total = 0.0;
    let mut used = 0;
    for f in 0..folds {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] == f).collect();
        let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        if test.is_empty() || train_labels.iter().all(|&l| l == train_labels[0]) {
            continue;
        }
        let model = svm_train(&kernel.subset(&train), &train_labels, c)?;
        let preds: Vec<usize> = test
            .iter()
            .map(|&q| model.predict(&train.iter().map(|&t| kernel.get(q, t)).collect::<Vec<_>>()))
            .collect::<Result<_, _>>()?;
        total += classify_accuracy(&preds, &test.iter().map(|&i| labels[i]).collect::<Vec<_>>())?;
        used += 1;
    }
    if used == 0 {
        return Err(LearningError::InvalidParam("no usable fold".into()));
    }
    Ok(total / used as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{kernel_matrix, KernelKind};
    use proptest::prelude::*;
    use rand::Rng;

    fn train_rows(k: &KernelMatrix) -> Vec<Vec<f64>> {
        (0..k.len()).map(|i| k.row(i).to_vec()).collect()
    }

    #[test]
    fn separable_1d_hik() {
        let x: Vec<Vec<f64>> = [0.1, 0.2, 0.3, 0.35, 0.9, 1.0, 1.1, 1.4].iter().map(|&v| vec![v, 2.0 - v]).collect();
        let y = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let k = kernel_matrix(&x, KernelKind::Hik).unwrap();
        let model = svm_train(&k, &y, DEFAULT_C).unwrap();
        assert_eq!(model.predict_all(&train_rows(&k)).unwrap(), y);
        model.validate().unwrap();
    }

    #[test]
    fn conflicting_duplicates_terminate() {
        let x = vec![vec![1.0, 0.0]; 6];
        let y = vec![0, 1, 0, 1, 0, 1];
        let k = kernel_matrix(&x, KernelKind::Hik).unwrap();
        let model = svm_train(&k, &y, DEFAULT_C).unwrap();
        let acc = classify_accuracy(&model.predict_all(&train_rows(&k)).unwrap(), &y).unwrap();
        assert!(acc < 1.0);
    }

    #[test]
    fn errors() {
        let k = kernel_matrix(&[vec![1.0], vec![2.0]], KernelKind::Hik).unwrap();
        assert_eq!(svm_train(&k, &[3, 3], 1.0).unwrap_err(), LearningError::SingleClass);
        assert!(svm_train(&k, &[0, 1], 0.0).is_err());
        assert!(svm_train(&k, &[0], 1.0).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(classify_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(classify_accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(classify_accuracy(&[1, 2, 3, 4], &[1, 2, 3, 0]).unwrap(), 0.75);
        assert_eq!(classify_accuracy(&[], &[]), Err(LearningError::Empty));
        assert!(classify_accuracy(&[1], &[]).is_err());
    }

    /// Projected gradient ascent on the dual; the projection onto
    /// `{0 ≤ α ≤ C, yᵀα = 0}` is found by bisection on the multiplier.
    fn dual_oracle(k: &KernelMatrix, y: &[f64], c: f64) -> Vec<f64> {
        let n = y.len();
        let project = |v: &[f64]| -> Vec<f64> {
            let at = |nu: f64| -> Vec<f64> { v.iter().zip(y).map(|(a, yi)| (a - nu * yi).clamp(0.0, c)).collect() };
            let (mut lo, mut hi) = (-1e6, 1e6);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let s: f64 = at(mid).iter().zip(y).map(|(a, yi)| a * yi).sum();
                if s > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            at(0.5 * (lo + hi))
        };
        let lmax: f64 = (0..n).map(|i| (0..n).map(|j| k.get(i, j).abs()).sum::<f64>()).fold(0.0, f64::max);
        let step = 1.0 / lmax.max(1e-12);
        let mut a = vec![0.0; n];
        for _ in 0..200_000 {
            let g: Vec<f64> = (0..n).map(|i| 1.0 - y[i] * (0..n).map(|j| y[j] * a[j] * k.get(i, j)).sum::<f64>()).collect();
            let next = project(&a.iter().zip(&g).map(|(ai, gi)| ai + step * gi).collect::<Vec<_>>());
            let moved: f64 = next.iter().zip(&a).map(|(p, q)| (p - q).abs()).sum();
            a = next;
            if moved < 1e-13 {
                break;
            }
        }
        a
    }

    fn dual_value(k: &KernelMatrix, y: &[f64], a: &[f64]) -> f64 {
        let n = y.len();
        let quad: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| a[i] * a[j] * y[i] * y[j] * k.get(i, j)).sum();
        a.iter().sum::<f64>() - 0.5 * quad
    }

    #[test]
    fn three_class_toy_agrees_with_qp_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..5 {
            let mut x = Vec::new();
            let mut labels = Vec::new();
            for cl in 0..3 {
                for _ in 0..6 {
                    let centre = [cl as f64, 2.0 - cl as f64];
                    x.push(centre.iter().map(|c| (c + rng.gen_range(-0.9..0.9f64)).abs()).collect::<Vec<_>>());
                    labels.push(cl);
                }
            }
            let kind = if trial % 2 == 0 { KernelKind::Hik } else { KernelKind::Rbf { sigma: 0.7, power: 1.0 } };
            let k = kernel_matrix(&x, kind).unwrap();
            let c = 1.0;
            let model = svm_train(&k, &labels, c).unwrap();
            for m in &model.machines {
                let idx: Vec<usize> = (0..x.len()).filter(|&i| labels[i] == m.classes.0 || labels[i] == m.classes.1).collect();
                let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == m.classes.0 { 1.0 } else { -1.0 }).collect();
                let sub = k.subset(&idx);
                let oracle = dual_oracle(&sub, &y, c);
                let mut ours = vec![0.0; idx.len()];
                for (s, a) in m.support.iter().zip(&m.alpha) {
                    ours[idx.iter().position(|i| i == s).unwrap()] = *a;
                }
                let (d_ours, d_oracle) = (dual_value(&sub, &y, &ours), dual_value(&sub, &y, &oracle));
                assert!((d_ours - d_oracle).abs() < 1e-3 * d_oracle.abs().max(1.0), "{d_ours} vs {d_oracle}");
                // decisions agree on a probe grid away from the boundary
                let oracle_w = |row: &[f64]| idx.iter().zip(&oracle).zip(&y).map(|((&t, a), yy)| a * yy * row[t]).sum::<f64>();
                let ours_w = |row: &[f64]| m.decision(row) - m.bias;
                for gx in 0..10 {
                    for gy in 0..10 {
                        let p = vec![gx as f64 * 0.3, gy as f64 * 0.3];
                        let row: Vec<f64> = x.iter().map(|t| kind.eval(&p, t).unwrap()).collect();
                        assert!((oracle_w(&row) - ours_w(&row)).abs() < 0.05 * (1.0 + oracle_w(&row).abs()));
                    }
                }
            }
        }
    }

    #[test]
    fn dual_objective_never_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n = rng.gen_range(4..40);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
            let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 || rng.gen_bool(0.2) { 1.0 } else { -1.0 }).collect();
            let k = kernel_matrix(&x, KernelKind::Rbf { sigma: 0.3, power: 1.0 }).unwrap();
            let sol = solve_binary(|a, b| k.get(a, b), &y, 10.0, true);
            assert!(sol.violation < KKT_TOLERANCE);
            for w in sol.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0));
            }
            let s: f64 = sol.alpha.iter().zip(&y).map(|(a, yy)| a * yy).sum();
            assert!(s.abs() < 1e-6);
            assert!(sol.alpha.iter().all(|&a| (0.0..=10.0).contains(&a)));
        }
    }

    #[test]
    fn model_json_roundtrip() {
        let x: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64 / 9.0, 1.0 - i as f64 / 9.0]).collect();
        let y: Vec<usize> = (0..9).map(|i| i / 3).collect();
        let k = kernel_matrix(&x, KernelKind::Rbf { sigma: 0.5, power: 0.3 }).unwrap();
        let model = svm_train(&k, &y, 10.0).unwrap();
        let back = SvmModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        let mut broken = model.clone();
        broken.machines[0].alpha[0] = 11.0;
        assert!(SvmModel::from_json(&broken.to_json()).is_err());
        assert!(SvmModel::from_json("{").is_err());
    }

    #[test]
    fn cross_validation_on_clusters() {
        let x: Vec<Vec<f64>> = (0..24).map(|i| vec![(i / 8) as f64 + 0.01 * (i % 8) as f64, 1.0]).collect();
        let y: Vec<usize> = (0..24).map(|i| i / 8).collect();
        let k = kernel_matrix(&x, KernelKind::Rbf { sigma: 0.5, power: 1.0 }).unwrap();
        assert_eq!(cross_validate(&k, &y, 10.0, 3, 1).unwrap(), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn prediction_ignores_training_order(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(6..30);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
            let y: Vec<usize> = (0..n).map(|i| if i < 3 { i } else { rng.gen_range(0..3) }).collect();
            let probes: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| rng.gen::<f64>()).collect()).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
            let yp: Vec<usize> = perm.iter().map(|&i| y[i]).collect();
            let kind = KernelKind::Hik;
            let m1 = svm_train(&kernel_matrix(&x, kind).unwrap(), &y, 10.0).unwrap();
            let m2 = svm_train(&kernel_matrix(&xp, kind).unwrap(), &yp, 10.0).unwrap();
            let p1 = m1.predict_all(&crate::learning::cross_kernel(&probes, &x, kind).unwrap()).unwrap();
            let p2 = m2.predict_all(&crate::learning::cross_kernel(&probes, &xp, kind).unwrap()).unwrap();
            prop_assert_eq!(p1, p2);
        }
    }
}
