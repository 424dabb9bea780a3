use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_dims, sq_dist, CodingError};

const MAX_ITER: usize = 300;
const REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
}

/// Index of the nearest centroid (smallest index on ties) and its squared distance.
pub fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans_fit(samples: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansFit, CodingError> {
    if k == 0 {
        return Err(CodingError::InvalidParam("k must be positive".into()));
    }
    if samples.len() < k {
        return Err(CodingError::InsufficientSamples { need: k, got: samples.len() });
    }
    let dim = check_dims(samples)?;
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids = vec![samples[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<f64> = samples.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if t < d {
                    chosen = i;
                    break;
                }
                t -= d;
            }
            // never pick a point already at zero distance
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap();
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = samples[pick].clone();
        for (i, x) in samples.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &c));
        }
        centroids.push(c);
    }

    let mut prev = f64::INFINITY;
    let mut inertia = f64::INFINITY;
    let mut iterations = 0;
    for it in 0..MAX_ITER {
        iterations = it + 1;
        let assign: Vec<(usize, f64)> = samples.par_iter().map(|x| nearest(x, &centroids)).collect();
        inertia = assign.iter().map(|a| a.1).sum();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &(c, _)) in samples.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut dist: Vec<f64> = assign.iter().map(|a| a.1).collect();
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed from the point farthest from its centroid
                let far = (0..n).fold(0, |b, i| if dist[i] > dist[b] { i } else { b });
                dist[far] = 0.0;
                centroids[c] = samples[far].clone();
            } else {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if inertia == 0.0 || (prev - inertia).abs() <= REL_TOL * prev {
            break;
        }
        prev = inertia;
    }
    Ok(KMeansFit { centroids, inertia, iterations })
}

/// Hard-assignment histogram: per centroid, the number of nearest samples.
pub fn kmeans_encode(samples: &[Vec<f64>], centroids: &[Vec<f64>]) -> Result<Vec<f64>, CodingError> {
    let dim = centroids.first().map_or(0, Vec::len);
    let mut hist = vec![0.0; centroids.len()];
    for x in samples {
        if x.len() != dim {
            return Err(CodingError::DimensionMismatch { expected: dim, got: x.len() });
        }
        hist[nearest(x, centroids).0] += 1.0;
    }
    Ok(hist)
}
