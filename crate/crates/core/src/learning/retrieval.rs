use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LearningError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseDistance {
    /// `1 − Σ min(x̂, ŷ)` on L1-normalised vectors (`½‖x̂ − ŷ‖₁`).
    OneMinusHik,
    /// Euclidean distance on `sign(x)|x|^power`.
    Euclidean { power: f64 },
}

/// Dense symmetric distance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self, LearningError> {
        if values.len() != n * n {
            return Err(LearningError::LengthMismatch(n * n, values.len()));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(LearningError::InvalidParam("distances must be nonnegative".into()));
        }
        Ok(DistanceMatrix { n, values })
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

    /// Every other item ordered by distance from `q`, ties by index.
    pub fn ranking(&self, q: usize) -> Vec<usize> {
        let mut others: Vec<usize> = (0..self.n).filter(|&j| j != q).collect();
        others.sort_by(|&a, &b| self.get(q, a).total_cmp(&self.get(q, b)).then(a.cmp(&b)));
        others
    }
}

pub fn base_distances(descriptors: &[Vec<f64>], base: BaseDistance) -> Result<DistanceMatrix, LearningError> {
    let len = descriptors.first().map_or(0, Vec::len);
    if let Some(d) = descriptors.iter().find(|d| d.len() != len) {
        return Err(LearningError::LengthMismatch(len, d.len()));
    }
    let prepared: Vec<Vec<f64>> = match base {
        BaseDistance::OneMinusHik => descriptors
            .iter()
            .map(|d| {
                if let Some(&v) = d.iter().find(|v| !(**v >= 0.0)) {
                    return Err(LearningError::NegativeEntry(v));
                }
                let s: f64 = d.iter().sum();
                Ok(if s > 0.0 { d.iter().map(|v| v / s).collect() } else { d.clone() })
            })
            .collect::<Result<_, _>>()?,
        BaseDistance::Euclidean { power } => {
            descriptors.iter().map(|d| crate::coding::power_transform(d, power)).collect()
        }
    };
    let n = descriptors.len();
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        match base {
            BaseDistance::OneMinusHik => 0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>(),
            BaseDistance::Euclidean { .. } => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    };
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let p = &prepared;
            (0..n).map(move |j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                if a == b {
                    0.0
                } else {
                    dist(&p[a], &p[b])
                }
            })
        })
        .collect();
    Ok(DistanceMatrix { n, values })
}

#[derive(Debug, Clone)]
pub struct RetrievalIndex {
    pub k: usize,
    pub base: DistanceMatrix,
    /// Adjacency of the symmetric k-NN graph, sorted by neighbour index.
    pub neighbors: Vec<Vec<usize>>,
    pub geodesic: DistanceMatrix,
    /// Connected-component label of each item.
    pub component: Vec<usize>,
}

#[derive(PartialEq, PartialOrd)]
struct Dist(f64);

impl Eq for Dist {}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn dijkstra(source: usize, adj: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Dist(0.0), source)));
    while let Some(Reverse((Dist(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((Dist(nd), v)));
            }
        }
    }
    dist
}

impl RetrievalIndex {
    /// Geodesic index over a precomputed base distance. Edge weights are
    /// the symmetrised base distance `max(d(i,j), d(j,i))`.
    pub fn from_base(base: DistanceMatrix, k: usize) -> Result<Self, LearningError> {
        let n = base.len();
        if n < 2 {
            return Err(LearningError::InvalidParam("need at least two items".into()));
        }
        if k == 0 {
            return Err(LearningError::InvalidParam("k must be at least 1".into()));
        }
        let mut neighbors = vec![Vec::new(); n];
        for i in 0..n {
            for &j in base.ranking(i).iter().take(k) {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
        }
        let adj: Vec<Vec<(usize, f64)>> = neighbors
            .iter()
            .enumerate()
            .map(|(i, nb)| nb.iter().map(|&j| (j, base.get(i, j).max(base.get(j, i)))).collect())
            .collect();
        let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(s, &adj)).collect();
        let mut component = vec![usize::MAX; n];
        for (s, row) in rows.iter().enumerate() {
            if component[s] == usize::MAX {
                for (t, d) in row.iter().enumerate() {
                    if d.is_finite() {
                        component[t] = s;
                    }
                }
            }
        }
        let max_finite = rows.iter().flatten().cloned().filter(|d| d.is_finite()).fold(0.0, f64::max);
        let mut values: Vec<f64> = rows.into_iter().flatten().map(|d| if d.is_finite() { d } else { 1.0 + max_finite }).collect();
        // exact symmetry regardless of summation order along paths
        for i in 0..n {
            for j in 0..i {
                let m = values[i * n + j].min(values[j * n + i]);
                values[i * n + j] = m;
                values[j * n + i] = m;
            }
        }
        Ok(RetrievalIndex { k, base, neighbors, geodesic: DistanceMatrix { n, values }, component })
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn connected(&self, i: usize, j: usize) -> bool {
        self.component[i] == self.component[j]
    }

    /// Items ranked by geodesic distance from `q` (disconnected ones last).
    pub fn query(&self, q: usize) -> Vec<usize> {
        self.geodesic.ranking(q)
    }
}

/// Symmetric k-NN graph over the base distance, then all-pairs shortest paths.
pub fn geodesic_index(descriptors: &[Vec<f64>], base: BaseDistance, k: usize) -> Result<RetrievalIndex, LearningError> {
    RetrievalIndex::from_base(base_distances(descriptors, base)?, k)
}

/// Mean recall over all queries for `N_r = 0..=nr_max` (clamped to `n − 1`).
pub fn recall_curve(dist: &DistanceMatrix, labels: &[usize], nr_max: usize) -> Result<Vec<f64>, LearningError> {
    let n = dist.len();
    if labels.len() != n {
        return Err(LearningError::LengthMismatch(n, labels.len()));
    }
    if n == 0 {
        return Err(LearningError::Empty);
    }
    let mut sizes = std::collections::BTreeMap::new();
    for &l in labels {
        *sizes.entry(l).or_insert(0usize) += 1;
    }
    if let Some((&l, _)) = sizes.iter().find(|(_, &c)| c < 2) {
        return Err(LearningError::SingletonClass(l));
    }
    let nr_max = nr_max.min(n - 1);
    let per_query: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|q| {
            let relevant = (sizes[&labels[q]] - 1) as f64;
            let mut hits = 0usize;
            let mut curve = vec![0.0; nr_max + 1];
            for (r, &j) in dist.ranking(q).iter().take(nr_max).enumerate() {
                hits += (labels[j] == labels[q]) as usize;
                curve[r + 1] = hits as f64 / relevant;
            }
            curve
        })
        .collect();
    Ok((0..=nr_max).map(|r| per_query.iter().map(|c| c[r]).sum::<f64>() / n as f64).collect())
}

pub fn recall_curve_csv(curve: &[f64]) -> String {
    let mut s = String::from("n_r,mean_recall\n");
    for (r, v) in curve.iter().enumerate() {
        writeln!(s, "{r},{v}").unwrap();
    }
    s
}
