//! Shape co-occurrence patterns sampled from a (pruned) tree of shapes.
//!
//! Four patterns are supported: a single shape (SS), a shape with its r-th
//! ancestor (SA), shape, r-th ancestor and tau-th ancestor (SAG), and shape,
//! r-th ancestor and the area-closest shape sharing that ancestor (SAS).
//! Samples are bucketed by pattern and by the polarity of the anchor shape.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{AttributeVector, DEFAULT_FAMILY};
use crate::tree::{Polarity, ShapeTree};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("no tree to estimate the ancestor interval from")]
    EmptyCollection,
    #[error("invalid pattern configuration: {0}")]
    InvalidConfig(String),
    #[error("attribute table has {attrs} entries for {shapes} shapes")]
    AttributeMismatch { attrs: usize, shapes: usize },
    #[error("sample dump line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternKind {
    SS,
    SA,
    SAG,
    SAS,
}

impl PatternKind {
    pub const ALL: [PatternKind; 4] = [PatternKind::SS, PatternKind::SA, PatternKind::SAG, PatternKind::SAS];

    /// Number of shapes in the pattern.
    pub fn arity(self) -> usize {
        match self {
            PatternKind::SS => 1,
            PatternKind::SA => 2,
            PatternKind::SAG | PatternKind::SAS => 3,
        }
    }

    pub fn dim(self) -> usize {
        AttributeVector::DIM * self.arity()
    }

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::SS => "SS",
            PatternKind::SA => "SA",
            PatternKind::SAG => "SAG",
            PatternKind::SAS => "SAS",
        }
    }
}

impl std::fmt::Display for PatternKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PatternKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "SS" => Ok(PatternKind::SS),
            "SA" => Ok(PatternKind::SA),
            "SAG" => Ok(PatternKind::SAG),
            "SAS" => Ok(PatternKind::SAS),
            _ => Err(format!("unknown pattern `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternConfig {
    /// Ancestor interval.
    pub r: usize,
    pub tau_multiplier: usize,
    pub enabled: Vec<PatternKind>,
    /// Ancestor family size for the scale ratio.
    pub family: usize,
    pub a_min: u64,
    pub a_max: u64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            r: 1,
            tau_multiplier: 2,
            enabled: PatternKind::ALL.to_vec(),
            family: DEFAULT_FAMILY,
            a_min: 3,
            a_max: u64::MAX,
        }
    }
}

impl PatternConfig {
    pub fn tau(&self) -> usize {
        self.tau_multiplier * self.r
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        let bad = |m: &str| Err(PatternError::InvalidConfig(m.into()));
        if self.r < 1 {
            return bad("r must be at least 1");
        }
        if self.tau_multiplier < 2 {
            return bad("tau multiplier must be at least 2");
        }
        if self.family < 1 {
            return bad("family size must be at least 1");
        }
        if self.a_min < 1 || self.a_min > self.a_max {
            return bad("need 1 <= a_min <= a_max");
        }
        if self.enabled.is_empty() {
            return bad("no pattern enabled");
        }
        let mut sorted = self.enabled.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.enabled.len() {
            return bad("pattern listed twice");
        }
        Ok(())
    }

    /// Enabled patterns in canonical order.
    pub fn patterns(&self) -> Vec<PatternKind> {
        let mut p = self.enabled.clone();
        p.sort();
        p.dedup();
        p
    }
}

/// Samples of one (pattern, polarity) pair, ordered by anchor shape id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub pattern: PatternKind,
    pub polarity: Polarity,
    pub samples: Vec<Vec<f64>>,
}

/// All buckets of one image, in canonical order (SS, SA, SAG, SAS; + before -).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PatternBuckets {
    pub buckets: Vec<Bucket>,
}

impl PatternBuckets {
    pub fn empty(patterns: &[PatternKind]) -> Self {
        let mut p = patterns.to_vec();
        p.sort();
        p.dedup();
        let buckets = p
            .into_iter()
            .flat_map(|pattern| {
                Polarity::BOTH.into_iter().map(move |polarity| Bucket { pattern, polarity, samples: Vec::new() })
            })
            .collect();
        Self { buckets }
    }

    pub fn get(&self, pattern: PatternKind, polarity: Polarity) -> Option<&Bucket> {
        self.buckets.iter().find(|b| b.pattern == pattern && b.polarity == polarity)
    }

    fn get_mut(&mut self, pattern: PatternKind, polarity: Polarity) -> &mut Bucket {
        self.buckets
            .iter_mut()
            .find(|b| b.pattern == pattern && b.polarity == polarity)
            .expect("bucket exists for enabled pattern")
    }

    /// Sample count over both polarities of a pattern.
    pub fn count(&self, pattern: PatternKind) -> usize {
        self.buckets.iter().filter(|b| b.pattern == pattern).map(|b| b.samples.len()).sum()
    }

    /// Appends another image's samples bucket by bucket.
    pub fn extend(&mut self, other: &PatternBuckets) {
        for b in &other.buckets {
            match self.buckets.iter_mut().find(|x| x.pattern == b.pattern && x.polarity == b.polarity) {
                Some(x) => x.samples.extend(b.samples.iter().cloned()),
                None => self.buckets.push(b.clone()),
            }
        }
        self.buckets.sort_by_key(|b| (b.pattern, b.polarity));
    }
}

/// Per-shape interval: smallest i with `a(s^i) - a(s) > p(s)`, or the chain
/// length when no ancestor is large enough.
pub fn shape_interval(tree: &ShapeTree, id: usize) -> usize {
    let s = tree.shape(id);
    let mut cur = id;
    let mut steps = 0;
    while let Some(p) = tree.shape(cur).parent {
        steps += 1;
        if tree.shape(p).area - s.area > s.perimeter {
            return steps;
        }
        cur = p;
    }
    steps.max(1)
}

/// Sum of per-shape intervals and number of non-root shapes.
pub fn interval_sums(tree: &ShapeTree) -> (u64, u64) {
    let mut sum = 0;
    let mut count = 0;
    for s in tree.shapes() {
        if s.parent.is_some() {
            sum += shape_interval(tree, s.id) as u64;
            count += 1;
        }
    }
    (sum, count)
}

/// Interval from aggregated sums: mean rounded half-up, at least 1.
pub fn interval_from_sums(sum: u64, count: u64) -> usize {
    if count == 0 {
        return 1;
    }
    ((2 * sum + count) / (2 * count)).max(1) as usize
}

/// Dataset-level ancestor interval.
pub fn estimate_interval<'a>(trees: impl IntoIterator<Item = &'a ShapeTree>) -> Result<usize, PatternError> {
    let mut any = false;
    let (mut sum, mut count) = (0, 0);
    for t in trees {
        any = true;
        let (s, c) = interval_sums(t);
        sum += s;
        count += c;
    }
    if !any {
        return Err(PatternError::EmptyCollection);
    }
    Ok(interval_from_sums(sum, count))
}

/// Area-closest other member of each shape's r-th-ancestor group (smaller
/// id on ties); `None` for shapes without a co-member.
fn closest_siblings(tree: &ShapeTree, r: usize) -> Vec<Option<usize>> {
    let n = tree.len();
    let mut groups: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for s in 0..n {
        if let Some(a) = tree.ancestor(s, r) {
            groups.entry(a).or_default().push(s);
        }
    }
    let mut out = vec![None; n];
    let area = |s: usize| tree.shape(s).area;
    for (_, mut members) in groups {
        if members.len() < 2 {
            continue;
        }
        members.sort_by_key(|&s| (area(s), s));
        let m = members.len();
        let mut run_start = vec![0; m];
        for i in 1..m {
            run_start[i] = if area(members[i]) == area(members[i - 1]) { run_start[i - 1] } else { i };
        }
        for i in 0..m {
            let a = area(members[i]);
            let left = (i > 0).then(|| a - area(members[i - 1]));
            let right = (i + 1 < m).then(|| area(members[i + 1]) - a);
            let best = match (left, right) {
                (Some(l), Some(r)) => l.min(r),
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (None, None) => unreachable!(),
            };
            let mut candidates = Vec::new();
            if best == 0 {
                let j = if run_start[i] != i { run_start[i] } else { i + 1 };
                candidates.push(members[j]);
            } else {
                if left == Some(best) {
                    candidates.push(members[run_start[i - 1]]);
                }
                if right == Some(best) {
                    candidates.push(members[i + 1]);
                }
            }
            out[members[i]] = candidates.into_iter().min();
        }
    }
    out
}

/// Samples every enabled pattern from a tree and its attribute table.
pub fn extract_patterns(
    tree: &ShapeTree,
    attrs: &[AttributeVector],
    config: &PatternConfig,
) -> Result<PatternBuckets, PatternError> {
    config.validate()?;
    if attrs.len() != tree.len() {
        return Err(PatternError::AttributeMismatch { attrs: attrs.len(), shapes: tree.len() });
    }
    let patterns = config.patterns();
    let mut out = PatternBuckets::empty(&patterns);
    let siblings = if patterns.contains(&PatternKind::SAS) {
        closest_siblings(tree, config.r)
    } else {
        Vec::new()
    };
    let concat = |ids: &[usize]| -> Vec<f64> { ids.iter().flat_map(|&i| attrs[i].values()).collect() };
    for s in 0..tree.len() {
        let polarity = attrs[s].polarity;
        let anc = tree.ancestor(s, config.r);
        for &pattern in &patterns {
            let ids = match pattern {
                PatternKind::SS => Some(vec![s]),
                PatternKind::SA => anc.map(|a| vec![s, a]),
                PatternKind::SAG => anc.zip(tree.ancestor(s, config.tau())).map(|(a, g)| vec![s, a, g]),
                PatternKind::SAS => anc.zip(siblings[s]).map(|(a, b)| vec![s, a, b]),
            };
            if let Some(ids) = ids {
                out.get_mut(pattern, polarity).samples.push(concat(&ids));
            }
        }
    }
    Ok(out)
}

const DUMP_HEADER: &str = "scop-samples v1";

/// Text dump: a version header, then per bucket a
/// `bucket <pattern> <+|-> <count> <dim>` line followed by `count` rows.
pub fn write_sample_dump(buckets: &PatternBuckets) -> String {
    let mut out = format!("{DUMP_HEADER}\n");
    for b in &buckets.buckets {
        let _ = writeln!(out, "bucket {} {} {} {}", b.pattern, b.polarity.symbol(), b.samples.len(), b.pattern.dim());
        for row in &b.samples {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
    }
    out
}

pub fn parse_sample_dump(text: &str) -> Result<PatternBuckets, PatternError> {
    let err = |line: usize, reason: &str| PatternError::Parse { line, reason: reason.to_string() };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, DUMP_HEADER)) => {}
        _ => return Err(err(1, "missing `scop-samples v1` header")),
    }
    let mut out = PatternBuckets::default();
    while let Some((no, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "bucket" {
            return Err(err(no, "expected `bucket <pattern> <polarity> <count> <dim>`"));
        }
        let pattern: PatternKind = fields[1].parse().map_err(|e: String| err(no, &e))?;
        let mut pc = fields[2].chars();
        let polarity = match (pc.next().and_then(Polarity::from_symbol), pc.next()) {
            (Some(p), None) => p,
            _ => return Err(err(no, "polarity must be `+` or `-`")),
        };
        let count: usize = fields[3].parse().map_err(|_| err(no, "bad count"))?;
        let dim: usize = fields[4].parse().map_err(|_| err(no, "bad dimension"))?;
        if dim != pattern.dim() {
            return Err(err(no, "dimension does not match pattern"));
        }
        if out.get(pattern, polarity).is_some() {
            return Err(err(no, "duplicate bucket"));
        }
        let mut samples = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let (no, row) = lines.next().ok_or_else(|| err(no, "truncated bucket"))?;
            let values: Vec<f64> = row
                .split_whitespace()
                .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<_>>()
                .ok_or_else(|| err(no, "non-numeric or non-finite value"))?;
            if values.len() != dim {
                return Err(err(no, "row length does not match dimension"));
            }
            samples.push(values);
        }
        out.buckets.push(Bucket { pattern, polarity, samples });
    }
    let keys: Vec<_> = out.buckets.iter().map(|b| (b.pattern, b.polarity)).collect();
    if keys.windows(2).any(|w| w[0] >= w[1]) {
        return Err(err(0, "buckets out of canonical order"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::compute_attributes;
    use crate::imaging::GrayImage;
    use crate::tree::build_tree;
    use proptest::prelude::*;

    fn chain() -> (GrayImage, ShapeTree) {
        let image = GrayImage::from_fn(9, 9, |x, y| {
            let d = x.min(y).min(8 - x).min(8 - y);
            [0, 0, 100, 200, 200][d]
        });
        let tree = build_tree(&image);
        (image, tree)
    }

    fn star() -> (GrayImage, ShapeTree) {
        // four bright squares of different sizes on a dark ground
        let image = GrayImage::from_fn(20, 20, |x, y| {
            let inside = |x0: usize, y0: usize, s: usize| x >= x0 && x < x0 + s && y >= y0 && y < y0 + s;
            if inside(1, 1, 3) || inside(10, 1, 4) || inside(1, 10, 5) || inside(10, 10, 7) {
                9
            } else {
                0
            }
        });
        let tree = build_tree(&image);
        (image, tree)
    }

    fn config(r: usize) -> PatternConfig {
        PatternConfig { r, tau_multiplier: 2, a_min: 1, ..PatternConfig::default() }
    }

    #[test]
    fn chain_counts() {
        let (image, tree) = chain();
        let attrs = compute_attributes(&tree, &image, 3);
        let b = extract_patterns(&tree, &attrs, &config(1)).unwrap();
        assert_eq!(b.count(PatternKind::SS), 3);
        assert_eq!(b.count(PatternKind::SA), 2);
        assert_eq!(b.count(PatternKind::SAG), 1);
        assert_eq!(b.count(PatternKind::SAS), 0);
        assert_eq!(b.buckets.len(), 8);
    }

    #[test]
    fn star_pairs_every_child() {
        let (image, tree) = star();
        assert_eq!(tree.len(), 5);
        let attrs = compute_attributes(&tree, &image, 3);
        let b = extract_patterns(&tree, &attrs, &config(1)).unwrap();
        assert_eq!(b.count(PatternKind::SAS), 4);
        let sib = closest_siblings(&tree, 1);
        let by_area = |a: u64| tree.shapes().iter().find(|s| s.area == a).unwrap().id;
        assert_eq!(sib[by_area(9)], Some(by_area(16)));
        assert_eq!(sib[by_area(16)], Some(by_area(9)));
        assert_eq!(sib[by_area(25)], Some(by_area(16)));
        assert_eq!(sib[by_area(49)], Some(by_area(25)));
    }

    #[test]
    fn sibling_ties_prefer_smaller_id() {
        let image = GrayImage::from_fn(15, 5, |x, y| if y >= 1 && y <= 2 && x % 5 >= 1 && x % 5 <= 2 { 7 } else { 0 });
        let tree = build_tree(&image);
        let sib = closest_siblings(&tree, 1);
        let leaves: Vec<usize> = (0..tree.len()).filter(|&s| s != tree.root()).collect();
        assert_eq!(leaves.len(), 3);
        assert_eq!(sib[leaves[0]], Some(leaves[1]));
        assert_eq!(sib[leaves[1]], Some(leaves[0]));
        assert_eq!(sib[leaves[2]], Some(leaves[0]));
    }

    #[test]
    fn single_shape_sample_is_attribute_vector() {
        let (image, tree) = chain();
        let attrs = compute_attributes(&tree, &image, 3);
        let b = extract_patterns(&tree, &attrs, &config(1)).unwrap();
        let ss = b.get(PatternKind::SS, Polarity::Bright).unwrap();
        assert_eq!(ss.samples[0], attrs[0].values().to_vec());
    }

    #[test]
    fn interval_examples() {
        let (_, tree) = chain();
        // areas 81, 25, 9; perimeters 36, 20, 12
        assert_eq!(shape_interval(&tree, 2), 1);
        assert_eq!(shape_interval(&tree, 1), 1);
        assert_eq!(estimate_interval([&tree]).unwrap(), 1);
        assert!(matches!(estimate_interval(std::iter::empty()), Err(PatternError::EmptyCollection)));
        assert_eq!(interval_from_sums(5, 2), 3);
        assert_eq!(interval_from_sums(4, 3), 1);
    }

    #[test]
    fn interval_needs_grandparent() {
        // 2x2 (a=4, p=8) inside a 10-pixel ring region inside a 20+ region
        let image = GrayImage::from_rows(&[
            [0u16, 0, 0, 0, 0, 0, 0],
            [0, 5, 5, 5, 5, 5, 0],
            [0, 5, 8, 8, 8, 5, 0],
            [0, 5, 8, 9, 9, 5, 0],
            [0, 5, 8, 9, 9, 5, 0],
            [0, 5, 5, 5, 5, 5, 0],
            [0, 0, 0, 0, 0, 0, 0],
        ])
        .unwrap();
        let tree = build_tree(&image);
        let inner = tree.smallest_shape()[3 * 7 + 3] as usize;
        let s = tree.shape(inner);
        assert_eq!((s.area, s.perimeter), (4, 8));
        assert_eq!(tree.shape(s.parent.unwrap()).area, 9);
        assert_eq!(shape_interval(&tree, inner), 2);
    }

    #[test]
    fn config_validation() {
        assert!(PatternConfig::default().validate().is_ok());
        assert!(PatternConfig { r: 0, ..Default::default() }.validate().is_err());
        assert!(PatternConfig { tau_multiplier: 1, ..Default::default() }.validate().is_err());
        assert!(PatternConfig { enabled: vec![], ..Default::default() }.validate().is_err());
        assert!(PatternConfig { a_min: 10, a_max: 5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn dump_round_trip() {
        let (image, tree) = star();
        let attrs = compute_attributes(&tree, &image, 3);
        let b = extract_patterns(&tree, &attrs, &config(1)).unwrap();
        let text = write_sample_dump(&b);
        assert!(text.starts_with("scop-samples v1\nbucket SS + "));
        assert_eq!(parse_sample_dump(&text).unwrap(), b);
    }

    #[test]
    fn dump_errors() {
        assert!(parse_sample_dump("").is_err());
        assert!(parse_sample_dump("scop-samples v1\nbucket XX + 0 5\n").is_err());
        assert!(parse_sample_dump("scop-samples v1\nbucket SS + 1 5\n1 2 3\n").is_err());
        assert!(parse_sample_dump("scop-samples v1\nbucket SS + 2 5\n1 2 3 4 5\n").is_err());
        assert!(parse_sample_dump("scop-samples v1\nbucket SS + 1 5\n1 2 NaN 4 5\n").is_err());
        assert!(parse_sample_dump("scop-samples v1\nbucket SA + 0 10\nbucket SS + 0 5\n").is_err());
    }

    proptest! {
        #[test]
        fn counts_and_partition(data in proptest::collection::vec(0u16..5, 144), r in 1usize..4) {
            let image = GrayImage::new(12, 12, data).unwrap();
            let tree = build_tree(&image);
            let attrs = compute_attributes(&tree, &image, 3);
            let b = extract_patterns(&tree, &attrs, &config(r)).unwrap();
            prop_assert_eq!(b.count(PatternKind::SS), tree.len());
            prop_assert!(b.count(PatternKind::SA) <= b.count(PatternKind::SS));
            prop_assert!(b.count(PatternKind::SAG) <= b.count(PatternKind::SA));
            prop_assert!(b.count(PatternKind::SAS) <= b.count(PatternKind::SA));
            let plus = b.get(PatternKind::SS, Polarity::Bright).unwrap().samples.len();
            let bright = attrs.iter().filter(|a| a.polarity == Polarity::Bright).count();
            prop_assert_eq!(plus, bright);
            for bucket in &b.buckets {
                for row in &bucket.samples {
                    prop_assert_eq!(row.len(), bucket.pattern.dim());
                }
            }
            prop_assert_eq!(parse_sample_dump(&write_sample_dump(&b)).unwrap(), b);
        }
    }
}
