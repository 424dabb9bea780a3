//! Tree of shapes (topographic map) of a grayscale image.
//!
//! A shape is a hole-filled connected component of an upper level set
//! `[u >= l]` (8-connected, bright) or a lower level set `[u <= l]`
//! (4-connected, dark). Holes are complement components, under the dual
//! connectivity, that do not reach the image border. The domain is embedded
//! in an exterior at level `l_inf`, the lower median of the border values;
//! level-set components that touch the border and contain that exterior are
//! part of the root, which always covers the whole domain.

mod builder;
mod oracle;
mod prune;

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::GrayImage;

pub use builder::build_tree;
pub use oracle::{build_tree_bruteforce, ORACLE_MAX_PIXELS};
pub use prune::prune_by_area;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("brute-force tree limited to {max} pixels, image has {pixels}")]
    TooLargeForOracle { pixels: usize, max: usize },
    #[error("pixel set produced by both a bright and a dark level set")]
    PolarityConflict,
    #[error("malformed tree record: {0}")]
    BadRecord(String),
}

/// Whether a shape comes from an upper (bright) or lower (dark) level set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    #[serde(rename = "+")]
    Bright,
    #[serde(rename = "-")]
    Dark,
}

impl Polarity {
    pub fn symbol(self) -> char {
        match self {
            Polarity::Bright => '+',
            Polarity::Dark => '-',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '+' => Some(Polarity::Bright),
            '-' => Some(Polarity::Dark),
            _ => None,
        }
    }

    /// `[Bright, Dark]`, the canonical bucket order.
    pub const BOTH: [Polarity; 2] = [Polarity::Bright, Polarity::Dark];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub id: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Pixel count of the hole-filled shape.
    pub area: u64,
    /// Number of 4-adjacent pixel edges between the shape and its complement
    /// (the image border counts as complement).
    pub perimeter: u64,
    /// Gray level of the level line; equals the value of every proper pixel.
    pub level: u16,
    pub polarity: Polarity,
    /// Row-major indices of pixels whose smallest shape is this one.
    pub proper_pixels: Vec<u32>,
}

/// Rooted inclusion tree of shapes plus the per-pixel smallest shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTree {
    width: usize,
    height: usize,
    shapes: Vec<Shape>,
    root: usize,
    smallest_shape: Vec<u32>,
    exterior_level: u16,
    /// Breadth-first order from the root; parents precede children.
    order: Vec<u32>,
}

/// Compact serialisable form; everything else is re-derived on load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub width: usize,
    pub height: usize,
    pub exterior_level: u16,
    pub parents: Vec<Option<u32>>,
    pub levels: Vec<u16>,
    pub polarities: Vec<Polarity>,
    pub smallest_shape: Vec<u32>,
}

impl ShapeTree {
    /// Builds the derived fields (children, areas, proper pixels, perimeters)
    /// from a parent table and the smallest-shape map.
    pub(crate) fn assemble(
        width: usize,
        height: usize,
        exterior_level: u16,
        parents: Vec<Option<usize>>,
        levels: Vec<u16>,
        polarities: Vec<Polarity>,
        smallest_shape: Vec<u32>,
    ) -> Self {
        let count = parents.len();
        debug_assert_eq!(levels.len(), count);
        debug_assert_eq!(smallest_shape.len(), width * height);
        let root = parents
            .iter()
            .position(Option::is_none)
            .expect("tree has a root");

        let mut shapes: Vec<Shape> = (0..count)
            .map(|id| Shape {
                id,
                parent: parents[id],
                children: Vec::new(),
                area: 0,
                perimeter: 0,
                level: levels[id],
                polarity: polarities[id],
                proper_pixels: Vec::new(),
            })
            .collect();
        for id in 0..count {
            if let Some(p) = parents[id] {
                shapes[p].children.push(id);
            }
        }
        for (pixel, &s) in smallest_shape.iter().enumerate() {
            shapes[s as usize].proper_pixels.push(pixel as u32);
        }

        let mut order = Vec::with_capacity(count);
        let mut depth = vec![0u32; count];
        let mut queue = VecDeque::from([root]);
        while let Some(s) = queue.pop_front() {
            order.push(s as u32);
            for &c in &shapes[s].children {
                depth[c] = depth[s] + 1;
                queue.push_back(c);
            }
        }
        assert_eq!(order.len(), count, "parent table is not a single rooted tree");

        // perimeter by edge differences: an edge between pixels with smallest
        // shapes a and b lies on the boundary of every shape on the a..lca and
        // b..lca paths, excluding the lca itself
        let mut delta = vec![0i64; count];
        let lca = |mut a: usize, mut b: usize| {
            while depth[a] > depth[b] {
                a = parents[a].unwrap();
            }
            while depth[b] > depth[a] {
                b = parents[b].unwrap();
            }
            while a != b {
                a = parents[a].unwrap();
                b = parents[b].unwrap();
            }
            a
        };
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                let a = smallest_shape[i] as usize;
                let border_sides = (x == 0) as i64 + (x + 1 == width) as i64 + (y == 0) as i64 + (y + 1 == height) as i64;
                delta[a] += border_sides;
                let mut edge = |j: usize| {
                    let b = smallest_shape[j] as usize;
                    if a != b {
                        delta[a] += 1;
                        delta[b] += 1;
                        delta[lca(a, b)] -= 2;
                    }
                };
                if x + 1 < width {
                    edge(i + 1);
                }
                if y + 1 < height {
                    edge(i + width);
                }
            }
        }
        let mut area: Vec<u64> = shapes.iter().map(|s| s.proper_pixels.len() as u64).collect();
        for &s in order.iter().rev() {
            let s = s as usize;
            if let Some(p) = parents[s] {
                area[p] += area[s];
                delta[p] += delta[s];
            }
        }
        for s in 0..count {
            shapes[s].area = area[s];
            shapes[s].perimeter = delta[s] as u64;
        }

        Self { width, height, shapes, root, smallest_shape, exterior_level, order }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn shape(&self, id: usize) -> &Shape {
        &self.shapes[id]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Gray level assigned to the exterior of the domain.
    pub fn exterior_level(&self) -> u16 {
        self.exterior_level
    }

    /// Smallest shape id per pixel, row-major.
    pub fn smallest_shape(&self) -> &[u32] {
        &self.smallest_shape
    }

    /// Shape ids with every parent before its children.
    pub fn top_down(&self) -> impl DoubleEndedIterator<Item = usize> + '_ {
        self.order.iter().map(|&s| s as usize)
    }

    /// Walks `steps` parents up; `None` when the chain is shorter.
    pub fn ancestor(&self, id: usize, steps: usize) -> Option<usize> {
        let mut cur = id;
        for _ in 0..steps {
            cur = self.shapes[cur].parent?;
        }
        Some(cur)
    }

    /// Hole-filled pixel set of a shape (row-major indices, sorted).
    pub fn pixels(&self, id: usize) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.shapes[id].area as usize);
        let mut stack = vec![id];
        while let Some(s) = stack.pop() {
            out.extend_from_slice(&self.shapes[s].proper_pixels);
            stack.extend_from_slice(&self.shapes[s].children);
        }
        out.sort_unstable();
        out
    }

    /// Gray level of each pixel's smallest shape. Exact inverse of [`build_tree`].
    pub fn reconstruct(&self) -> GrayImage {
        let data = self
            .smallest_shape
            .iter()
            .map(|&s| self.shapes[s as usize].level)
            .collect();
        GrayImage::new(self.width, self.height, data).expect("tree dimensions are valid")
    }

    pub fn to_record(&self) -> TreeRecord {
        TreeRecord {
            width: self.width,
            height: self.height,
            exterior_level: self.exterior_level,
            parents: self.shapes.iter().map(|s| s.parent.map(|p| p as u32)).collect(),
            levels: self.shapes.iter().map(|s| s.level).collect(),
            polarities: self.shapes.iter().map(|s| s.polarity).collect(),
            smallest_shape: self.smallest_shape.clone(),
        }
    }

    pub fn from_record(record: TreeRecord) -> Result<Self, TreeError> {
        let n = record.parents.len();
        let bad = |m: &str| Err(TreeError::BadRecord(m.to_string()));
        if record.levels.len() != n || record.polarities.len() != n {
            return bad("per-shape tables disagree in length");
        }
        if record.width == 0 || record.height == 0 || record.width.checked_mul(record.height) != Some(record.smallest_shape.len()) {
            return bad("smallest-shape map does not match dimensions");
        }
        if record.parents.iter().filter(|p| p.is_none()).count() != 1 {
            return bad("tree must have exactly one root");
        }
        if record.parents.iter().flatten().any(|&p| p as usize >= n)
            || record.smallest_shape.iter().any(|&s| s as usize >= n)
        {
            return bad("shape index out of range");
        }
        // every shape must reach the root without cycles
        let mut state = vec![0u8; n];
        for start in 0..n {
            let mut path = Vec::new();
            let mut cur = start;
            loop {
                match state[cur] {
                    2 => break,
                    1 => return bad("parent cycle"),
                    _ => {}
                }
                state[cur] = 1;
                path.push(cur);
                match record.parents[cur] {
                    Some(p) => cur = p as usize,
                    None => break,
                }
            }
            for s in path {
                state[s] = 2;
            }
        }
        Ok(Self::assemble(
            record.width,
            record.height,
            record.exterior_level,
            record.parents.into_iter().map(|p| p.map(|p| p as usize)).collect(),
            record.levels,
            record.polarities,
            record.smallest_shape,
        ))
    }

    /// Canonical description independent of id assignment: for every shape
    /// its sorted pixel set, its parent's pixel set, polarity and level.
    pub fn signature(&self) -> Vec<(Vec<u32>, Option<Vec<u32>>, Polarity, u16)> {
        let sets: Vec<Vec<u32>> = (0..self.len()).map(|s| self.pixels(s)).collect();
        let mut out: Vec<_> = self
            .shapes
            .iter()
            .map(|s| (sets[s.id].clone(), s.parent.map(|p| sets[p].clone()), s.polarity, s.level))
            .collect();
        out.sort();
        out
    }

    /// Indented text dump, one shape per line: `id polarity area level parent`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![(self.root, 0usize)];
        while let Some((s, depth)) = stack.pop() {
            let shape = &self.shapes[s];
            let parent = shape.parent.map_or_else(|| "-".to_string(), |p| p.to_string());
            let _ = writeln!(
                out,
                "{:indent$}{} {} {} {} {}",
                "",
                s,
                shape.polarity.symbol(),
                shape.area,
                shape.level,
                parent,
                indent = 2 * depth
            );
            let mut kids = shape.children.clone();
            kids.sort_unstable_by(|a, b| b.cmp(a));
            stack.extend(kids.into_iter().map(|c| (c, depth + 1)));
        }
        out
    }

    /// Checks the structural invariants; used by tests and debug tooling.
    ///
    /// Pairwise nesting and per-shape connectivity checks are quadratic and
    /// only run when the image has at most `ORACLE_MAX_PIXELS` pixels.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.width * self.height;
        if self.shapes[self.root].area as usize != n {
            return Err("root does not cover the domain".into());
        }
        for s in &self.shapes {
            if let Some(p) = s.parent {
                if self.shapes[p].area <= s.area {
                    return Err(format!("shape {} not strictly smaller than parent {}", s.id, p));
                }
            }
            if s.id != self.root && s.proper_pixels.is_empty() {
                return Err(format!("shape {} has no proper pixel", s.id));
            }
        }
        if n > ORACLE_MAX_PIXELS {
            return Ok(());
        }
        let sets: Vec<Vec<bool>> = (0..self.len())
            .map(|s| {
                let mut m = vec![false; n];
                for p in self.pixels(s) {
                    m[p as usize] = true;
                }
                m
            })
            .collect();
        for a in 0..self.len() {
            for b in (a + 1)..self.len() {
                let inter = (0..n).any(|i| sets[a][i] && sets[b][i]);
                let a_in_b = (0..n).all(|i| !sets[a][i] || sets[b][i]);
                let b_in_a = (0..n).all(|i| !sets[b][i] || sets[a][i]);
                if inter && !a_in_b && !b_in_a {
                    return Err(format!("shapes {a} and {b} overlap without nesting"));
                }
            }
            if a == self.root {
                continue;
            }
            let shape = &self.shapes[a];
            let (conn, dual) = match shape.polarity {
                Polarity::Bright => (oracle::Connectivity::Eight, oracle::Connectivity::Four),
                Polarity::Dark => (oracle::Connectivity::Four, oracle::Connectivity::Eight),
            };
            let mask = &sets[a];
            let comps = oracle::label(self.width, self.height, mask, conn);
            if comps.len() != 1 {
                return Err(format!("shape {a} is not connected"));
            }
            let outside: Vec<bool> = mask.iter().map(|&m| !m).collect();
            for comp in oracle::label(self.width, self.height, &outside, dual) {
                if !oracle::touches_border(self.width, self.height, &comp) {
                    return Err(format!("shape {a} has a hole"));
                }
            }
        }
        Ok(())
    }
}
