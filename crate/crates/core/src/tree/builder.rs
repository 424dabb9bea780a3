//! Quasi-linear tree of shapes construction.
//!
//! Gray levels are rank-compressed and the image is padded with a one pixel
//! ring at the exterior level. A max-interpolation on the doubled grid makes
//! the image well-composed for (8 upper, 4 lower) connectivity, and the
//! result is immersed into a Khalimsky grid where every non-pixel face holds
//! the span of its neighbours. Propagation from the exterior with a
//! hierarchical queue yields a flattened function whose max-tree, computed
//! by union-find in reverse order, is the tree of shapes.

use super::{Polarity, ShapeTree};
use crate::imaging::GrayImage;

const UNSET: u32 = u32::MAX;

struct Grid {
    width: usize,
    height: usize,
}

impl Grid {
    #[inline]
    fn neighbors(&self, p: usize, mut f: impl FnMut(usize)) {
        let x = p % self.width;
        let y = p / self.width;
        if y > 0 {
            f(p - self.width);
        }
        if x > 0 {
            f(p - 1);
        }
        if x + 1 < self.width {
            f(p + 1);
        }
        if y + 1 < self.height {
            f(p + self.width);
        }
    }
}

/// Lower median of the values on the outer ring of pixels.
pub(crate) fn exterior_level_of<T: Copy + Ord>(width: usize, height: usize, value: impl Fn(usize, usize) -> T) -> T {
    let mut border = Vec::with_capacity(2 * (width + height));
    for y in 0..height {
        for x in 0..width {
            if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                border.push(value(x, y));
            }
        }
    }
    border.sort_unstable();
    border[(border.len() - 1) / 2]
}

fn find(zpar: &mut [u32], mut p: u32) -> u32 {
    while zpar[p as usize] != p {
        let gp = zpar[zpar[p as usize] as usize];
        zpar[p as usize] = gp;
        p = gp;
    }
    p
}

/// Builds the tree of shapes. Shape ids follow a top-down traversal, so the
/// root is id 0 and every parent id is smaller than its children's.
pub fn build_tree(image: &GrayImage) -> ShapeTree {
    let (w, h) = (image.width(), image.height());
    let levels = image.levels();
    let mut rank_of = vec![0u32; levels.last().map_or(1, |&m| m as usize + 1)];
    for (r, &v) in levels.iter().enumerate() {
        rank_of[v as usize] = r as u32;
    }
    let rank = |x: usize, y: usize| rank_of[image.get(x, y) as usize];
    let exterior = exterior_level_of(w, h, rank);

    // padded image, then max-interpolation onto the doubled grid
    let (pw, ph) = (w + 2, h + 2);
    let padded = |x: usize, y: usize| {
        if x == 0 || y == 0 || x == pw - 1 || y == ph - 1 {
            exterior
        } else {
            rank(x - 1, y - 1)
        }
    };
    let (fw, fh) = (2 * pw - 1, 2 * ph - 1);
    let mut f = vec![0u32; fw * fh];
    for fy in 0..fh {
        for fx in 0..fw {
            let (x, y) = (fx / 2, fy / 2);
            f[fy * fw + fx] = match (fx % 2, fy % 2) {
                (0, 0) => padded(x, y),
                (1, 0) => padded(x, y).max(padded(x + 1, y)),
                (0, 1) => padded(x, y).max(padded(x, y + 1)),
                _ => padded(x, y)
                    .max(padded(x + 1, y))
                    .max(padded(x, y + 1))
                    .max(padded(x + 1, y + 1)),
            };
        }
    }

    // Khalimsky immersion: faces carry the [min, max] span of adjacent values
    let (kw, kh) = (2 * fw - 1, 2 * fh - 1);
    let n = kw * kh;
    let mut lo = vec![0u32; n];
    let mut hi = vec![0u32; n];
    for ky in 0..kh {
        for kx in 0..kw {
            let (x, y) = (kx / 2, ky / 2);
            let at = |dx: usize, dy: usize| f[(y + dy) * fw + x + dx];
            let (a, b) = match (kx % 2, ky % 2) {
                (0, 0) => (at(0, 0), at(0, 0)),
                (1, 0) => {
                    let (p, q) = (at(0, 0), at(1, 0));
                    (p.min(q), p.max(q))
                }
                (0, 1) => {
                    let (p, q) = (at(0, 0), at(0, 1));
                    (p.min(q), p.max(q))
                }
                _ => {
                    let v = [at(0, 0), at(1, 0), at(0, 1), at(1, 1)];
                    (*v.iter().min().unwrap(), *v.iter().max().unwrap())
                }
            };
            let i = ky * kw + kx;
            lo[i] = a;
            hi[i] = b;
        }
    }
    drop(f);

    // propagation from the exterior with a hierarchical queue
    let grid = Grid { width: kw, height: kh };
    let nlev = levels.len();
    let mut queues: Vec<Vec<u32>> = vec![Vec::new(); nlev];
    let mut queued = 1usize;
    let mut seen = vec![false; n];
    let mut flat = vec![0u32; n];
    let mut order: Vec<u32> = Vec::with_capacity(n);
    queues[exterior as usize].push(0);
    seen[0] = true;
    let mut cur = exterior as usize;
    while queued > 0 {
        if queues[cur].is_empty() {
            cur = closest_non_empty(&queues, cur);
        }
        let p = queues[cur].pop().unwrap() as usize;
        queued -= 1;
        flat[p] = cur as u32;
        order.push(p as u32);
        grid.neighbors(p, |q| {
            if !seen[q] {
                seen[q] = true;
                let l = (cur as u32).clamp(lo[q], hi[q]);
                queues[l as usize].push(q as u32);
                queued += 1;
            }
        });
    }
    drop((lo, hi, seen, queues));

    // max-tree of the flattened function: reverse-order union-find
    let mut parent = vec![0u32; n];
    let mut zpar = vec![UNSET; n];
    for &p in order.iter().rev() {
        parent[p as usize] = p;
        zpar[p as usize] = p;
        grid.neighbors(p as usize, |q| {
            if zpar[q] != UNSET {
                let r = find(&mut zpar, q as u32);
                if r != p {
                    parent[r as usize] = p;
                    zpar[r as usize] = p;
                }
            }
        });
    }
    drop(zpar);
    let root = order[0] as usize;
    for &p in &order {
        let p = p as usize;
        let q = parent[p] as usize;
        if flat[parent[q] as usize] == flat[q] {
            parent[p] = parent[q];
        }
    }
    let canonical = |p: usize| p == root || flat[parent[p] as usize] != flat[p];
    let node_of = |p: usize| if canonical(p) { p } else { parent[p] as usize };

    // restrict to original pixels: a K node survives if it owns pixels or
    // joins at least two pixel-bearing branches
    let kindex = |x: usize, y: usize| 4 * (y + 1) * kw + 4 * (x + 1);
    let mut own = vec![0u32; n];
    let mut pixel_node = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let node = node_of(kindex(x, y));
            own[node] += 1;
            pixel_node.push(node as u32);
        }
    }
    let mut subtree = own.clone();
    let mut bearing_children = vec![0u32; n];
    for &p in order.iter().rev() {
        let p = p as usize;
        if p != root && canonical(p) && subtree[p] > 0 {
            let up = parent[p] as usize;
            subtree[up] += subtree[p];
            bearing_children[up] += 1;
        }
    }
    let kept = |p: usize| p == root || (subtree[p] > 0 && (own[p] > 0 || bearing_children[p] >= 2));

    let mut id = vec![UNSET; n];
    let mut kept_anc = vec![UNSET; n];
    let mut parents: Vec<Option<usize>> = Vec::new();
    let mut shape_levels: Vec<u16> = Vec::new();
    let mut polarities: Vec<Polarity> = Vec::new();
    for &p in &order {
        let p = p as usize;
        if !canonical(p) {
            continue;
        }
        let anc = if p == root {
            UNSET
        } else {
            let up = parent[p] as usize;
            if kept(up) {
                up as u32
            } else {
                kept_anc[up]
            }
        };
        kept_anc[p] = anc;
        if !kept(p) {
            continue;
        }
        id[p] = parents.len() as u32;
        let level = levels[flat[p] as usize];
        if anc == UNSET {
            parents.push(None);
            polarities.push(Polarity::Bright);
        } else {
            let pid = id[anc as usize] as usize;
            parents.push(Some(pid));
            polarities.push(if level > shape_levels[pid] { Polarity::Bright } else { Polarity::Dark });
        }
        shape_levels.push(level);
    }
    let smallest = pixel_node.iter().map(|&p| id[p as usize]).collect();
    ShapeTree::assemble(w, h, levels[exterior as usize], parents, shape_levels, polarities, smallest)
}

/// Nearest level with a non-empty queue; ties go to the upper level.
fn closest_non_empty(queues: &[Vec<u32>], cur: usize) -> usize {
    for d in 1..queues.len() {
        if cur + d < queues.len() && !queues[cur + d].is_empty() {
            return cur + d;
        }
        if d <= cur && !queues[cur - d].is_empty() {
            return cur - d;
        }
    }
    unreachable!("called with every queue empty")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(rows: &[&[u16]]) -> GrayImage {
        GrayImage::from_rows(rows).unwrap()
    }

    #[test]
    fn constant_image_is_a_single_root() {
        let tree = build_tree(&GrayImage::from_fn(6, 4, |_, _| 17));
        assert_eq!(tree.len(), 1);
        let root = tree.shape(tree.root());
        assert_eq!((root.area, root.level, root.parent), (24, 17, None));
        assert_eq!(root.polarity, Polarity::Bright);
        assert_eq!(root.perimeter, 20);
    }

    #[test]
    fn isolated_bright_pixel() {
        let tree = build_tree(&img(&[&[0, 5, 0]]));
        assert_eq!(tree.len(), 2);
        let leaf = tree.shape(1);
        assert_eq!(leaf.parent, Some(0));
        assert_eq!((leaf.area, leaf.level, leaf.polarity), (1, 5, Polarity::Bright));
        assert_eq!(leaf.proper_pixels, vec![1]);
    }

    #[test]
    fn diagonal_pair_is_one_bright_shape() {
        let tree = build_tree(&img(&[&[0, 1], &[1, 0]]));
        assert_eq!(tree.exterior_level(), 0);
        assert_eq!(tree.len(), 2);
        let leaf = tree.shape(1);
        assert_eq!((leaf.area, leaf.polarity, leaf.level), (2, Polarity::Bright, 1));
        assert_eq!(tree.pixels(1), vec![1, 2]);
    }

    #[test]
    fn nested_squares_form_a_chain() {
        let image = GrayImage::from_fn(9, 9, |x, y| {
            let d = x.min(y).min(8 - x).min(8 - y);
            [10, 10, 200, 200, 10][d]
        });
        let tree = build_tree(&image);
        assert_eq!(tree.len(), 3);
        let areas: Vec<u64> = tree.top_down().map(|s| tree.shape(s).area).collect();
        assert_eq!(areas, vec![81, 25, 1]);
        let pols: Vec<Polarity> = tree.top_down().skip(1).map(|s| tree.shape(s).polarity).collect();
        assert_eq!(pols, vec![Polarity::Bright, Polarity::Dark]);
        assert_eq!(tree.shape(1).perimeter, 20);
        assert_eq!(tree.reconstruct(), image);
    }

    #[test]
    fn ids_are_top_down() {
        let image = GrayImage::from_fn(12, 9, |x, y| ((x * 7 + y * 13) % 5) as u16);
        let tree = build_tree(&image);
        assert_eq!(tree.root(), 0);
        for s in tree.shapes() {
            if let Some(p) = s.parent {
                assert!(p < s.id);
            }
        }
        tree.validate().unwrap();
    }

    fn same_structure(a: &ShapeTree, b: &ShapeTree) -> bool {
        let strip = |t: &ShapeTree| {
            t.signature()
                .into_iter()
                .map(|(set, parent, pol, _)| (set, parent, pol))
                .collect::<Vec<_>>()
        };
        strip(a) == strip(b)
    }

    proptest::proptest! {
        #[test]
        fn contrast_change_keeps_shapes(
            data in proptest::collection::vec(0u16..8, 100),
            steps in proptest::collection::vec(1u16..500, 8),
        ) {
            let image = GrayImage::new(10, 10, data).unwrap();
            let mut lut = vec![0u16; 8];
            let mut acc = 0u16;
            for (v, s) in steps.iter().enumerate() {
                acc += s;
                lut[v] = acc;
            }
            let mapped = crate::imaging::apply_contrast(&image, &lut).unwrap();
            let (a, b) = (build_tree(&image), build_tree(&mapped));
            proptest::prop_assert!(same_structure(&a, &b));
            for s in a.shapes() {
                proptest::prop_assert_eq!(lut[s.level as usize], b.shape(s.id).level);
            }
        }

        #[test]
        fn polarity_follows_parent_level(data in proptest::collection::vec(0u16..5, 120)) {
            let tree = build_tree(&GrayImage::new(12, 10, data).unwrap());
            for s in tree.shapes() {
                if let Some(p) = s.parent {
                    let p = tree.shape(p);
                    proptest::prop_assert_ne!(s.level, p.level);
                    let expected = if s.level > p.level { Polarity::Bright } else { Polarity::Dark };
                    proptest::prop_assert_eq!(s.polarity, expected);
                    for &px in &s.proper_pixels {
                        proptest::prop_assert_eq!(tree.reconstruct().pixels()[px as usize], s.level);
                    }
                }
            }
        }
    }

    #[test]
    fn exterior_is_lower_median() {
        assert_eq!(exterior_level_of(3, 1, |x, _| [0, 5, 0][x]), 0);
        assert_eq!(exterior_level_of(2, 2, |x, y| [[0, 1], [1, 0]][y][x]), 0);
        assert_eq!(exterior_level_of(4, 1, |x, _| [4, 3, 2, 1][x]), 2);
    }
}
