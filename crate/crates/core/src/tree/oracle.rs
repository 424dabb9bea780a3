//! Brute-force tree of shapes straight from the definition: enumerate every
//! level-set component, fill its holes, deduplicate, and order by inclusion.
//! Quadratic in the number of pixels; reserved for tests on small images.

use std::collections::HashMap;

use super::builder::exterior_level_of;
use super::{Polarity, ShapeTree, TreeError};
use crate::imaging::GrayImage;

pub const ORACLE_MAX_PIXELS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Connectivity {
    Four,
    Eight,
}

const N4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
const N8: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

fn flood(width: usize, height: usize, mask: &[bool], seeds: &[usize], conn: Connectivity, visited: &mut [bool]) -> Vec<u32> {
    let offsets: &[(isize, isize)] = if conn == Connectivity::Four { &N4 } else { &N8 };
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for &s in seeds {
        if mask[s] && !visited[s] {
            visited[s] = true;
            stack.push(s);
        }
    }
    while let Some(p) = stack.pop() {
        out.push(p as u32);
        let (x, y) = ((p % width) as isize, (p / width) as isize);
        for &(dx, dy) in offsets {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                continue;
            }
            let q = ny as usize * width + nx as usize;
            if mask[q] && !visited[q] {
                visited[q] = true;
                stack.push(q);
            }
        }
    }
    out
}

/// Connected components of `mask`.
pub(crate) fn label(width: usize, height: usize, mask: &[bool], conn: Connectivity) -> Vec<Vec<u32>> {
    let mut visited = vec![false; mask.len()];
    let mut comps = Vec::new();
    for p in 0..mask.len() {
        if mask[p] && !visited[p] {
            comps.push(flood(width, height, mask, &[p], conn, &mut visited));
        }
    }
    comps
}

pub(crate) fn touches_border(width: usize, height: usize, comp: &[u32]) -> bool {
    comp.iter().any(|&p| {
        let (x, y) = (p as usize % width, p as usize / width);
        x == 0 || y == 0 || x + 1 == width || y + 1 == height
    })
}

/// Component plus every complement pixel not reachable from the border.
fn fill_holes(width: usize, height: usize, comp: &[u32], dual: Connectivity) -> Vec<bool> {
    let n = width * height;
    let mut inside = vec![false; n];
    for &p in comp {
        inside[p as usize] = true;
    }
    let outside: Vec<bool> = inside.iter().map(|&b| !b).collect();
    let border: Vec<usize> = (0..n)
        .filter(|&p| {
            let (x, y) = (p % width, p / width);
            x == 0 || y == 0 || x + 1 == width || y + 1 == height
        })
        .collect();
    let mut reached = vec![false; n];
    flood(width, height, &outside, &border, dual, &mut reached);
    reached.iter().map(|&r| !r).collect()
}

fn bitset(mask: &[bool]) -> Vec<u64> {
    let mut bits = vec![0u64; mask.len().div_ceil(64)];
    for (i, &m) in mask.iter().enumerate() {
        if m {
            bits[i / 64] |= 1 << (i % 64);
        }
    }
    bits
}

fn is_subset(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & !y == 0)
}

/// Reference construction for images with at most [`ORACLE_MAX_PIXELS`]
/// pixels. Ids are sorted by (area, smallest pixel index); the root is last.
pub fn build_tree_bruteforce(image: &GrayImage) -> Result<ShapeTree, TreeError> {
    let (w, h) = (image.width(), image.height());
    let n = w * h;
    if n > ORACLE_MAX_PIXELS {
        return Err(TreeError::TooLargeForOracle { pixels: n, max: ORACLE_MAX_PIXELS });
    }
    let exterior = exterior_level_of(w, h, |x, y| image.get(x, y));
    let px = image.pixels();

    // pixel set -> (polarity, level)
    let mut family: HashMap<Vec<u64>, (Polarity, u16)> = HashMap::new();
    let mut add = |set: Vec<bool>, pol: Polarity, level: u16| -> Result<(), TreeError> {
        let key = bitset(&set);
        match family.get_mut(&key) {
            None => {
                family.insert(key, (pol, level));
            }
            Some((p, l)) => {
                if *p != pol {
                    return Err(TreeError::PolarityConflict);
                }
                *l = match pol {
                    Polarity::Bright => (*l).max(level),
                    Polarity::Dark => (*l).min(level),
                };
            }
        }
        Ok(())
    };

    for level in image.levels() {
        let upper: Vec<bool> = px.iter().map(|&v| v >= level).collect();
        for comp in label(w, h, &upper, Connectivity::Eight) {
            if touches_border(w, h, &comp) && level <= exterior {
                continue;
            }
            add(fill_holes(w, h, &comp, Connectivity::Four), Polarity::Bright, level)?;
        }
        let lower: Vec<bool> = px.iter().map(|&v| v <= level).collect();
        for comp in label(w, h, &lower, Connectivity::Four) {
            if touches_border(w, h, &comp) && level >= exterior {
                continue;
            }
            add(fill_holes(w, h, &comp, Connectivity::Eight), Polarity::Dark, level)?;
        }
    }

    let mut shapes: Vec<(u32, u32, Vec<u64>, Polarity, u16)> = family
        .into_iter()
        .map(|(bits, (pol, level))| {
            let area = bits.iter().map(|b| b.count_ones()).sum::<u32>();
            let first = bits
                .iter()
                .enumerate()
                .find(|(_, &b)| b != 0)
                .map(|(i, b)| i as u32 * 64 + b.trailing_zeros())
                .unwrap_or(0);
            (area, first, bits, pol, level)
        })
        .collect();
    shapes.push((n as u32, 0, bitset(&vec![true; n]), Polarity::Bright, exterior));
    shapes.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let count = shapes.len();
    let mut parents = vec![None; count];
    for i in 0..count - 1 {
        parents[i] = (i + 1..count).find(|&j| shapes[j].0 > shapes[i].0 && is_subset(&shapes[i].2, &shapes[j].2));
    }
    let mut smallest = vec![u32::MAX; n];
    for (id, shape) in shapes.iter().enumerate() {
        for (p, s) in smallest.iter_mut().enumerate() {
            if *s == u32::MAX && shape.2[p / 64] >> (p % 64) & 1 == 1 {
                *s = id as u32;
            }
        }
    }
    let levels = shapes.iter().map(|s| s.4).collect();
    let polarities = shapes.iter().map(|s| s.3).collect();
    Ok(ShapeTree::assemble(w, h, exterior, parents, levels, polarities, smallest))
}
