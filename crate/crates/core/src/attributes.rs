//! Per-shape attribute vectors: elongation, ellipse and circle compactness
//! from second-order moments, contrast against the shape's own pixels, and
//! the area ratio to the ancestor family. Polarity is carried as a tag.
//!
//! All accumulations are exact integer sums, so attributes of a shape are
//! bit-identical under 90 degree rotations of the image.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::imaging::GrayImage;
use crate::tree::{Polarity, ShapeTree};

/// Default ancestor family size for the scale ratio.
pub const DEFAULT_FAMILY: usize = 3;

/// Floor on the minor eigenvalue, relative to the major one.
const EIGEN_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector {
    pub elongation: f64,
    pub ellipse_compactness: f64,
    pub circle_compactness: f64,
    pub contrast: f64,
    pub scale_ratio: f64,
    pub polarity: Polarity,
}

impl AttributeVector {
    pub const DIM: usize = 5;

    pub fn values(&self) -> [f64; 5] {
        [
            self.elongation,
            self.ellipse_compactness,
            self.circle_compactness,
            self.contrast,
            self.scale_ratio,
        ]
    }
}

/// Second-order central moments of a pixel set, each pixel a unit mass at
/// its integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub m00: f64,
    pub mu20: f64,
    pub mu02: f64,
    pub mu11: f64,
    pub center: (f64, f64),
}

/// Exact raw sums; combined bottom-up over the tree.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: i128,
    x: i128,
    y: i128,
    xx: i128,
    yy: i128,
    xy: i128,
    v: i128,
    vv: i128,
}

impl Sums {
    fn add_pixel(&mut self, x: i128, y: i128, v: i128) {
        self.n += 1;
        self.x += x;
        self.y += y;
        self.xx += x * x;
        self.yy += y * y;
        self.xy += x * y;
        self.v += v;
        self.vv += v * v;
    }

    fn merge(&mut self, o: &Sums) {
        self.n += o.n;
        self.x += o.x;
        self.y += o.y;
        self.xx += o.xx;
        self.yy += o.yy;
        self.xy += o.xy;
        self.v += o.v;
        self.vv += o.vv;
    }

    fn moments(&self) -> Moments {
        let n = self.n;
        let nf = n as f64;
        Moments {
            m00: nf,
            mu20: (n * self.xx - self.x * self.x) as f64 / nf,
            mu02: (n * self.yy - self.y * self.y) as f64 / nf,
            mu11: (n * self.xy - self.x * self.y) as f64 / nf,
            center: (self.x as f64 / nf, self.y as f64 / nf),
        }
    }
}

fn pixel_sums(tree: &ShapeTree, image: &GrayImage, pixels: &[u32]) -> Sums {
    let w = tree.width();
    let mut s = Sums::default();
    for &p in pixels {
        let p = p as usize;
        s.add_pixel((p % w) as i128, (p / w) as i128, image.pixels()[p] as i128);
    }
    s
}

/// Central moments of the hole-filled shape `id`.
pub fn central_moments(tree: &ShapeTree, id: usize) -> Moments {
    let w = tree.width() as i128;
    let mut s = Sums::default();
    for p in tree.pixels(id) {
        let p = p as i128;
        s.add_pixel(p % w, p / w, 0);
    }
    s.moments()
}

/// Eigenvalues (major, minor) of the normalized inertia matrix.
pub fn inertia_eigenvalues(m: &Moments) -> (f64, f64) {
    let norm = m.m00 * m.m00;
    let (a, b, c) = (m.mu20 / norm, m.mu11 / norm, m.mu02 / norm);
    let mean = (a + c) / 2.0;
    let half = (a - c) / 2.0;
    let root = (half * half + b * b).sqrt();
    let l1 = mean + root;
    let l2 = (mean - root).max(0.0);
    (l1, l2)
}

/// Elongation, ellipse compactness and circle compactness.
pub fn geometric_attributes(m: &Moments, perimeter: u64) -> (f64, f64, f64) {
    let kappa_c = (4.0 * PI * m.m00 / (perimeter as f64).powi(2)).min(1.0);
    let (l1, l2) = inertia_eigenvalues(m);
    if l1 <= 0.0 {
        // single pixel: no preferred direction
        return (1.0, 1.0, kappa_c);
    }
    let l2 = l2.max(EIGEN_FLOOR * l1);
    let eps = l2 / l1;
    let kappa_e = (1.0 / (4.0 * PI * (l1 * l2).sqrt())).min(1.0);
    (eps, kappa_e, kappa_c)
}

/// Z-score of the proper-pixel mean within the shape; 0 when the shape is flat.
pub fn contrast_from_values(shape_values: &[u16], proper_values: &[u16]) -> f64 {
    let mut s = Sums::default();
    for &v in shape_values {
        s.add_pixel(0, 0, v as i128);
    }
    let mut p = Sums::default();
    for &v in proper_values {
        p.add_pixel(0, 0, v as i128);
    }
    contrast_from_sums(&s, &p)
}

fn contrast_from_sums(shape: &Sums, proper: &Sums) -> f64 {
    if proper.n == 0 {
        return 0.0;
    }
    let var = shape.n * shape.vv - shape.v * shape.v;
    if var <= 0 {
        return 0.0;
    }
    let num = shape.n * proper.v - proper.n * shape.v;
    num as f64 / (proper.n as f64 * (var as f64).sqrt())
}

/// Contrast of shape `id` measured on `image`.
pub fn contrast(tree: &ShapeTree, id: usize, image: &GrayImage) -> f64 {
    let all = pixel_sums(tree, image, &tree.pixels(id));
    let proper = pixel_sums(tree, image, &tree.shape(id).proper_pixels);
    contrast_from_sums(&all, &proper)
}

/// `M·a(s) / Σ a(s^r)` over the first `m` ancestors, padding with the root.
pub fn scale_ratio(tree: &ShapeTree, id: usize, m: usize) -> f64 {
    assert!(m >= 1, "family size must be positive");
    let root_area = tree.shape(tree.root()).area;
    let mut total = 0u64;
    let mut cur = id;
    for _ in 0..m {
        match tree.shape(cur).parent {
            Some(p) => {
                cur = p;
                total += tree.shape(p).area;
            }
            None => total += root_area,
        }
    }
    m as f64 * tree.shape(id).area as f64 / total as f64
}

pub fn attribute_vector(tree: &ShapeTree, id: usize, image: &GrayImage, m: usize) -> AttributeVector {
    let shape = tree.shape(id);
    let (eps, ke, kc) = geometric_attributes(&central_moments(tree, id), shape.perimeter);
    AttributeVector {
        elongation: eps,
        ellipse_compactness: ke,
        circle_compactness: kc,
        contrast: contrast(tree, id, image),
        scale_ratio: scale_ratio(tree, id, m),
        polarity: shape.polarity,
    }
}

/// Attribute vectors for every shape, indexed by shape id. Linear in the
/// number of pixels plus `shapes·m`.
pub fn compute_attributes(tree: &ShapeTree, image: &GrayImage, m: usize) -> Vec<AttributeVector> {
    assert_eq!((tree.width(), tree.height()), (image.width(), image.height()));
    let own: Vec<Sums> = tree
        .shapes()
        .iter()
        .map(|s| pixel_sums(tree, image, &s.proper_pixels))
        .collect();
    let mut total = own.clone();
    for s in tree.top_down().rev() {
        if let Some(p) = tree.shape(s).parent {
            let child = total[s];
            total[p].merge(&child);
        }
    }
    tree.shapes()
        .iter()
        .map(|s| {
            let (eps, ke, kc) = geometric_attributes(&total[s.id].moments(), s.perimeter);
            AttributeVector {
                elongation: eps,
                ellipse_compactness: ke,
                circle_compactness: kc,
                contrast: contrast_from_sums(&total[s.id], &own[s.id]),
                scale_ratio: scale_ratio(tree, s.id, m),
                polarity: s.polarity,
            }
        })
        .collect()
}

/// One row per shape: `id,polarity,elongation,ellipse_compactness,circle_compactness,contrast,scale_ratio`.
pub fn attributes_csv(attrs: &[AttributeVector]) -> String {
    let mut out = String::from("id,polarity,elongation,ellipse_compactness,circle_compactness,contrast,scale_ratio\n");
    for (id, a) in attrs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{id},{},{},{},{},{},{}",
            a.polarity.symbol(),
            a.elongation,
            a.ellipse_compactness,
            a.circle_compactness,
            a.contrast,
            a.scale_ratio
        );
    }
    out
}

/// Debug rendering: the ellipse with the same centroid and second moments,
/// drawn at `level` on a zero background.
pub fn render_ellipse(m: &Moments, width: usize, height: usize, level: u16) -> GrayImage {
    // for a uniform ellipse the covariance is diag(a², b²)/4 in its own frame
    let (cx, cy) = m.center;
    let (sxx, syy, sxy) = (m.mu20 / m.m00, m.mu02 / m.m00, m.mu11 / m.m00);
    let det = sxx * syy - sxy * sxy;
    GrayImage::from_fn(width, height, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let inside = if det > 1e-12 {
            // Mahalanobis radius 2 bounds the uniform ellipse
            (syy * dx * dx - 2.0 * sxy * dx * dy + sxx * dy * dy) / det <= 4.0
        } else {
            dx.abs() < 0.5 && dy.abs() < 0.5
        };
        if inside {
            level
        } else {
            0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::build_tree;
    use proptest::prelude::*;

    fn disk(size: usize, r: f64) -> GrayImage {
        let c = (size as f64 - 1.0) / 2.0;
        GrayImage::from_fn(size, size, |x, y| {
            let (dx, dy) = (x as f64 - c, y as f64 - c);
            if dx * dx + dy * dy <= r * r {
                200
            } else {
                10
            }
        })
    }

    fn ellipse(w: usize, h: usize, a: f64, b: f64) -> GrayImage {
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        GrayImage::from_fn(w, h, |x, y| {
            let (dx, dy) = ((x as f64 - cx) / a, (y as f64 - cy) / b);
            if dx * dx + dy * dy <= 1.0 {
                200
            } else {
                10
            }
        })
    }

    fn leaf(tree: &ShapeTree) -> usize {
        tree.shapes().iter().find(|s| s.children.is_empty() && s.parent.is_some()).unwrap().id
    }

    #[test]
    fn single_pixel_moments() {
        let tree = build_tree(&GrayImage::from_rows(&[[0u16, 5, 0]]).unwrap());
        let m = central_moments(&tree, 1);
        assert_eq!((m.m00, m.mu20, m.mu02, m.mu11), (1.0, 0.0, 0.0, 0.0));
        assert_eq!(geometric_attributes(&m, 4).0, 1.0);
    }

    #[test]
    fn horizontal_bar_moments() {
        let image = GrayImage::from_rows(&[[9u16, 9, 9, 0, 0], [0, 0, 0, 0, 0], [0, 0, 0, 0, 0]]).unwrap();
        let tree = build_tree(&image);
        let bar = tree.smallest_shape()[0] as usize;
        let m = central_moments(&tree, bar);
        assert_eq!(m.center, (1.0, 0.0));
        assert_eq!((m.mu20, m.mu02, m.mu11), (2.0, 0.0, 0.0));
        let (eps, ke, _) = geometric_attributes(&m, 8);
        assert!((eps - EIGEN_FLOOR).abs() < 1e-15);
        assert!(ke > 0.0 && ke <= 1.0);
    }

    #[test]
    fn disk_is_round() {
        let tree = build_tree(&disk(51, 20.0));
        let (eps, ke, kc) = geometric_attributes(&central_moments(&tree, leaf(&tree)), tree.shape(leaf(&tree)).perimeter);
        assert!((eps - 1.0).abs() < 0.05, "{eps}");
        assert!((ke - 1.0).abs() < 0.05, "{ke}");
        assert!(kc > 0.0 && kc <= 1.0);
    }

    #[test]
    fn ellipse_elongation() {
        let tree = build_tree(&ellipse(101, 61, 40.0, 20.0));
        let id = leaf(&tree);
        let (eps, ke, _) = geometric_attributes(&central_moments(&tree, id), tree.shape(id).perimeter);
        assert!((eps - 0.25).abs() < 0.05, "{eps}");
        assert!((ke - 1.0).abs() < 0.05, "{ke}");
    }

    #[test]
    fn ellipse_compactness_converges() {
        let mut last = f64::INFINITY;
        for b in [4.0, 12.6, 40.0] {
            // area π·2b² ≈ 10², 10³, 10⁴
            let size = (5.0 * b) as usize;
            let tree = build_tree(&ellipse(size, size, 2.0 * b, b));
            let id = leaf(&tree);
            // unclamped: point-mass moments put small rasters slightly above 1
            let (l1, l2) = inertia_eigenvalues(&central_moments(&tree, id));
            let ke = 1.0 / (4.0 * PI * (l1 * l2).sqrt());
            let err = (1.0 - ke).abs();
            assert!(err < last, "b={b} err={err} previous={last}");
            last = err;
        }
    }

    #[test]
    fn contrast_hand_example() {
        let all = [0, 0, 0, 0, 9, 0, 0, 0, 0];
        let g = contrast_from_values(&all, &[9]);
        assert!((g - 8.0 / 8f64.sqrt()).abs() < 1e-12, "{g}");
        assert_eq!(contrast_from_values(&[4, 4, 4], &[4]), 0.0);
    }

    #[test]
    fn scale_ratio_chain() {
        let image = GrayImage::from_fn(9, 9, |x, y| {
            let d = x.min(y).min(8 - x).min(8 - y);
            [0, 0, 100, 200, 200][d]
        });
        let tree = build_tree(&image);
        // areas 81, 25, 9
        assert_eq!(scale_ratio(&tree, 0, 3), 1.0);
        assert!((scale_ratio(&tree, 2, 2) - 2.0 * 9.0 / (25.0 + 81.0)).abs() < 1e-15);
        assert!((scale_ratio(&tree, 2, 3) - 3.0 * 9.0 / (25.0 + 81.0 + 81.0)).abs() < 1e-15);
    }

    #[test]
    fn bright_and_dark_disk_share_geometry() {
        let bright = disk(41, 15.0);
        let dark = GrayImage::from_fn(41, 41, |x, y| 210 - bright.get(x, y));
        let (tb, td) = (build_tree(&bright), build_tree(&dark));
        let (ab, ad) = (compute_attributes(&tb, &bright, 3), compute_attributes(&td, &dark, 3));
        let (lb, ld) = (leaf(&tb), leaf(&td));
        assert_eq!(ab[lb].polarity, Polarity::Bright);
        assert_eq!(ad[ld].polarity, Polarity::Dark);
        assert_eq!(ab[lb].elongation, ad[ld].elongation);
        assert_eq!(ab[lb].ellipse_compactness, ad[ld].ellipse_compactness);
    }

    #[test]
    fn csv_has_row_per_shape() {
        let image = disk(21, 6.0);
        let tree = build_tree(&image);
        let attrs = compute_attributes(&tree, &image, 3);
        let csv = attributes_csv(&attrs);
        assert_eq!(csv.lines().count(), tree.len() + 1);
        assert!(csv.lines().nth(1).unwrap().starts_with("0,+,"));
    }

    #[test]
    fn rendered_ellipse_matches_moments() {
        let tree = build_tree(&ellipse(81, 61, 30.0, 15.0));
        let m = central_moments(&tree, leaf(&tree));
        let render = render_ellipse(&m, 81, 61, 255);
        let rt = build_tree(&render);
        let rm = central_moments(&rt, leaf(&rt));
        assert!((rm.m00 - m.m00).abs() / m.m00 < 0.05);
        let e1 = inertia_eigenvalues(&m).1 / inertia_eigenvalues(&m).0;
        let e2 = inertia_eigenvalues(&rm).1 / inertia_eigenvalues(&rm).0;
        assert!((e1 - e2).abs() < 0.02);
    }

    fn random_image() -> impl Strategy<Value = GrayImage> {
        (3usize..14, 3usize..14).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u16..6, w * h).prop_map(move |d| GrayImage::new(w, h, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn bulk_matches_per_shape(image in random_image()) {
            let tree = build_tree(&image);
            let bulk = compute_attributes(&tree, &image, 3);
            for s in 0..tree.len() {
                prop_assert_eq!(bulk[s], attribute_vector(&tree, s, &image, 3));
            }
        }

        #[test]
        fn rotation_is_exact(image in random_image()) {
            let rotated = image.rotate90();
            let (t1, t2) = (build_tree(&image), build_tree(&rotated));
            let (a1, a2) = (compute_attributes(&t1, &image, 3), compute_attributes(&t2, &rotated, 3));
            let (w, h) = (image.width(), image.height());
            // pixel (x, y) of the original lands at (y, w-1-x) in the rotated image
            for s in 0..t1.len() {
                let p = t1.pixels(s)[0] as usize;
                let (x, y) = (p % w, p / w);
                let q = (w - 1 - x) * h + y;
                let mut cand = t2.smallest_shape()[q] as usize;
                while t2.shape(cand).area < t1.shape(s).area {
                    cand = t2.shape(cand).parent.unwrap();
                }
                prop_assert_eq!(t2.shape(cand).area, t1.shape(s).area);
                prop_assert_eq!(a1[s], a2[cand]);
            }
        }

        #[test]
        fn entries_finite_and_bounded(image in random_image()) {
            let tree = build_tree(&image);
            for a in compute_attributes(&tree, &image, 3) {
                prop_assert!(a.values().iter().all(|v| v.is_finite()));
                prop_assert!(a.elongation > 0.0 && a.elongation <= 1.0);
                prop_assert!(a.ellipse_compactness > 0.0 && a.ellipse_compactness <= 1.0);
                prop_assert!(a.circle_compactness > 0.0 && a.circle_compactness <= 1.0);
                prop_assert!(a.scale_ratio > 0.0 && a.scale_ratio <= 1.0);
            }
        }
    }
}
