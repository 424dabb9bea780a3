//! Deterministic synthetic textures with known structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GrayImage, ImageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Stripes,
    Checkerboard,
    Blobs,
    NestedSquares,
}

/// Parameters shared by all synthetic kinds; each kind reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub width: usize,
    pub height: usize,
    /// Stripe period, checker cell size, or blob diameter, in pixels.
    pub period: f64,
    /// 0 gives horizontal bands / axis-aligned cells.
    pub orientation_deg: f64,
    pub low: u16,
    pub high: u16,
    /// Number of squares for `NestedSquares`.
    pub levels: usize,
    /// Amplitude of additive uniform integer noise.
    pub noise: u16,
    /// Draw the pattern phase from the seed instead of starting at 0.
    pub random_phase: bool,
    /// Target area fraction covered by blobs.
    pub density: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            period: 8.0,
            orientation_deg: 0.0,
            low: 40,
            high: 200,
            levels: 3,
            noise: 0,
            random_phase: false,
            density: 0.3,
        }
    }
}

pub fn generate_synthetic(kind: SynthKind, params: &SynthParams, seed: u64) -> Result<GrayImage, ImageError> {
    let p = params;
    let bad = |msg: &str| Err(ImageError::InvalidParams(msg.to_string()));
    if p.low == p.high {
        return bad("low and high levels coincide (constant texture)");
    }
    if !(p.period.is_finite() && p.period > 0.0) {
        return bad("period must be positive");
    }
    if kind == SynthKind::NestedSquares {
        if p.levels < 2 {
            return bad("nested squares need at least 2 levels");
        }
        if p.width.min(p.height) < 2 * p.levels - 1 {
            return bad("image too small for the requested number of squares");
        }
    } else if p.width < 16 || p.height < 16 {
        return bad("image dimensions must be at least 16");
    }
    if kind == SynthKind::Blobs && !(p.density > 0.0 && p.density < 1.0) {
        return bad("blob density must lie in (0, 1)");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = p.orientation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let phase = if p.random_phase {
        (rng.gen_range(0.0..p.period), rng.gen_range(0.0..p.period))
    } else {
        (0.0, 0.0)
    };

    let base = match kind {
        SynthKind::Stripes => GrayImage::from_fn(p.width, p.height, |x, y| {
            let t = y as f64 * cos + x as f64 * sin + phase.0;
            if (t / p.period).rem_euclid(1.0) < 0.5 { p.high } else { p.low }
        }),
        SynthKind::Checkerboard => GrayImage::from_fn(p.width, p.height, |x, y| {
            let (xf, yf) = (x as f64, y as f64);
            let u = xf * cos + yf * sin + phase.0;
            let v = -xf * sin + yf * cos + phase.1;
            let parity = (u / p.period).floor() as i64 + (v / p.period).floor() as i64;
            if parity.rem_euclid(2) == 0 { p.high } else { p.low }
        }),
        SynthKind::Blobs => {
            let radius = p.period / 2.0;
            let area = (p.width * p.height) as f64;
            let count = ((p.density * area) / (std::f64::consts::PI * radius * radius)).ceil().max(1.0) as usize;
            let blobs: Vec<(f64, f64, f64)> = (0..count)
                .map(|_| {
                    (
                        rng.gen_range(0.0..p.width as f64),
                        rng.gen_range(0.0..p.height as f64),
                        radius * rng.gen_range(0.7..1.3),
                    )
                })
                .collect();
            GrayImage::from_fn(p.width, p.height, |x, y| {
                let (xf, yf) = (x as f64, y as f64);
                let inside = blobs
                    .iter()
                    .any(|&(cx, cy, r)| (xf - cx).powi(2) + (yf - cy).powi(2) <= r * r);
                if inside { p.high } else { p.low }
            })
        }
        SynthKind::NestedSquares => {
            let side = |n: usize, i: usize| -> usize {
                let target = n * (p.levels - i) / p.levels;
                if target % 2 == n % 2 { target } else { target - 1 }
            };
            GrayImage::from_fn(p.width, p.height, |x, y| {
                let mut depth = 0;
                for i in 1..p.levels {
                    let (sw, sh) = (side(p.width, i), side(p.height, i));
                    let (x0, y0) = ((p.width - sw) / 2, (p.height - sh) / 2);
                    if x >= x0 && x < x0 + sw && y >= y0 && y < y0 + sh {
                        depth = i;
                    }
                }
                if depth % 2 == 0 { p.low } else { p.high }
            })
        }
    };

    if p.noise == 0 {
        return Ok(base);
    }
    let amp = p.noise as i32;
    let noisy: Vec<u16> = base
        .pixels()
        .iter()
        .map(|&v| (v as i32 + rng.gen_range(-amp..=amp)).clamp(0, u16::MAX as i32) as u16)
        .collect();
    GrayImage::new(p.width, p.height, noisy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_pixels() {
        let params = SynthParams { noise: 10, random_phase: true, ..Default::default() };
        for kind in [SynthKind::Stripes, SynthKind::Checkerboard, SynthKind::Blobs] {
            let a = generate_synthetic(kind, &params, 42).unwrap();
            let b = generate_synthetic(kind, &params, 42).unwrap();
            let c = generate_synthetic(kind, &params, 43).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn horizontal_stripes_period_four() {
        let params = SynthParams { width: 16, height: 16, period: 4.0, ..Default::default() };
        let img = generate_synthetic(SynthKind::Stripes, &params, 0).unwrap();
        let bright_rows: Vec<usize> = (0..16).filter(|&y| img.get(0, y) == params.high).collect();
        assert_eq!(bright_rows, vec![0, 1, 4, 5, 8, 9, 12, 13]);
        // rows are constant and form 4 separate bands
        assert!((0..16).all(|y| (0..16).all(|x| img.get(x, y) == img.get(0, y))));
        let bands = (0..16).filter(|&y| img.get(0, y) == params.high && (y == 0 || img.get(0, y - 1) != params.high)).count();
        assert_eq!(bands, 4);
    }

    #[test]
    fn nested_squares_nine_by_nine() {
        let params = SynthParams { width: 9, height: 9, levels: 3, ..Default::default() };
        let img = generate_synthetic(SynthKind::NestedSquares, &params, 0).unwrap();
        let count = |v: u16| img.pixels().iter().filter(|&&p| p == v).count();
        // 3x3 centre low, 5x5 ring high, outer low
        assert_eq!(count(params.high), 25 - 9);
        assert_eq!(count(params.low), 81 - 16);
        assert_eq!(img.get(4, 4), params.low);
        assert_eq!(img.get(2, 2), params.high);
        assert_eq!(img.get(1, 1), params.low);
    }

    #[test]
    fn invalid_requests() {
        let constant = SynthParams { low: 7, high: 7, ..Default::default() };
        assert!(generate_synthetic(SynthKind::Stripes, &constant, 0).is_err());
        let tiny = SynthParams { width: 8, height: 8, ..Default::default() };
        assert!(generate_synthetic(SynthKind::Checkerboard, &tiny, 0).is_err());
        let zero_period = SynthParams { period: 0.0, ..Default::default() };
        assert!(generate_synthetic(SynthKind::Blobs, &zero_period, 0).is_err());
    }
}
