//! Grayscale rasters: ingestion, synthetic textures and the geometric /
//! radiometric transforms used for pyramids and invariance checks.

mod pgm;
mod png_io;
mod synth;
mod transform;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pgm::{decode_pgm, encode_pgm, PgmError};
pub use png_io::{decode_png, encode_png};
pub use synth::{generate_synthetic, SynthKind, SynthParams};
pub use transform::{apply_contrast, rescale};

/// Errors produced while reading, decoding or transforming images.
#[derive(Debug, Error)]
pub enum ImageError {
    #[error("cannot read image `{path}`: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write image `{path}`: {source}")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported bit depth {depth} in `{path}`")]
    UnsupportedBitDepth { path: PathBuf, depth: u32 },
    #[error("image `{path}` has zero size")]
    ZeroSized { path: PathBuf },
    #[error("cannot decode `{path}`: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("rescaled image would be {width}x{height}, below the 8x8 minimum")]
    OutputTooSmall { width: usize, height: usize },
    #[error("contrast mapping is not strictly increasing between levels {lower} and {upper}")]
    NonMonotoneMapping { lower: u32, upper: u32 },
    #[error("contrast mapping has {len} entries but the image contains level {level}")]
    MappingTooShort { len: usize, level: u32 },
}

/// Decoding failure without path context; [`load_image`] attaches the path.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unsupported bit depth {0}")]
    UnsupportedBitDepth(u32),
    #[error("zero-sized image")]
    ZeroSized,
    #[error("{0}")]
    Malformed(String),
}

impl DecodeError {
    fn with_path(self, path: &Path) -> ImageError {
        let path = path.to_path_buf();
        match self {
            DecodeError::UnsupportedBitDepth(depth) => ImageError::UnsupportedBitDepth { path, depth },
            DecodeError::ZeroSized => ImageError::ZeroSized { path },
            DecodeError::Malformed(reason) => ImageError::Malformed { path, reason },
        }
    }
}

/// Row-major grayscale raster with integer levels in `0..=65535`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image from a closure over `(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u16) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Builds an image from nested rows, mostly for tests.
    pub fn from_rows<R: AsRef<[u16]>>(rows: &[R]) -> Result<Self, ImageError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(width * height);
        for row in rows {
            let row = row.as_ref();
            if row.len() != width {
                return Err(ImageError::InvalidDimensions { width: row.len(), height });
            }
            data.extend_from_slice(row);
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixels(&self) -> &[u16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    pub fn max_value(&self) -> u16 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn min_value(&self) -> u16 {
        self.data.iter().copied().min().unwrap_or(0)
    }

    /// Sorted distinct gray levels present in the image.
    pub fn levels(&self) -> Vec<u16> {
        let mut seen = vec![false; self.max_value() as usize + 1];
        for &v in &self.data {
            seen[v as usize] = true;
        }
        seen.iter()
            .enumerate()
            .filter_map(|(v, &s)| s.then_some(v as u16))
            .collect()
    }

    /// Rotation by 90 degrees counter-clockwise.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        Self::from_fn(h, w, |x, y| self.get(w - 1 - y, x))
    }

    /// Nearest-neighbour upscaling by an integer factor.
    pub fn upscale_nearest(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        Self::from_fn(self.width * factor, self.height * factor, |x, y| {
            self.get(x / factor, y / factor)
        })
    }
}

/// Reads a PGM (P2/P5, 8 or 16 bit) or PNG file.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ImageError::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes).map_err(|e| e.with_path(path))
}

/// Decodes PGM or PNG bytes, dispatching on the magic number.
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage, DecodeError> {
    if bytes.starts_with(b"\x89PNG") {
        decode_png(bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else {
        Err(DecodeError::Malformed("unrecognised image format".into()))
    }
}

/// Writes a binary PGM (8 bit when every level fits, 16 bit otherwise).
pub fn save_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(image)).map_err(|source| ImageError::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

/// Rounded luma of an RGB triple using 0.299/0.587/0.114 weights.
pub(crate) fn luma(r: u32, g: u32, b: u32) -> u16 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round() as u16
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotate_four_times_is_identity() {
        let img = GrayImage::from_fn(5, 3, |x, y| (x * 7 + y * 3) as u16);
        let r = img.rotate90();
        assert_eq!((r.width(), r.height()), (3, 5));
        assert_eq!(r.rotate90().rotate90().rotate90(), img);
    }

    #[test]
    fn levels_are_sorted_and_unique() {
        let img = GrayImage::from_rows(&[[5u16, 1, 5], [9, 1, 0]]).unwrap();
        assert_eq!(img.levels(), vec![0, 1, 5, 9]);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![1, 2, 3]).is_err());
    }

    #[test]
    fn load_reports_path_on_missing_file() {
        let err = load_image("/nonexistent/definitely/missing.pgm").unwrap_err();
        assert!(matches!(err, ImageError::Unreadable { .. }));
        assert!(err.to_string().contains("missing.pgm"));
    }

    #[test]
    fn unknown_magic_is_malformed() {
        assert!(matches!(decode_image(b"GIF89a"), Err(DecodeError::Malformed(_))));
    }
}
