//! Netpbm graymap codec (P2 plain and P5 raw, maxval up to 65535).

use super::{DecodeError, GrayImage};

pub type PgmError = DecodeError;

/// Largest pixel count accepted from a header; guards allocation on hostile input.
const MAX_PIXELS: usize = 1 << 28;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64, DecodeError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(DecodeError::Malformed(format!("expected {what}")));
        }
        // at most 10 digits keeps the value inside u64
        if self.pos - start > 10 {
            return Err(DecodeError::Malformed(format!("{what} out of range")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse()
            .map_err(|_| DecodeError::Malformed(format!("{what} out of range")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, DecodeError> {
    let plain = match bytes.get(..2) {
        Some(b"P2") => true,
        Some(b"P5") => false,
        _ => return Err(DecodeError::Malformed("missing P2/P5 magic".into())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(DecodeError::ZeroSized);
    }
    if maxval == 0 || maxval > 65535 {
        let depth = if maxval == 0 { 0 } else { 64 - maxval.leading_zeros() };
        return Err(DecodeError::UnsupportedBitDepth(depth));
    }
    let count = width
        .checked_mul(height)
        .filter(|&n| n <= MAX_PIXELS)
        .ok_or_else(|| DecodeError::Malformed("image too large".into()))?;

    let data = if plain {
        let mut data = Vec::with_capacity(count.min(bytes.len()));
        for _ in 0..count {
            let v = cur.number("pixel value")?;
            if v > maxval {
                return Err(DecodeError::Malformed(format!("value {v} exceeds maxval {maxval}")));
            }
            data.push(v as u16);
        }
        data
    } else {
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(cur.pos) {
            Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(DecodeError::Malformed("missing raster separator".into())),
        }
        let wide = maxval > 255;
        let need = if wide { count * 2 } else { count };
        let raster = bytes
            .get(cur.pos..cur.pos + need)
            .ok_or_else(|| DecodeError::Malformed("truncated raster".into()))?;
        let data: Vec<u16> = if wide {
            raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        } else {
            raster.iter().map(|&b| b as u16).collect()
        };
        if let Some(v) = data.iter().find(|&&v| v as u64 > maxval) {
            return Err(DecodeError::Malformed(format!("value {v} exceeds maxval {maxval}")));
        }
        data
    };
    Ok(GrayImage::new(width, height, data).expect("dimensions checked"))
}

/// Encodes as binary P5; maxval 255 when possible, else 65535.
pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let wide = image.max_value() > 255;
    let maxval = if wide { 65535 } else { 255 };
    let mut out = format!("P5\n{} {}\n{}\n", image.width(), image.height(), maxval).into_bytes();
    for &v in image.pixels() {
        if wide {
            out.extend_from_slice(&v.to_be_bytes());
        } else {
            out.push(v as u8);
        }
    }
    out
}
