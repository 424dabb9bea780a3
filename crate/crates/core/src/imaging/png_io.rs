use super::{luma, DecodeError, GrayImage};

const MAX_PIXELS: u64 = 1 << 28;

/// Decodes a PNG. Grayscale levels are kept verbatim (1/2/4/8/16 bit),
/// alpha is dropped, and colour is converted with rounded luma weights.
pub fn decode_png(bytes: &[u8]) -> Result<GrayImage, DecodeError> {
    let mut decoder = png::Decoder::new(bytes);
    // keep packed low bit depths so grayscale values survive unchanged; palettes are expanded
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| DecodeError::Malformed(e.to_string()))?;
    let (width, height, color, depth) = {
        let info = reader.info();
        (info.width as usize, info.height as usize, info.color_type, info.bit_depth)
    };
    if width == 0 || height == 0 {
        return Err(DecodeError::ZeroSized);
    }
    if width as u64 * height as u64 > MAX_PIXELS {
        return Err(DecodeError::Malformed("image too large".into()));
    }
    let bits = depth as u32;
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| DecodeError::Malformed(e.to_string()))?;
    let line = frame.line_size;

    let sample = |row: &[u8], index: usize| -> u32 {
        match bits {
            16 => u16::from_be_bytes([row[2 * index], row[2 * index + 1]]) as u32,
            8 => row[index] as u32,
            1 | 2 | 4 => {
                let per_byte = 8 / bits as usize;
                let byte = row[index / per_byte];
                let shift = 8 - bits as usize * (index % per_byte + 1);
                ((byte >> shift) & ((1u8 << bits) - 1)) as u32
            }
            _ => unreachable!(),
        }
    };

    let mut data = Vec::with_capacity(width * height);
    match color {
        png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => {
            let channels = if color == png::ColorType::Grayscale { 1 } else { 2 };
            for y in 0..height {
                let row = &buf[y * line..(y + 1) * line];
                for x in 0..width {
                    data.push(sample(row, x * channels) as u16);
                }
            }
        }
        png::ColorType::Rgb | png::ColorType::Rgba => {
            if bits < 8 {
                return Err(DecodeError::UnsupportedBitDepth(bits));
            }
            let channels = if color == png::ColorType::Rgb { 3 } else { 4 };
            for y in 0..height {
                let row = &buf[y * line..(y + 1) * line];
                for x in 0..width {
                    let base = x * channels;
                    data.push(luma(sample(row, base), sample(row, base + 1), sample(row, base + 2)));
                }
            }
        }
        png::ColorType::Indexed => {
            let palette = reader
                .info()
                .palette
                .as_ref()
                .ok_or_else(|| DecodeError::Malformed("indexed PNG without palette".into()))?
                .to_vec();
            for y in 0..height {
                let row = &buf[y * line..(y + 1) * line];
                for x in 0..width {
                    let i = sample(row, x) as usize * 3;
                    let rgb = palette
                        .get(i..i + 3)
                        .ok_or_else(|| DecodeError::Malformed("palette index out of range".into()))?;
                    data.push(luma(rgb[0] as u32, rgb[1] as u32, rgb[2] as u32));
                }
            }
        }
    }
    GrayImage::new(width, height, data).map_err(|e| DecodeError::Malformed(e.to_string()))
}

/// Encodes a grayscale PNG (8 bit when possible); used by tests and debug dumps.
pub fn encode_png(image: &GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.width() as u32, image.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        let wide = image.max_value() > 255;
        enc.set_depth(if wide { png::BitDepth::Sixteen } else { png::BitDepth::Eight });
        let mut writer = enc.write_header().expect("in-memory writer");
        let raster: Vec<u8> = if wide {
            image.pixels().iter().flat_map(|v| v.to_be_bytes()).collect()
        } else {
            image.pixels().iter().map(|&v| v as u8).collect()
        };
        writer.write_image_data(&raster).expect("in-memory writer");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode_raw(w: u32, h: u32, color: png::ColorType, depth: png::BitDepth, raster: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, w, h);
            enc.set_color(color);
            enc.set_depth(depth);
            let mut writer = enc.write_header().unwrap();
            writer.write_image_data(raster).unwrap();
        }
        out
    }

    #[test]
    fn gray8_and_gray16_round_trip() {
        let img = GrayImage::from_fn(4, 3, |x, y| (x * 60 + y) as u16);
        assert_eq!(decode_png(&encode_png(&img)).unwrap(), img);
        let wide = GrayImage::from_fn(2, 2, |x, y| (x * 65535 + y) as u16);
        assert_eq!(decode_png(&encode_png(&wide)).unwrap(), wide);
    }

    #[test]
    fn packed_two_bit_values_kept() {
        // one row of 4 pixels packed into a single byte: 3,2,1,0
        let bytes = encode_raw(4, 1, png::ColorType::Grayscale, png::BitDepth::Two, &[0b11_10_01_00]);
        assert_eq!(decode_png(&bytes).unwrap().pixels(), &[3, 2, 1, 0]);
    }

    #[test]
    fn rgb_uses_rounded_luma() {
        let bytes = encode_raw(2, 1, png::ColorType::Rgb, png::BitDepth::Eight, &[255, 0, 0, 10, 20, 30]);
        // 0.299*255 = 76.245 -> 76 ; 2.99 + 11.74 + 3.42 = 18.15 -> 18
        assert_eq!(decode_png(&bytes).unwrap().pixels(), &[76, 18]);
    }

    #[test]
    fn garbage_is_an_error() {
        assert!(decode_png(b"\x89PNG\r\n\x1a\nnot really").is_err());
    }
}
