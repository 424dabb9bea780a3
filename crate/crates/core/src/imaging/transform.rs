use super::{GrayImage, ImageError};

/// Bilinear resampling with pixel-centre alignment, rounded to the nearest level.
///
/// Output dimensions are `round(dim * factor)`; `factor` must lie in `[0.1, 4]`
/// and both output dimensions must be at least 8.
pub fn rescale(image: &GrayImage, factor: f64) -> Result<GrayImage, ImageError> {
    if !(0.1..=4.0).contains(&factor) {
        return Err(ImageError::InvalidParams(format!("scale factor {factor} outside [0.1, 4]")));
    }
    let width = (image.width() as f64 * factor).round() as usize;
    let height = (image.height() as f64 * factor).round() as usize;
    if width < 8 || height < 8 {
        return Err(ImageError::OutputTooSmall { width, height });
    }
    if width == image.width() && height == image.height() {
        return Ok(image.clone());
    }
    let sx = image.width() as f64 / width as f64;
    let sy = image.height() as f64 / height as f64;
    let max_x = (image.width() - 1) as f64;
    let max_y = (image.height() - 1) as f64;
    Ok(GrayImage::from_fn(width, height, |x, y| {
        let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(image.width() - 1), (y0 + 1).min(image.height() - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let top = image.get(x0, y0) as f64 * (1.0 - tx) + image.get(x1, y0) as f64 * tx;
        let bottom = image.get(x0, y1) as f64 * (1.0 - tx) + image.get(x1, y1) as f64 * tx;
        (top * (1.0 - ty) + bottom * ty).round() as u16
    }))
}

/// Pointwise remapping through a lookup table indexed by gray level.
///
/// The table must be strictly increasing over the levels that occur in the
/// image, which is what preserves every pixel ordering.
pub fn apply_contrast(image: &GrayImage, mapping: &[u16]) -> Result<GrayImage, ImageError> {
    let levels = image.levels();
    if let Some(&top) = levels.last() {
        if top as usize >= mapping.len() {
            return Err(ImageError::MappingTooShort { len: mapping.len(), level: top as u32 });
        }
    }
    for pair in levels.windows(2) {
        if mapping[pair[0] as usize] >= mapping[pair[1] as usize] {
            return Err(ImageError::NonMonotoneMapping { lower: pair[0] as u32, upper: pair[1] as u32 });
        }
    }
    let data = image.pixels().iter().map(|&v| mapping[v as usize]).collect();
    GrayImage::new(image.width(), image.height(), data)
}
