//! Pixel-level primitives shared by augmentation, attacks, and the platform
//! simulator.
//!
//! Images are `Array3<f64>` in `(H, W, C)` layout with values in `[0, 1]`,
//! `C` in `{1, 3}`. All transforms preserve shape unless stated otherwise.

use crate::error::{Error, Result};
use image::codecs::jpeg::JpegEncoder;
use image::{DynamicImage, ExtendedColorType, ImageBuffer, ImageEncoder, Luma, Rgb};
use ndarray::Array3;

pub type Image = Array3<f64>;

/// Validate the `(H, W, C)` shape and `[0, 1]` range contract.
pub fn validate(img: &Image) -> Result<()> {
    let (h, w, c) = img.dim();
    if h == 0 || w == 0 || !(c == 1 || c == 3) {
        return Err(Error::Argument(format!(
            "invalid image shape {h}x{w}x{c}: H, W > 0 and C in {{1, 3}} required"
        )));
    }
    if img.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        return Err(Error::Argument(
            "pixel values must be finite and within [0, 1]".into(),
        ));
    }
    Ok(())
}

pub fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Horizontal flip: column `j` maps to column `W - 1 - j`.
pub fn hflip(img: &Image) -> Image {
    let (h, w, c) = img.dim();
    Image::from_shape_fn((h, w, c), |(y, x, ch)| img[(y, w - 1 - x, ch)])
}

/// Integer translation with edge replication. Positive `dx` shifts content
/// right, positive `dy` shifts it down.
pub fn translate(img: &Image, dx: i64, dy: i64) -> Image {
    let (h, w, c) = img.dim();
    Image::from_shape_fn((h, w, c), |(y, x, ch)| {
        let sy = (y as i64 - dy).clamp(0, h as i64 - 1) as usize;
        let sx = (x as i64 - dx).clamp(0, w as i64 - 1) as usize;
        img[(sy, sx, ch)]
    })
}

/// Bilinear sample at a fractional position, clamping to the image border.
fn sample_bilinear(img: &Image, y: f64, x: f64, ch: usize) -> f64 {
    let (h, w, _) = img.dim();
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let y0 = y.floor() as usize;
    let x0 = x.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let fy = y - y0 as f64;
    let fx = x - x0 as f64;
    let a = img[(y0, x0, ch)] * (1.0 - fx) + img[(y0, x1, ch)] * fx;
    let b = img[(y1, x0, ch)] * (1.0 - fx) + img[(y1, x1, ch)] * fx;
    a * (1.0 - fy) + b * fy
}

/// Rotate around the image center by `degrees` (counter-clockwise), bilinear
/// resampling. Pixels sampled from outside the source take `fill`.
pub fn rotate(img: &Image, degrees: f64, fill: f64) -> Image {
    let (h, w, c) = img.dim();
    let rad = degrees.to_radians();
    let (sin, cos) = rad.sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    Image::from_shape_fn((h, w, c), |(y, x, ch)| {
        let ry = y as f64 - cy;
        let rx = x as f64 - cx;
        // Inverse mapping: rotate output coordinates back into the source.
        let sy = cy + rx * sin + ry * cos;
        let sx = cx + rx * cos - ry * sin;
        if sy < -0.5 || sx < -0.5 || sy > h as f64 - 0.5 || sx > w as f64 - 0.5 {
            fill
        } else {
            sample_bilinear(img, sy, sx, ch)
        }
    })
}

/// Bilinear resize to `(out_h, out_w)`, preserving the channel count.
pub fn resize(img: &Image, out_h: usize, out_w: usize) -> Image {
    let (h, w, c) = img.dim();
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    Image::from_shape_fn((out_h, out_w, c), |(y, x, ch)| {
        // Align pixel centers between source and destination grids.
        let src_y = (y as f64 + 0.5) * sy - 0.5;
        let src_x = (x as f64 + 0.5) * sx - 0.5;
        sample_bilinear(img, src_y, src_x, ch)
    })
}

/// Crop a `(ch, cw)` window whose top-left corner is `(top, left)`.
pub fn crop(img: &Image, top: usize, left: usize, ch: usize, cw: usize) -> Result<Image> {
    let (h, w, _) = img.dim();
    if top + ch > h || left + cw > w {
        return Err(Error::Argument(format!(
            "crop {ch}x{cw}@({top},{left}) exceeds image {h}x{w}"
        )));
    }
    Ok(img
        .slice(ndarray::s![top..top + ch, left..left + cw, ..])
        .to_owned())
}

/// Center crop of size `(ch, cw)`.
pub fn center_crop(img: &Image, ch: usize, cw: usize) -> Result<Image> {
    let (h, w, _) = img.dim();
    if ch > h || cw > w {
        return Err(Error::Argument(format!(
            "center crop {ch}x{cw} exceeds image {h}x{w}"
        )));
    }
    crop(img, (h - ch) / 2, (w - cw) / 2, ch, cw)
}

/// Separable Gaussian blur with standard deviation `sigma` (pixels), kernel
/// radius `ceil(3 sigma)`, edge replication.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::Argument(format!("sigma must be > 0, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for i in -radius..=radius {
        kernel.push((-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }
    let (h, w, c) = img.dim();
    // Horizontal pass, then vertical.
    let horiz = Image::from_shape_fn((h, w, c), |(y, x, ch)| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let sx = (x as i64 + i as i64 - radius).clamp(0, w as i64 - 1) as usize;
                k * img[(y, sx, ch)]
            })
            .sum()
    });
    Ok(Image::from_shape_fn((h, w, c), |(y, x, ch)| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let sy = (y as i64 + i as i64 - radius).clamp(0, h as i64 - 1) as usize;
                k * horiz[(sy, x, ch)]
            })
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }))
}

/// Quantize to 8-bit, row-major interleaved.
pub fn to_u8(img: &Image) -> Vec<u8> {
    img.iter()
        .map(|v| (clamp01(*v) * 255.0).round() as u8)
        .collect()
}

/// Inverse of [`to_u8`].
pub fn from_u8(bytes: &[u8], h: usize, w: usize, c: usize) -> Result<Image> {
    if bytes.len() != h * w * c {
        return Err(Error::Argument(format!(
            "byte length {} does not match {h}x{w}x{c}",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes.iter().map(|b| f64::from(*b) / 255.0).collect();
    Image::from_shape_vec((h, w, c), data)
        .map_err(|e| Error::Argument(format!("shape error: {e}")))
}

/// JPEG encode at the given quality and decode back, simulating lossy
/// recompression. Quality must be in `[1, 100]`.
pub fn jpeg_roundtrip(img: &Image, quality: u8) -> Result<Image> {
    if !(1..=100).contains(&quality) {
        return Err(Error::Argument(format!(
            "jpeg quality must be in [1, 100], got {quality}"
        )));
    }
    let (h, w, c) = img.dim();
    let raw = to_u8(img);
    let mut buf = Vec::new();
    let encoder = JpegEncoder::new_with_quality(&mut buf, quality);
    let color = if c == 1 {
        ExtendedColorType::L8
    } else {
        ExtendedColorType::Rgb8
    };
    encoder.write_image(&raw, w as u32, h as u32, color)?;
    let decoded = image::load_from_memory(&buf)?;
    let bytes = match c {
        1 => decoded.to_luma8().into_raw(),
        _ => decoded.to_rgb8().into_raw(),
    };
    from_u8(&bytes, h, w, c)
}

/// Write a PNG file; grayscale or RGB depending on the channel count.
pub fn save_png(img: &Image, path: &std::path::Path) -> Result<()> {
    let (h, w, c) = img.dim();
    let raw = to_u8(img);
    let dynimg = if c == 1 {
        DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w as u32, h as u32, raw)
                .expect("buffer sized from image"),
        )
    } else {
        DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w as u32, h as u32, raw)
                .expect("buffer sized from image"),
        )
    };
    dynimg.save(path)?;
    Ok(())
}

/// Load a PNG (or any supported format) as `(H, W, C)` floats in `[0, 1]`.
/// Images with alpha are flattened to RGB; palettes expand likewise.
pub fn load_image(path: &std::path::Path) -> Result<Image> {
    let decoded = image::open(path)
        .map_err(|e| Error::Load(format!("cannot read image {}: {e}", path.display())))?;
    let (img, c) = match decoded {
        DynamicImage::ImageLuma8(g) => (DynamicImage::ImageLuma8(g), 1),
        other => (DynamicImage::ImageRgb8(other.to_rgb8()), 3),
    };
    let (w, h) = (img.width() as usize, img.height() as usize);
    let bytes = match c {
        1 => img.to_luma8().into_raw(),
        _ => img.to_rgb8().into_raw(),
    };
    from_u8(&bytes, h, w, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn ramp(h: usize, w: usize) -> Image {
        Image::from_shape_fn((h, w, 1), |(y, x, _)| {
            (y * w + x) as f64 / (h * w) as f64
        })
    }

    #[test]
    fn hflip_maps_columns() {
        let img = ramp(4, 6);
        let flipped = hflip(&img);
        for y in 0..4 {
            for x in 0..6 {
                assert_eq!(flipped[(y, x, 0)], img[(y, 5 - x, 0)]);
            }
        }
    }

    #[test]
    fn hflip_is_involution() {
        let img = ramp(5, 7);
        assert_eq!(hflip(&hflip(&img)), img);
    }

    #[test]
    fn translate_zero_is_identity() {
        let img = ramp(4, 4);
        assert_eq!(translate(&img, 0, 0), img);
    }

    #[test]
    fn translate_replicates_edges() {
        let img = ramp(3, 3);
        let t = translate(&img, 1, 0);
        // Content moved right; the left column replicates the old border.
        assert_eq!(t[(0, 1, 0)], img[(0, 0, 0)]);
        assert_eq!(t[(0, 0, 0)], img[(0, 0, 0)]);
        assert_eq!(t[(2, 2, 0)], img[(2, 1, 0)]);
    }

    #[test]
    fn rotate_zero_is_identity() {
        let img = ramp(8, 8);
        let r = rotate(&img, 0.0, 0.0);
        for (a, b) in r.iter().zip(img.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rotate_90_moves_known_pixel() {
        let mut img = Array3::zeros((9, 9, 1));
        img[(4, 7, 0)] = 1.0; // right of center
        let r = rotate(&img, 90.0, 0.0);
        // CCW quarter turn carries the blob to the top of the image.
        assert!(r[(1, 4, 0)] > 0.9, "got {}", r[(1, 4, 0)]);
    }

    #[test]
    fn resize_identity_shape() {
        let img = ramp(6, 6);
        let r = resize(&img, 6, 6);
        for (a, b) in r.iter().zip(img.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let up = resize(&img, 12, 12);
        assert_eq!(up.dim(), (12, 12, 1));
        assert!(up.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn center_crop_indices() {
        let img = ramp(8, 8);
        let c = center_crop(&img, 4, 4).unwrap();
        assert_eq!(c[(0, 0, 0)], img[(2, 2, 0)]);
        assert_eq!(c[(3, 3, 0)], img[(5, 5, 0)]);
    }

    #[test]
    fn blur_tiny_sigma_is_near_identity() {
        let img = ramp(8, 8);
        let b = gaussian_blur(&img, 1e-4).unwrap();
        let max = b
            .iter()
            .zip(img.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max < 1e-3, "max diff {max}");
    }

    #[test]
    fn blur_rejects_bad_sigma() {
        let img = ramp(4, 4);
        assert!(gaussian_blur(&img, 0.0).is_err());
        assert!(gaussian_blur(&img, -1.0).is_err());
    }

    #[test]
    fn jpeg_q100_roundtrip_close_on_smooth_images() {
        // Smooth gradients behave like natural image content.
        let img = Image::from_shape_fn((32, 32, 3), |(y, x, c)| {
            0.5 + 0.3 * ((y as f64) / 32.0) - 0.2 * ((x as f64) / 32.0) + 0.05 * c as f64
        });
        let out = jpeg_roundtrip(&img, 100).unwrap();
        let max = out
            .iter()
            .zip(img.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max <= 0.02, "max abs diff {max}");
    }

    #[test]
    fn jpeg_rejects_bad_quality() {
        let img = ramp(8, 8);
        assert!(jpeg_roundtrip(&img, 0).is_err());
        assert!(jpeg_roundtrip(&img, 101).is_err());
    }

    #[test]
    fn u8_roundtrip_quantizes() {
        let img = ramp(4, 4);
        let rt = from_u8(&to_u8(&img), 4, 4, 1).unwrap();
        let max = rt
            .iter()
            .zip(img.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max <= 0.5 / 255.0 + 1e-9);
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let mut img = ramp(4, 4);
        assert!(validate(&img).is_ok());
        img[(0, 0, 0)] = 1.5;
        assert!(validate(&img).is_err());
    }
}
