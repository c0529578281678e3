//! Corruption transforms used as robustness probes and input-space
//! defenses: Gaussian smoothing, JPEG recompression, random rotation, and
//! additive Gaussian noise.

use crate::error::{Error, Result};
use crate::imgops::{self, Image};
use crate::rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Corruption {
    /// Gaussian blur with standard deviation `sigma` > 0 (pixels).
    Smoothing { sigma: f64 },
    /// JPEG encode/decode at `quality` in [1, 100].
    Jpeg { quality: u8 },
    /// Rotation by a uniform angle from `[min_deg, max_deg]`.
    Rotation { min_deg: f64, max_deg: f64 },
    /// Zero-mean Gaussian pixel noise, clipped to [0, 1].
    Noise { sigma: f64 },
}

impl Corruption {
    pub fn validate(&self) -> Result<()> {
        match self {
            Corruption::Smoothing { sigma } | Corruption::Noise { sigma } => {
                if *sigma <= 0.0 || !sigma.is_finite() {
                    return Err(Error::Argument(format!("sigma must be > 0, got {sigma}")));
                }
            }
            Corruption::Jpeg { quality } => {
                if !(1..=100).contains(quality) {
                    return Err(Error::Argument(format!(
                        "jpeg quality must be in [1, 100], got {quality}"
                    )));
                }
            }
            Corruption::Rotation { min_deg, max_deg } => {
                if !(-180.0..=180.0).contains(min_deg)
                    || !(-180.0..=180.0).contains(max_deg)
                    || min_deg > max_deg
                {
                    return Err(Error::Argument(format!(
                        "rotation range [{min_deg}, {max_deg}] must lie within [-180, 180]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Apply a corruption. The seed only matters for the stochastic kinds
/// (rotation angle, noise).
pub fn corrupt(image: &Image, corruption: &Corruption, seed: u64) -> Result<Image> {
    corruption.validate()?;
    match corruption {
        Corruption::Smoothing { sigma } => imgops::gaussian_blur(image, *sigma),
        Corruption::Jpeg { quality } => imgops::jpeg_roundtrip(image, *quality),
        Corruption::Rotation { min_deg, max_deg } => {
            let mut r = rng::stream(seed, "corrupt-rotation", &[]);
            let angle = if (max_deg - min_deg).abs() < f64::EPSILON {
                *min_deg
            } else {
                r.random_range(*min_deg..*max_deg)
            };
            Ok(imgops::rotate(image, angle, 0.0))
        }
        Corruption::Noise { sigma } => {
            let mut r = rng::stream(seed, "corrupt-noise", &[]);
            let normal = Normal::new(0.0, *sigma)
                .map_err(|e| Error::Argument(format!("bad noise sigma: {e}")))?;
            Ok(image.mapv(|v| (v + normal.sample(&mut r)).clamp(0.0, 1.0)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_image() -> Image {
        Image::from_shape_fn((16, 16, 1), |(y, x, _)| {
            0.5 + 0.25 * ((y as f64) / 16.0) - 0.2 * ((x as f64) / 16.0)
        })
    }

    #[test]
    fn smoothing_limit_is_identity() {
        let img = smooth_image();
        let out = corrupt(&img, &Corruption::Smoothing { sigma: 1e-4 }, 0).unwrap();
        let max = out
            .iter()
            .zip(img.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max < 1e-3);
    }

    #[test]
    fn jpeg_q100_is_close() {
        let img = smooth_image();
        let out = corrupt(&img, &Corruption::Jpeg { quality: 100 }, 0).unwrap();
        let max = out
            .iter()
            .zip(img.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max <= 0.02, "max {max}");
    }

    #[test]
    fn noise_respects_range_and_seed() {
        let img = smooth_image();
        let a = corrupt(&img, &Corruption::Noise { sigma: 0.05 }, 9).unwrap();
        let b = corrupt(&img, &Corruption::Noise { sigma: 0.05 }, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_ne!(a, img);
    }

    #[test]
    fn bad_params_rejected() {
        let img = smooth_image();
        assert!(corrupt(&img, &Corruption::Smoothing { sigma: 0.0 }, 0).is_err());
        assert!(corrupt(&img, &Corruption::Jpeg { quality: 0 }, 0).is_err());
        assert!(corrupt(
            &img,
            &Corruption::Rotation {
                min_deg: 30.0,
                max_deg: -30.0
            },
            0
        )
        .is_err());
    }
}
