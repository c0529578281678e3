//! Weak augmentation: horizontal flip and small translations only.

use crate::imgops::{self, Image};
use crate::rng;
use rand::Rng;

/// Maximum translation as a fraction of width/height.
pub const MAX_SHIFT: f64 = 0.125;

/// Deterministic core: flip then translate with edge padding.
pub fn apply(image: &Image, flip: bool, dx: i64, dy: i64) -> Image {
    let mut out = if flip { imgops::hflip(image) } else { image.clone() };
    if dx != 0 || dy != 0 {
        out = imgops::translate(&out, dx, dy);
    }
    out
}

/// Sample the weak-augmentation parameters for a seed: flip with
/// probability 1/2, integer shifts up to 12.5% of each dimension.
pub fn sample_params(image: &Image, seed: u64) -> (bool, i64, i64) {
    let (h, w, _) = image.dim();
    let mut r = rng::stream(seed, "weak-augment", &[]);
    let flip = r.random_bool(0.5);
    let max_dx = (w as f64 * MAX_SHIFT).floor() as i64;
    let max_dy = (h as f64 * MAX_SHIFT).floor() as i64;
    let dx = if max_dx > 0 {
        r.random_range(-max_dx..=max_dx)
    } else {
        0
    };
    let dy = if max_dy > 0 {
        r.random_range(-max_dy..=max_dy)
    } else {
        0
    };
    (flip, dx, dy)
}

/// Weakly augment an image; identical `(image, seed)` pairs produce
/// identical outputs.
pub fn weak_augment(image: &Image, seed: u64) -> Image {
    let (flip, dx, dy) = sample_params(image, seed);
    apply(image, flip, dx, dy)
}
