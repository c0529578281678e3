//! Scalar element trait so networks can run in f32 (fast training) or f64
//! (exact finite-difference checks) from the same code.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub trait Elem: ndarray::NdFloat + ndarray::LinalgScalar + Send + Sync + 'static {
    fn from_float(x: f64) -> Self;
    fn as_float(self) -> f64;
    /// Standard normal draw, always consuming the generator in f64 so the
    /// same seed yields the same weights across precisions.
    fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = StandardNormal.sample(rng);
        Self::from_float(z)
    }
}

impl Elem for f32 {
    fn from_float(x: f64) -> Self {
        x as f32
    }
    fn as_float(self) -> f64 {
        f64::from(self)
    }
}

impl Elem for f64 {
    fn from_float(x: f64) -> Self {
        x
    }
    fn as_float(self) -> f64 {
        self
    }
}
