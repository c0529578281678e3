//! Probability vectors over the label space and temperature sharpening.

use crate::error::{Error, Result};

/// A probability distribution over classes: entries >= 0, summing to 1
/// within 1e-6.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist(Vec<f64>);

impl ProbDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Argument("empty probability vector".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Argument(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Argument(format!(
                "probabilities sum to {sum}, expected 1 within 1e-6"
            )));
        }
        Ok(ProbDist(probs))
    }

    /// Build from non-negative weights, normalizing to sum 1.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Argument("empty weight vector".into()));
        }
        if weights.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Argument(
                "weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::Argument("weights sum to zero".into()));
        }
        ProbDist::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry; ties break to the lowest class index so
    /// pseudo-labels are deterministic.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.0.iter().enumerate() {
            if *p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Temperature sharpening: `out_i = p_i^(1/T) / sum_c p_c^(1/T)`.
///
/// `T = 1` is the identity; `T < 1` concentrates mass on the argmax.
pub fn sharpen(dist: &ProbDist, temperature: f64) -> Result<ProbDist> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::Argument(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    let inv_t = 1.0 / temperature;
    let powered: Vec<f64> = dist.probs().iter().map(|p| p.powf(inv_t)).collect();
    let sum: f64 = powered.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        return Err(Error::Argument(
            "sharpening denominator vanished (all-zero input)".into(),
        ));
    }
    ProbDist::new(powered.into_iter().map(|p| p / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_sum() {
        assert!(ProbDist::new(vec![0.5, 0.6]).is_err());
        assert!(ProbDist::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbDist::new(vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn sharpen_identity_at_t1() {
        let p = ProbDist::new(vec![0.3, 0.2, 0.5]).unwrap();
        let s = sharpen(&p, 1.0).unwrap();
        for (a, b) in s.probs().iter().zip(p.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sharpen_uniform_stays_uniform() {
        let p = ProbDist::new(vec![0.25; 4]).unwrap();
        for t in [0.1, 0.5, 2.0] {
            let s = sharpen(&p, t).unwrap();
            for a in s.probs() {
                assert!((a - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sharpen_known_value() {
        // [0.8, 0.2] at T = 0.5: [0.64, 0.04] / 0.68.
        let p = ProbDist::new(vec![0.8, 0.2]).unwrap();
        let s = sharpen(&p, 0.5).unwrap();
        assert!((s.probs()[0] - 0.64 / 0.68).abs() < 1e-12);
        assert!((s.probs()[1] - 0.04 / 0.68).abs() < 1e-12);
    }

    #[test]
    fn sharpen_preserves_order_and_moves_mass() {
        let p = ProbDist::new(vec![0.5, 0.3, 0.2]).unwrap();
        let cold = sharpen(&p, 0.5).unwrap();
        let hot = sharpen(&p, 2.0).unwrap();
        assert_eq!(cold.argmax(), 0);
        assert_eq!(hot.argmax(), 0);
        assert!(cold.probs()[0] > p.probs()[0]);
        assert!(hot.probs()[0] < p.probs()[0]);
        assert!(cold.probs()[1] > cold.probs()[2]);
    }

    #[test]
    fn argmax_tie_breaks_low() {
        let p = ProbDist::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(p.argmax(), 0);
    }

    #[test]
    fn sharpen_rejects_bad_temperature() {
        let p = ProbDist::new(vec![1.0]).unwrap();
        assert!(sharpen(&p, 0.0).is_err());
        assert!(sharpen(&p, -1.0).is_err());
    }
}
