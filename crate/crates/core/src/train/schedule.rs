//! Learning-rate schedules and the training schedule config.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LrShape {
    /// `lr0 * cos(7 pi step / (16 total))`: decays to ~0.195 lr0, never
    /// reaching zero. The shape used by the cited SSL implementations.
    #[default]
    SevenSixteenths,
    /// `lr0 * cos(pi step / (2 total))`: a plain quarter-wave decay to zero.
    HalfCosine,
}

/// Cosine-decayed learning rate at `step` of `total_steps` with the default
/// seven-sixteenths shape. `lr(0) = lr0`, monotone non-increasing.
pub fn cosine_lr(step: usize, total_steps: usize, lr0: f64) -> Result<f64> {
    lr_at(LrShape::SevenSixteenths, step, total_steps, lr0)
}

pub fn lr_at(shape: LrShape, step: usize, total_steps: usize, lr0: f64) -> Result<f64> {
    if step > total_steps {
        return Err(Error::Argument(format!(
            "step {step} exceeds total_steps {total_steps}"
        )));
    }
    if lr0 < 0.0 || !lr0.is_finite() {
        return Err(Error::Argument(format!("lr0 must be >= 0, got {lr0}")));
    }
    if total_steps == 0 {
        return Ok(lr0);
    }
    let frac = step as f64 / total_steps as f64;
    let angle = match shape {
        LrShape::SevenSixteenths => 7.0 * std::f64::consts::PI * frac / 16.0,
        LrShape::HalfCosine => std::f64::consts::PI * frac / 2.0,
    };
    Ok(lr0 * angle.cos())
}

/// Loop shape: epochs, batch sizes, optimizer settings, and the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub batch_labeled: usize,
    pub batch_unlabeled: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_shape: LrShape,
    pub seed: u64,
    /// Evaluate unlabeled-set accuracy on at most this many samples per
    /// epoch (a fixed seeded subsample); `None` means the full set.
    pub eval_unlabeled_cap: Option<usize>,
    /// Disable per-epoch unlabeled accuracy entirely (no sealed-label
    /// reveals happen during the run).
    pub eval_unlabeled: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs: 30,
            batch_labeled: 64,
            batch_unlabeled: 64,
            lr0: 0.03,
            momentum: 0.9,
            weight_decay: 0.0,
            lr_shape: LrShape::SevenSixteenths,
            seed: 0,
            eval_unlabeled_cap: Some(2000),
            eval_unlabeled: true,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_labeled == 0 || self.batch_unlabeled == 0 {
            return Err(Error::Config("batch sizes must be >= 1".into()));
        }
        if self.lr0 < 0.0 || !self.lr0.is_finite() {
            return Err(Error::Config(format!("lr0 must be >= 0, got {}", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be >= 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_lr0() {
        assert_eq!(cosine_lr(0, 100, 0.03).unwrap(), 0.03);
    }

    #[test]
    fn final_value_matches_closed_form() {
        let lr = cosine_lr(100, 100, 1.0).unwrap();
        let expected = (7.0 * std::f64::consts::PI / 16.0).cos();
        assert!((lr - expected).abs() < 1e-12);
        assert!((expected - 0.19509).abs() < 1e-5);
    }

    #[test]
    fn zero_lr0_stays_zero() {
        for s in [0, 5, 10] {
            assert_eq!(cosine_lr(s, 10, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn monotone_non_increasing_and_positive() {
        let mut prev = f64::INFINITY;
        for s in 0..=1000 {
            let lr = cosine_lr(s, 1000, 0.03).unwrap();
            assert!(lr > 0.0);
            assert!(lr <= prev + 1e-15);
            prev = lr;
        }
    }

    #[test]
    fn half_cosine_ends_at_zero() {
        let lr = lr_at(LrShape::HalfCosine, 10, 10, 1.0).unwrap();
        assert!(lr.abs() < 1e-12);
    }

    #[test]
    fn step_beyond_total_is_an_error() {
        assert!(cosine_lr(11, 10, 0.03).is_err());
    }
}
