//! SSL algorithm selection and hyperparameters.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SslAlgorithm {
    MixMatch,
    Uda,
    FixMatch,
    /// Plain supervised training on the labeled set only.
    Supervised,
}

impl std::fmt::Display for SslAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SslAlgorithm::MixMatch => "mixmatch",
            SslAlgorithm::Uda => "uda",
            SslAlgorithm::FixMatch => "fixmatch",
            SslAlgorithm::Supervised => "supervised",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SslConfig {
    pub algorithm: SslAlgorithm,
    /// Sharpening temperature.
    pub temperature: f64,
    /// Weight of the unlabeled loss term.
    pub lambda_u: f64,
    /// Confidence threshold; a sample contributes only when its guess
    /// confidence is strictly greater than tau.
    pub tau: f64,
    /// Augmentation multiplicity for label guessing.
    pub k_augment: usize,
    /// Optional confidence threshold for MixMatch guesses (off by default;
    /// MixMatch as described has no threshold).
    pub mixmatch_tau: Option<f64>,
    /// Placeholder for MixUp interpolation inside MixMatch batches; not
    /// implemented, must stay false.
    pub mixmatch_mixup: bool,
}

impl Default for SslConfig {
    fn default() -> Self {
        SslConfig {
            algorithm: SslAlgorithm::FixMatch,
            temperature: 0.5,
            lambda_u: 1.0,
            tau: 0.8,
            k_augment: 1,
            mixmatch_tau: None,
            mixmatch_mixup: false,
        }
    }
}

impl SslConfig {
    /// Defaults per algorithm: T = 0.5, tau = 0.8, lambda_u = 1 for
    /// FixMatch/UDA and 100 for MixMatch (with K = 2 guess views).
    pub fn for_algorithm(algorithm: SslAlgorithm) -> Self {
        let mut cfg = SslConfig {
            algorithm,
            ..SslConfig::default()
        };
        match algorithm {
            SslAlgorithm::MixMatch => {
                cfg.lambda_u = 100.0;
                cfg.k_augment = 2;
            }
            SslAlgorithm::Supervised => {
                cfg.lambda_u = 0.0;
            }
            _ => {}
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature <= 0.0 || !self.temperature.is_finite() {
            return Err(Error::Config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if self.lambda_u < 0.0 || !self.lambda_u.is_finite() {
            return Err(Error::Config(format!(
                "lambda_u must be >= 0, got {}",
                self.lambda_u
            )));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!(
                "tau must be in [0, 1], got {}",
                self.tau
            )));
        }
        if self.k_augment == 0 {
            return Err(Error::Config("k_augment must be >= 1".into()));
        }
        if let Some(t) = self.mixmatch_tau {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!(
                    "mixmatch_tau must be in [0, 1], got {t}"
                )));
            }
        }
        if self.mixmatch_mixup {
            return Err(Error::Config(
                "mixmatch_mixup is a placeholder and not implemented".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_algorithm() {
        let mm = SslConfig::for_algorithm(SslAlgorithm::MixMatch);
        assert_eq!(mm.lambda_u, 100.0);
        assert_eq!(mm.k_augment, 2);
        let fm = SslConfig::for_algorithm(SslAlgorithm::FixMatch);
        assert_eq!(fm.lambda_u, 1.0);
        assert_eq!(fm.tau, 0.8);
        assert_eq!(fm.temperature, 0.5);
    }

    #[test]
    fn validation_catches_bad_fields() {
        let mut cfg = SslConfig::default();
        cfg.tau = 1.5;
        assert!(cfg.validate().is_err());
        cfg.tau = 0.8;
        cfg.mixmatch_mixup = true;
        assert!(cfg.validate().is_err());
    }
}
