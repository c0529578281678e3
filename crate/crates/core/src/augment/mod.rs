//! Weak/strong augmentation policies and corruption transforms.

pub mod corrupt;
pub mod strong;
pub mod weak;

pub use corrupt::{corrupt, Corruption};
pub use strong::{strong_augment, StrongOp};
pub use weak::weak_augment;

use crate::error::{Error, Result};
use crate::imgops::Image;
use serde::{Deserialize, Serialize};

/// Augmentation policy selector, serializable in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AugmentKind {
    #[default]
    Weak,
    Strong,
    /// No augmentation (identity); useful for ablations.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AugmentPolicy {
    pub kind: AugmentKind,
}

impl AugmentPolicy {
    pub fn weak() -> Self {
        AugmentPolicy {
            kind: AugmentKind::Weak,
        }
    }

    pub fn strong() -> Self {
        AugmentPolicy {
            kind: AugmentKind::Strong,
        }
    }

    pub fn apply(&self, image: &Image, seed: u64) -> Image {
        match self.kind {
            AugmentKind::Weak => weak_augment(image, seed),
            AugmentKind::Strong => strong_augment(image, seed),
            AugmentKind::None => image.clone(),
        }
    }

    /// Weak policies may only flip and translate; anything else in the weak
    /// role is a configuration error.
    pub fn validate_role(&self, role_weak: bool) -> Result<()> {
        if role_weak && self.kind == AugmentKind::Strong {
            return Err(Error::Config(
                "the weak-augmentation role cannot use the strong op set".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_dispatch_and_determinism() {
        let img = Image::from_shape_fn((8, 8, 1), |(y, x, _)| ((y + x) % 2) as f64);
        let weak = AugmentPolicy::weak();
        assert_eq!(weak.apply(&img, 4), weak.apply(&img, 4));
        let none = AugmentPolicy {
            kind: AugmentKind::None,
        };
        assert_eq!(none.apply(&img, 4), img);
    }

    #[test]
    fn weak_role_rejects_strong_policy() {
        assert!(AugmentPolicy::strong().validate_role(true).is_err());
        assert!(AugmentPolicy::strong().validate_role(false).is_ok());
    }
}
