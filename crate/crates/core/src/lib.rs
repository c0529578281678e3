//! Research toolkit for untargeted poisoning of semi-supervised learning (SSL)
//! on image data, built around the `phantom` pattern-overlay attack.
//!
//! The crate is organized along the experiment pipeline:
//!
//! - [`data`]: dataset ingestion (MNIST/CIFAR-10/folder/synthetic), labeled
//!   subset selection, label-space grouping, sealed hidden labels.
//! - [`attack`]: guess-set construction, poisoning-pattern assembly and
//!   blending, PDR-controlled injection into the unlabeled set.
//! - [`baselines`]: comparison attacks (empty images, removal, cross-class
//!   interpolation, warp trigger, FGSM, pattern variants).
//! - [`augment`]: weak/strong augmentation policies and corruption transforms.
//! - [`ssl`]: MixMatch / UDA / FixMatch objectives at the logit level, with
//!   analytic gradients.
//! - [`nn`]: a small CPU convnet with explicit backward passes, backbones,
//!   and GradCAM saliency.
//! - [`train`]: the training loop, cosine learning-rate schedule, per-epoch
//!   traces, and evaluation.
//! - [`defense`]: K-density scoring, threshold tests, and a detector
//!   classifier with confusion-matrix metrics.
//! - [`platform`]: local emulation of upload pipelines (stacking, padding,
//!   resizing, recompression).
//! - [`exp`]: experiment configs, config hashing, single runs, sweeps, and
//!   report emission.

pub mod attack;
pub mod augment;
pub mod baselines;
pub mod data;
pub mod defense;
pub mod error;
pub mod exp;
pub mod imgops;
pub mod nn;
pub mod platform;
pub mod rng;
pub mod ssl;
pub mod train;

pub use error::{Error, Result};
