//! A small CPU convnet with explicit backward passes.
//!
//! Layers cache their forward state, so the call pattern is
//! `forward -> backward -> optimizer step`; gradient accumulators persist
//! across passes until `zero_grads`.

pub mod backbone;
pub mod elem;
pub mod gradcam;
pub mod layers;
pub mod net;
pub mod sgd;

pub use backbone::{Backbone, ModelSpec};
pub use elem::Elem;
pub use gradcam::gradcam;
pub use layers::{Layer, LayerKind, Param};
pub use net::{batch_to_input, logits_to_f64, Network};
pub use sgd::SgdMomentum;
