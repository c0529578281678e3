//! Semi-supervised objectives: label guessing, sharpening, and the
//! MixMatch / UDA / FixMatch loss steps.

pub mod config;
pub mod dist;
pub mod guess;
pub mod loss;

pub use config::{SslAlgorithm, SslConfig};
pub use dist::{sharpen, ProbDist};
pub use guess::{guess_label, GuessMode};
pub use loss::{
    cross_entropy_hard, fixmatch_step, fixmatch_targets, mixmatch_loss, sharpen_rows,
    softmax_rows, topk_accuracy, uda_step, StepEval,
};
