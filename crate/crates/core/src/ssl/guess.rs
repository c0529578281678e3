//! Label guessing for unlabeled samples.

use crate::error::{Error, Result};
use crate::imgops::Image;
use crate::rng;
use crate::ssl::dist::ProbDist;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuessMode {
    /// Mean of the model's predictions over K weakly augmented views.
    Average,
    /// Prediction on a single weakly augmented view.
    WeakSingle,
}

/// Guess the label distribution of a sample. `predict` is the model,
/// `augment` produces a weakly augmented view for a derived seed.
pub fn guess_label<P, A>(
    mut predict: P,
    mut augment: A,
    sample: &Image,
    k: usize,
    mode: GuessMode,
    seed: u64,
) -> Result<ProbDist>
where
    P: FnMut(&Image) -> Result<ProbDist>,
    A: FnMut(&Image, u64) -> Image,
{
    if k == 0 {
        return Err(Error::Argument("k must be >= 1".into()));
    }
    match mode {
        GuessMode::WeakSingle => {
            let view = augment(sample, rng::derive(seed, "guess-view", &[0]));
            predict(&view)
        }
        GuessMode::Average => {
            let mut acc: Option<Vec<f64>> = None;
            for i in 0..k {
                let view = augment(sample, rng::derive(seed, "guess-view", &[i as u64]));
                let p = predict(&view)?;
                match &mut acc {
                    None => acc = Some(p.probs().to_vec()),
                    Some(a) => {
                        if a.len() != p.len() {
                            return Err(Error::Argument(
                                "model output dimension changed between views".into(),
                            ));
                        }
                        for (x, y) in a.iter_mut().zip(p.probs()) {
                            *x += y;
                        }
                    }
                }
            }
            let mut a = acc.expect("k >= 1");
            for x in &mut a {
                *x /= k as f64;
            }
            ProbDist::new(a)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn blank() -> Image {
        Array3::zeros((2, 2, 1))
    }

    #[test]
    fn k1_identity_augmentation_equals_raw_output() {
        let out = guess_label(
            |_| ProbDist::new(vec![0.7, 0.3]),
            |img, _| img.clone(),
            &blank(),
            1,
            GuessMode::Average,
            0,
        )
        .unwrap();
        assert_eq!(out.probs(), &[0.7, 0.3]);
    }

    #[test]
    fn constant_model_unchanged_by_k() {
        for k in [1, 3, 8] {
            let out = guess_label(
                |_| ProbDist::new(vec![0.25, 0.75]),
                |img, _| img.clone(),
                &blank(),
                k,
                GuessMode::Average,
                9,
            )
            .unwrap();
            assert!((out.probs()[1] - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn k2_averages_opposite_predictions() {
        let mut flip = false;
        let out = guess_label(
            move |_| {
                flip = !flip;
                if flip {
                    ProbDist::new(vec![1.0, 0.0])
                } else {
                    ProbDist::new(vec![0.0, 1.0])
                }
            },
            |img, _| img.clone(),
            &blank(),
            2,
            GuessMode::Average,
            0,
        )
        .unwrap();
        assert_eq!(out.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn weak_single_uses_one_view() {
        let mut calls = 0;
        let _ = guess_label(
            |_| ProbDist::new(vec![1.0]),
            |img, _| {
                calls += 1;
                img.clone()
            },
            &blank(),
            5,
            GuessMode::WeakSingle,
            0,
        )
        .unwrap();
        assert_eq!(calls, 1);
    }

    #[test]
    fn zero_k_rejected() {
        assert!(guess_label(
            |_| ProbDist::new(vec![1.0]),
            |img, _| img.clone(),
            &blank(),
            0,
            GuessMode::Average,
            0,
        )
        .is_err());
    }
}
