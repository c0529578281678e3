//! MixMatch / UDA / FixMatch objectives at the logit level, with analytic
//! gradients for the total loss `L = L_X + lambda_u * L_U`.
//!
//! All functions work on `(batch, classes)` logit matrices in f64. Guessed
//! targets are treated as constants (no gradient flows through label
//! guessing), matching the stop-gradient semantics of the algorithms.

use crate::error::{Error, Result};
use crate::ssl::config::SslConfig;
use ndarray::{Array2, Axis};

/// Row-wise numerically stable softmax.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Row-wise log-softmax.
pub fn log_softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        row.mapv_inplace(|v| v - log_sum);
    }
    out
}

/// Row-wise sharpening of probability rows: `p_i^(1/T)` renormalized.
pub fn sharpen_rows(probs: &Array2<f64>, temperature: f64) -> Result<Array2<f64>> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(Error::Argument(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    let mut out = probs.clone();
    for mut row in out.rows_mut() {
        row.mapv_inplace(|p| p.powf(1.0 / temperature));
        let sum: f64 = row.sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::Argument(
                "sharpening denominator vanished (all-zero row)".into(),
            ));
        }
        row.mapv_inplace(|p| p / sum);
    }
    Ok(out)
}

/// Mean cross-entropy against hard labels, with gradient w.r.t. logits.
pub fn cross_entropy_hard(logits: &Array2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (b, k) = logits.dim();
    if b == 0 {
        return Err(Error::Argument("empty labeled batch".into()));
    }
    if labels.len() != b {
        return Err(Error::Argument(format!(
            "{} labels for a batch of {b}",
            labels.len()
        )));
    }
    if let Some(l) = labels.iter().find(|l| **l >= k) {
        return Err(Error::Argument(format!("label {l} outside {k} classes")));
    }
    let log_p = log_softmax_rows(logits);
    let mut loss = 0.0;
    for (i, l) in labels.iter().enumerate() {
        loss -= log_p[(i, *l)];
    }
    loss /= b as f64;
    let mut grad = softmax_rows(logits);
    for (i, l) in labels.iter().enumerate() {
        grad[(i, *l)] -= 1.0;
    }
    grad.mapv_inplace(|v| v / b as f64);
    Ok((loss, grad))
}

/// Mean masked cross-entropy against soft target rows. Masked-out samples
/// contribute zero loss and zero gradient; the mean divides by the full
/// batch size.
pub fn cross_entropy_soft_masked(
    logits: &Array2<f64>,
    targets: &Array2<f64>,
    mask: &[bool],
) -> Result<(f64, Array2<f64>, f64)> {
    let (b, k) = logits.dim();
    if targets.dim() != (b, k) || mask.len() != b {
        return Err(Error::Argument(
            "targets/mask shapes do not match logits".into(),
        ));
    }
    if b == 0 {
        return Ok((0.0, logits.clone(), 0.0));
    }
    let log_p = log_softmax_rows(logits);
    let p = softmax_rows(logits);
    let mut loss = 0.0;
    let mut grad = Array2::<f64>::zeros((b, k));
    let mut kept = 0usize;
    for i in 0..b {
        if !mask[i] {
            continue;
        }
        kept += 1;
        for c in 0..k {
            loss -= targets[(i, c)] * log_p[(i, c)];
            grad[(i, c)] = (p[(i, c)] - targets[(i, c)]) / b as f64;
        }
    }
    Ok((loss / b as f64, grad, kept as f64 / b as f64))
}

/// One-hot pseudo-labels from weak-view probabilities: argmax per row (ties
/// break to the lowest class index), retained iff confidence > tau.
pub fn fixmatch_targets(weak_probs: &Array2<f64>, tau: f64) -> (Vec<usize>, Vec<bool>) {
    let mut labels = Vec::with_capacity(weak_probs.nrows());
    let mut mask = Vec::with_capacity(weak_probs.nrows());
    for row in weak_probs.rows() {
        let mut best = 0;
        for (i, p) in row.iter().enumerate() {
            if *p > row[best] {
                best = i;
            }
        }
        labels.push(best);
        mask.push(row[best] > tau);
    }
    (labels, mask)
}

/// Losses and gradients of one optimization step. Gradients are for the
/// total objective: `grad_views[v]` already includes the `lambda_u` factor.
#[derive(Debug, Clone)]
pub struct StepEval {
    pub l_x: f64,
    pub l_u: f64,
    pub total: f64,
    pub mask_rate: f64,
    pub grad_labeled: Array2<f64>,
    pub grad_views: Vec<Array2<f64>>,
}

fn one_hot(labels: &[usize], k: usize) -> Array2<f64> {
    let mut out = Array2::zeros((labels.len(), k));
    for (i, l) in labels.iter().enumerate() {
        out[(i, *l)] = 1.0;
    }
    out
}

/// FixMatch: hard pseudo-labels from the weak view, cross-entropy on the
/// strong view over samples whose weak confidence exceeds tau.
pub fn fixmatch_step(
    labeled_logits: &Array2<f64>,
    labels: &[usize],
    weak_probs: &Array2<f64>,
    strong_logits: &Array2<f64>,
    cfg: &SslConfig,
) -> Result<StepEval> {
    cfg.validate()?;
    let (l_x, grad_labeled) = cross_entropy_hard(labeled_logits, labels)?;
    if strong_logits.nrows() == 0 || cfg.lambda_u == 0.0 {
        return Ok(StepEval {
            l_x,
            l_u: 0.0,
            total: l_x,
            mask_rate: 0.0,
            grad_labeled,
            grad_views: vec![],
        });
    }
    if weak_probs.dim() != strong_logits.dim() {
        return Err(Error::Argument(
            "weak/strong unlabeled shapes do not match".into(),
        ));
    }
    let (targets, mask) = fixmatch_targets(weak_probs, cfg.tau);
    let target_rows = one_hot(&targets, strong_logits.ncols());
    let (l_u, mut grad_u, mask_rate) =
        cross_entropy_soft_masked(strong_logits, &target_rows, &mask)?;
    grad_u.mapv_inplace(|v| v * cfg.lambda_u);
    Ok(StepEval {
        l_x,
        l_u,
        total: l_x + cfg.lambda_u * l_u,
        mask_rate,
        grad_labeled,
        grad_views: vec![grad_u],
    })
}

/// UDA: soft targets are the sharpened weak-view guesses; consistency
/// cross-entropy on the strong view, restricted to samples whose raw weak
/// confidence exceeds tau.
pub fn uda_step(
    labeled_logits: &Array2<f64>,
    labels: &[usize],
    weak_probs: &Array2<f64>,
    strong_logits: &Array2<f64>,
    cfg: &SslConfig,
) -> Result<StepEval> {
    cfg.validate()?;
    let (l_x, grad_labeled) = cross_entropy_hard(labeled_logits, labels)?;
    if strong_logits.nrows() == 0 || cfg.lambda_u == 0.0 {
        return Ok(StepEval {
            l_x,
            l_u: 0.0,
            total: l_x,
            mask_rate: 0.0,
            grad_labeled,
            grad_views: vec![],
        });
    }
    if weak_probs.dim() != strong_logits.dim() {
        return Err(Error::Argument(
            "weak/strong unlabeled shapes do not match".into(),
        ));
    }
    let mask: Vec<bool> = weak_probs
        .rows()
        .into_iter()
        .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > cfg.tau)
        .collect();
    let targets = sharpen_rows(weak_probs, cfg.temperature)?;
    let (l_u, mut grad_u, mask_rate) = cross_entropy_soft_masked(strong_logits, &targets, &mask)?;
    grad_u.mapv_inplace(|v| v * cfg.lambda_u);
    Ok(StepEval {
        l_x,
        l_u,
        total: l_x + cfg.lambda_u * l_u,
        mask_rate,
        grad_labeled,
        grad_views: vec![grad_u],
    })
}

/// MixMatch: the guess is the mean prediction over the K augmented views
/// (treated as a constant), sharpened with T; the unlabeled loss is the mean
/// squared distance between each view's probabilities and the sharpened
/// guess, normalized by the class count.
pub fn mixmatch_loss(
    labeled_logits: &Array2<f64>,
    labels: &[usize],
    view_logits: &[Array2<f64>],
    cfg: &SslConfig,
) -> Result<StepEval> {
    cfg.validate()?;
    let (l_x, grad_labeled) = cross_entropy_hard(labeled_logits, labels)?;
    let empty = view_logits.is_empty() || view_logits[0].nrows() == 0;
    if empty || cfg.lambda_u == 0.0 {
        return Ok(StepEval {
            l_x,
            l_u: 0.0,
            total: l_x,
            mask_rate: 0.0,
            grad_labeled,
            grad_views: vec![],
        });
    }
    let (b, k) = view_logits[0].dim();
    if view_logits.iter().any(|v| v.dim() != (b, k)) {
        return Err(Error::Argument("view logit shapes differ".into()));
    }
    let views: Vec<Array2<f64>> = view_logits.iter().map(softmax_rows).collect();
    let mut guess = Array2::<f64>::zeros((b, k));
    for v in &views {
        guess += v;
    }
    guess.mapv_inplace(|v| v / views.len() as f64);
    let sharpened = sharpen_rows(&guess, cfg.temperature)?;
    // Optional confidence mask on the (unsharpened) guess; off by default.
    let mask: Vec<bool> = match cfg.mixmatch_tau {
        Some(tau) => guess
            .rows()
            .into_iter()
            .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > tau)
            .collect(),
        None => vec![true; b],
    };
    let kept = mask.iter().filter(|m| **m).count();

    let denom = (views.len() * b * k) as f64;
    let mut l_u = 0.0;
    let mut grad_views = Vec::with_capacity(views.len());
    for probs in &views {
        let diff = probs - &sharpened; // d/dp of ||p - q||^2 is 2 (p - q)
        let mut grad = Array2::<f64>::zeros((b, k));
        for i in 0..b {
            if !mask[i] {
                continue;
            }
            for c in 0..k {
                l_u += diff[(i, c)] * diff[(i, c)];
            }
            // Backprop through softmax: J^T g = p .* (g - <p, g>).
            let p_row = probs.row(i);
            let g_row = diff.row(i);
            let dot: f64 = p_row.iter().zip(g_row.iter()).map(|(p, g)| p * g).sum();
            for c in 0..k {
                grad[(i, c)] =
                    cfg.lambda_u * 2.0 / denom * p_row[c] * (g_row[c] - dot);
            }
        }
        grad_views.push(grad);
    }
    l_u /= denom;
    Ok(StepEval {
        l_x,
        l_u,
        total: l_x + cfg.lambda_u * l_u,
        mask_rate: kept as f64 / b as f64,
        grad_labeled,
        grad_views,
    })
}

/// Mean prediction over K view probability matrices (the MixMatch guess
/// before sharpening).
pub fn average_probs(views: &[Array2<f64>]) -> Option<Array2<f64>> {
    let first = views.first()?;
    let mut out = Array2::<f64>::zeros(first.dim());
    for v in views {
        out += v;
    }
    Some(out / views.len() as f64)
}

/// Top-k accuracy of logit rows against labels.
pub fn topk_accuracy(logits: &Array2<f64>, labels: &[usize], k: usize) -> f64 {
    if logits.nrows() == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    for (row, label) in logits.axis_iter(Axis(0)).zip(labels) {
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|a, b| row[*b].partial_cmp(&row[*a]).unwrap().then(a.cmp(b)));
        if order.iter().take(k).any(|c| c == label) {
            hits += 1;
        }
    }
    hits as f64 / logits.nrows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssl::config::SslAlgorithm;
    use ndarray::array;

    fn fd_check<F>(loss_fn: F, logits: &Array2<f64>, analytic: &Array2<f64>, tol: f64)
    where
        F: Fn(&Array2<f64>) -> f64,
    {
        let h = 1e-6;
        for i in 0..logits.nrows() {
            for j in 0..logits.ncols() {
                let mut plus = logits.clone();
                plus[(i, j)] += h;
                let mut minus = logits.clone();
                minus[(i, j)] -= h;
                let fd = (loss_fn(&plus) - loss_fn(&minus)) / (2.0 * h);
                let a = analytic[(i, j)];
                let denom = fd.abs().max(a.abs()).max(1e-8);
                assert!(
                    ((fd - a) / denom).abs() < tol,
                    "grad mismatch at ({i},{j}): fd {fd} analytic {a}"
                );
            }
        }
    }

    #[test]
    fn ce_hard_matches_finite_differences() {
        let logits = array![[1.3, -0.2, 0.5], [0.1, 0.9, -1.0]];
        let labels = vec![0usize, 2];
        let (_, grad) = cross_entropy_hard(&logits, &labels).unwrap();
        fd_check(
            |l| cross_entropy_hard(l, &labels).unwrap().0,
            &logits,
            &grad,
            1e-5,
        );
    }

    #[test]
    fn fixmatch_masks_and_grads() {
        let cfg = SslConfig::for_algorithm(SslAlgorithm::FixMatch);
        let labeled = array![[2.0, -1.0], [0.3, 0.4]];
        let labels = vec![0usize, 1];
        let weak = array![[0.9, 0.1], [0.6, 0.4]];
        let strong = array![[0.5, -0.5], [1.0, 0.2]];
        let out = fixmatch_step(&labeled, &labels, &weak, &strong, &cfg).unwrap();
        // Only the first sample clears tau = 0.8.
        assert!((out.mask_rate - 0.5).abs() < 1e-12);
        assert!(out.grad_views[0].row(1).iter().all(|v| *v == 0.0));
        fd_check(
            |s| {
                fixmatch_step(&labeled, &labels, &weak, s, &cfg)
                    .unwrap()
                    .total
            },
            &strong,
            &out.grad_views[0],
            1e-5,
        );
    }

    #[test]
    fn fixmatch_trivial_threshold_cases() {
        let cfg = SslConfig::for_algorithm(SslAlgorithm::FixMatch);
        let weak = array![[0.9, 0.1], [0.6, 0.4], [0.5, 0.5]];
        let (targets, mask) = fixmatch_targets(&weak, cfg.tau);
        assert_eq!(targets, vec![0, 0, 0]); // tie breaks low
        assert_eq!(mask, vec![true, false, false]);
    }

    #[test]
    fn uda_threshold_edges() {
        let mut cfg = SslConfig::for_algorithm(SslAlgorithm::Uda);
        let labeled = array![[1.0, 0.0]];
        let labels = vec![0usize];
        let weak = array![[0.7, 0.3], [0.55, 0.45]];
        let strong = array![[0.2, 0.1], [0.0, 0.3]];
        cfg.tau = 1.0;
        let out = uda_step(&labeled, &labels, &weak, &strong, &cfg).unwrap();
        assert_eq!(out.l_u, 0.0);
        assert_eq!(out.mask_rate, 0.0);
        cfg.tau = 0.0;
        let out = uda_step(&labeled, &labels, &weak, &strong, &cfg).unwrap();
        assert_eq!(out.mask_rate, 1.0);
        fd_check(
            |s| uda_step(&labeled, &labels, &weak, s, &cfg).unwrap().total,
            &strong,
            &out.grad_views[0],
            1e-5,
        );
    }

    #[test]
    fn mixmatch_reduces_to_supervised_when_lambda_zero() {
        let mut cfg = SslConfig::for_algorithm(SslAlgorithm::MixMatch);
        cfg.lambda_u = 0.0;
        let labeled = array![[1.0, -1.0], [0.2, 0.1]];
        let labels = vec![0usize, 1];
        let views = vec![array![[0.3, 0.7]], array![[0.6, 0.4]]];
        let out = mixmatch_loss(&labeled, &labels, &views, &cfg).unwrap();
        let (l_x, _) = cross_entropy_hard(&labeled, &labels).unwrap();
        assert_eq!(out.total, l_x);
        assert!(out.grad_views.is_empty());
    }

    #[test]
    fn mixmatch_grads_match_finite_differences() {
        let cfg = SslConfig::for_algorithm(SslAlgorithm::MixMatch);
        let labeled = array![[1.0, -1.0]];
        let labels = vec![0usize];
        let v0 = array![[0.4, -0.3], [0.2, 0.9]];
        let v1 = array![[-0.1, 0.8], [0.5, 0.5]];
        let out = mixmatch_loss(&labeled, &labels, &[v0.clone(), v1.clone()], &cfg).unwrap();
        // Gradient w.r.t. view 0 holds view 1 fixed, but the guess still
        // depends on view 0; the guess is detached by definition, so the
        // finite-difference comparison must detach it too (recompute with
        // the perturbed view only in the direct term). Here we check the
        // detached objective: freeze the sharpened target.
        let views: Vec<Array2<f64>> = [&v0, &v1].iter().map(|v| softmax_rows(v)).collect();
        let guess = average_probs(&views).unwrap();
        let q = sharpen_rows(&guess, cfg.temperature).unwrap();
        let detached = |view: &Array2<f64>, other: &Array2<f64>, first: bool| -> f64 {
            let p0 = softmax_rows(view);
            let p1 = softmax_rows(other);
            let (a, b) = if first { (&p0, &p1) } else { (&p1, &p0) };
            let denom = (2 * q.nrows() * q.ncols()) as f64;
            let mut l = 0.0;
            for p in [a, b] {
                let d = p.clone() - &q;
                l += d.iter().map(|x| x * x).sum::<f64>();
            }
            cfg.lambda_u * l / denom
        };
        fd_check(
            |v| detached(v, &v1, true),
            &v0,
            &out.grad_views[0],
            1e-4,
        );
        fd_check(
            |v| detached(v, &v0, false),
            &v1,
            &out.grad_views[1],
            1e-4,
        );
    }

    #[test]
    fn topk_accuracy_counts() {
        let logits = array![[0.9, 0.5, 0.1], [0.1, 0.2, 0.7], [0.3, 0.3, 0.2]];
        let labels = vec![1usize, 2, 0];
        assert!((topk_accuracy(&logits, &labels, 1) - 2.0 / 3.0).abs() < 1e-12);
        assert!((topk_accuracy(&logits, &labels, 2) - 1.0).abs() < 1e-12);
        assert!((topk_accuracy(&logits, &labels, 3) - 1.0).abs() < 1e-12);
    }
}
