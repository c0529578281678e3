//! The training loop: SSL steps over a dataset bundle with per-epoch
//! accuracy traces.

use crate::data::types::DatasetBundle;
use crate::error::Error;
use crate::imgops::Image;
use crate::nn::{batch_to_input, logits_to_f64, Elem, ModelSpec, Network, SgdMomentum};
use crate::rng;
use crate::ssl::config::{SslAlgorithm, SslConfig};
use crate::ssl::loss;
use crate::train::eval::accuracy_on;
use crate::train::schedule::{lr_at, TrainSchedule};
use ndarray::Array2;
use rand::seq::SliceRandom;

/// Per-epoch measurements. `acc_unlabeled` is `None` when unlabeled
/// evaluation is disabled.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub acc_labeled: f64,
    pub acc_unlabeled: Option<f64>,
    pub acc_test: f64,
    pub loss_labeled: f64,
    pub loss_unlabeled: f64,
    pub mask_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochTrace {
    pub epochs: Vec<EpochStats>,
}

impl EpochTrace {
    pub fn final_test_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.acc_test)
    }

    /// CSV with header `epoch,acc_X,acc_U,acc_test,L_X,L_U,mask_rate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,acc_X,acc_U,acc_test,L_X,L_U,mask_rate\n");
        for e in &self.epochs {
            let acc_u = e
                .acc_unlabeled
                .map(|v| format!("{v}"))
                .unwrap_or_else(|| "nan".into());
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.epoch, e.acc_labeled, acc_u, e.acc_test, e.loss_labeled, e.loss_unlabeled,
                e.mask_rate
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> crate::error::Result<Self> {
        let mut epochs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 7 {
                return Err(Error::Load(format!("bad trace line {i}: {line:?}")));
            }
            let f = |s: &str| -> crate::error::Result<f64> {
                s.parse()
                    .map_err(|_| Error::Load(format!("bad number {s:?} in trace line {i}")))
            };
            let acc_u = f(parts[2])?;
            epochs.push(EpochStats {
                epoch: parts[0]
                    .parse()
                    .map_err(|_| Error::Load(format!("bad epoch in line {i}")))?,
                acc_labeled: f(parts[1])?,
                acc_unlabeled: if acc_u.is_nan() { None } else { Some(acc_u) },
                acc_test: f(parts[3])?,
                loss_labeled: f(parts[4])?,
                loss_unlabeled: f(parts[5])?,
                mask_rate: f(parts[6])?,
            });
        }
        Ok(EpochTrace { epochs })
    }
}

/// Training failure carrying the trace of completed epochs.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: Error,
    pub partial: EpochTrace,
}

impl std::fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} (after {} completed epochs)",
            self.error,
            self.partial.epochs.len()
        )
    }
}

impl std::error::Error for TrainFailure {}

/// Cycling sampler over labeled indices: reshuffles each pass.
struct Cycle {
    order: Vec<usize>,
    pos: usize,
    pass: u64,
    seed: u64,
}

impl Cycle {
    fn new(len: usize, seed: u64) -> Self {
        let mut c = Cycle {
            order: (0..len).collect(),
            pos: 0,
            pass: 0,
            seed,
        };
        c.reshuffle();
        c
    }

    fn reshuffle(&mut self) {
        let mut r = rng::stream(self.seed, "shuffle-labeled", &[self.pass]);
        self.order.shuffle(&mut r);
        self.pos = 0;
        self.pass += 1;
    }

    fn take(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            if self.pos >= self.order.len() {
                self.reshuffle();
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

fn nonfinite(name: &str, v: f64) -> Option<Error> {
    (!v.is_finite()).then(|| Error::Training(format!("non-finite {name} ({v}) encountered")))
}

/// Train a model on the bundle. Fully deterministic for a fixed
/// `(bundle, spec, config, schedule)`.
///
/// Unlabeled samples reach the step functions without labels by
/// construction; sealed labels are touched only by the per-epoch
/// unlabeled-accuracy evaluation, and not at all when `eval_unlabeled` is
/// off.
pub fn train<F: Elem>(
    bundle: &DatasetBundle,
    spec: &ModelSpec,
    config: &SslConfig,
    schedule: &TrainSchedule,
) -> Result<(Network<F>, EpochTrace), TrainFailure> {
    let fail = |error: Error, partial: &EpochTrace| TrainFailure {
        error,
        partial: partial.clone(),
    };
    let mut trace = EpochTrace::default();
    let wrap = |e: Error| TrainFailure {
        error: e,
        partial: EpochTrace::default(),
    };
    config.validate().map_err(wrap)?;
    schedule.validate().map_err(wrap)?;
    if bundle.labeled.is_empty() {
        return Err(wrap(Error::Training("labeled set is empty".into())));
    }
    if let Some((h, w, c)) = bundle.image_shape() {
        if (c, h, w) != spec.input {
            return Err(wrap(Error::Training(format!(
                "bundle images are {c}x{h}x{w} (CxHxW) but the model expects {:?}",
                spec.input
            ))));
        }
    }
    if spec.classes != bundle.label_space.num_classes() {
        return Err(wrap(Error::Training(format!(
            "model has {} outputs but the label space has {} classes",
            spec.classes,
            bundle.label_space.num_classes()
        ))));
    }

    let seed = schedule.seed;
    let mut net: Network<F> = spec.build(seed).map_err(wrap)?;
    let mut opt = SgdMomentum::new(schedule.momentum, schedule.weight_decay);

    let use_unlabeled = !bundle.unlabeled.is_empty()
        && config.lambda_u > 0.0
        && config.algorithm != SslAlgorithm::Supervised;
    let steps_per_epoch = if use_unlabeled {
        bundle.unlabeled.len().div_ceil(schedule.batch_unlabeled)
    } else {
        bundle.labeled.len().div_ceil(schedule.batch_labeled)
    };
    let total_steps = schedule.epochs * steps_per_epoch;
    let labels: Vec<usize> = bundle
        .labeled
        .iter()
        .map(|s| s.label.expect("validated labeled set"))
        .collect();
    let mut labeled_cycle = Cycle::new(bundle.labeled.len(), seed);

    // Fixed subsample for per-epoch unlabeled accuracy.
    let eval_u_indices: Vec<usize> = if schedule.eval_unlabeled && use_unlabeled {
        let mut ix: Vec<usize> = (0..bundle.unlabeled.len()).collect();
        if let Some(cap) = schedule.eval_unlabeled_cap {
            if cap < ix.len() {
                let mut r = rng::stream(seed, "eval-unlabeled-subsample", &[]);
                ix.shuffle(&mut r);
                ix.truncate(cap);
                ix.sort_unstable();
            }
        }
        ix
    } else {
        Vec::new()
    };

    let mut global_step = 0usize;
    for epoch in 0..schedule.epochs {
        let mut unlabeled_order: Vec<usize> = (0..bundle.unlabeled.len()).collect();
        if use_unlabeled {
            let mut r = rng::stream(seed, "shuffle-unlabeled", &[epoch as u64]);
            unlabeled_order.shuffle(&mut r);
        }

        let mut sum_lx = 0.0;
        let mut sum_lu = 0.0;
        let mut sum_mask = 0.0;
        for step in 0..steps_per_epoch {
            let lr = lr_at(schedule.lr_shape, global_step, total_steps, schedule.lr0)
                .map_err(|e| fail(e, &trace))?;
            let gs = global_step as u64;
            net.zero_grads();

            // Unlabeled guess pass first: its activations are not needed
            // for any backward pass.
            let mut weak_probs: Option<Array2<f64>> = None;
            let mut batch_u: Vec<usize> = Vec::new();
            if use_unlabeled && config.algorithm != SslAlgorithm::MixMatch {
                let lo = step * schedule.batch_unlabeled;
                let hi = (lo + schedule.batch_unlabeled).min(unlabeled_order.len());
                batch_u = unlabeled_order[lo..hi].to_vec();
                if !batch_u.is_empty() {
                    let views: Vec<Image> = batch_u
                        .iter()
                        .enumerate()
                        .map(|(slot, ix)| {
                            crate::augment::weak_augment(
                                &bundle.unlabeled[*ix].pixels,
                                rng::derive(seed, "aug-u-weak", &[gs, slot as u64]),
                            )
                        })
                        .collect();
                    let refs: Vec<&Image> = views.iter().collect();
                    let logits = net.forward(&batch_to_input::<F>(&refs), false);
                    weak_probs = Some(loss::softmax_rows(&logits_to_f64(&logits)));
                }
            }

            // Labeled pass.
            let batch_l = labeled_cycle.take(schedule.batch_labeled);
            let views_l: Vec<Image> = batch_l
                .iter()
                .enumerate()
                .map(|(slot, ix)| {
                    crate::augment::weak_augment(
                        &bundle.labeled[*ix].pixels,
                        rng::derive(seed, "aug-labeled", &[gs, slot as u64]),
                    )
                })
                .collect();
            let refs_l: Vec<&Image> = views_l.iter().collect();
            let logits_l = net.forward(&batch_to_input::<F>(&refs_l), true);
            let labels_l: Vec<usize> = batch_l.iter().map(|ix| labels[*ix]).collect();
            let (l_x, grad_l) = loss::cross_entropy_hard(&logits_to_f64(&logits_l), &labels_l)
                .map_err(|e| fail(e, &trace))?;
            if let Some(e) = nonfinite("labeled loss", l_x) {
                return Err(fail(e, &trace));
            }
            net.backward(&grad_l.mapv(F::from_float));

            // Unlabeled pass.
            let mut l_u = 0.0;
            let mut mask_rate = 0.0;
            if use_unlabeled {
                match config.algorithm {
                    SslAlgorithm::FixMatch | SslAlgorithm::Uda => {
                        if let Some(weak) = &weak_probs {
                            let views_s: Vec<Image> = batch_u
                                .iter()
                                .enumerate()
                                .map(|(slot, ix)| {
                                    crate::augment::strong_augment(
                                        &bundle.unlabeled[*ix].pixels,
                                        rng::derive(seed, "aug-u-strong", &[gs, slot as u64]),
                                    )
                                })
                                .collect();
                            let refs_s: Vec<&Image> = views_s.iter().collect();
                            let logits_s = net.forward(&batch_to_input::<F>(&refs_s), true);
                            let logits_s64 = logits_to_f64(&logits_s);
                            let (lu, grad_u, mr) = if config.algorithm == SslAlgorithm::FixMatch {
                                let (targets, mask) = loss::fixmatch_targets(weak, config.tau);
                                let mut rows = Array2::<f64>::zeros(logits_s64.dim());
                                for (i, t) in targets.iter().enumerate() {
                                    rows[(i, *t)] = 1.0;
                                }
                                loss::cross_entropy_soft_masked(&logits_s64, &rows, &mask)
                                    .map_err(|e| fail(e, &trace))?
                            } else {
                                let mask: Vec<bool> = weak
                                    .rows()
                                    .into_iter()
                                    .map(|r| {
                                        r.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                                            > config.tau
                                    })
                                    .collect();
                                let targets = loss::sharpen_rows(weak, config.temperature)
                                    .map_err(|e| fail(e, &trace))?;
                                loss::cross_entropy_soft_masked(&logits_s64, &targets, &mask)
                                    .map_err(|e| fail(e, &trace))?
                            };
                            l_u = lu;
                            mask_rate = mr;
                            if let Some(e) = nonfinite("unlabeled loss", l_u) {
                                return Err(fail(e, &trace));
                            }
                            let scaled = grad_u.mapv(|v| F::from_float(v * config.lambda_u));
                            net.backward(&scaled);
                        }
                    }
                    SslAlgorithm::MixMatch => {
                        let lo = step * schedule.batch_unlabeled;
                        let hi = (lo + schedule.batch_unlabeled).min(unlabeled_order.len());
                        batch_u = unlabeled_order[lo..hi].to_vec();
                        if !batch_u.is_empty() {
                            // K weak views; logits first, then a re-forward
                            // per view to backpropagate its gradient.
                            let k = config.k_augment;
                            let mut view_images: Vec<Vec<Image>> = Vec::with_capacity(k);
                            let mut view_logits: Vec<Array2<f64>> = Vec::with_capacity(k);
                            for v in 0..k {
                                let views: Vec<Image> = batch_u
                                    .iter()
                                    .enumerate()
                                    .map(|(slot, ix)| {
                                        crate::augment::weak_augment(
                                            &bundle.unlabeled[*ix].pixels,
                                            rng::derive(
                                                seed,
                                                "aug-u-view",
                                                &[gs, v as u64, slot as u64],
                                            ),
                                        )
                                    })
                                    .collect();
                                let refs: Vec<&Image> = views.iter().collect();
                                let logits = net.forward(&batch_to_input::<F>(&refs), true);
                                view_logits.push(logits_to_f64(&logits));
                                view_images.push(views);
                            }
                            let labeled64 = logits_to_f64(&logits_l);
                            let step_eval = loss::mixmatch_loss(
                                &labeled64,
                                &labels_l,
                                &view_logits,
                                config,
                            )
                            .map_err(|e| fail(e, &trace))?;
                            l_u = step_eval.l_u;
                            mask_rate = step_eval.mask_rate;
                            if let Some(e) = nonfinite("unlabeled loss", l_u) {
                                return Err(fail(e, &trace));
                            }
                            for (views, grad) in
                                view_images.iter().zip(step_eval.grad_views.iter())
                            {
                                let refs: Vec<&Image> = views.iter().collect();
                                net.forward(&batch_to_input::<F>(&refs), true);
                                net.backward(&grad.mapv(F::from_float));
                            }
                        }
                    }
                    SslAlgorithm::Supervised => {}
                }
            }

            let mut params = net.params();
            opt.step(&mut params, lr);
            drop(params);

            sum_lx += l_x;
            sum_lu += l_u;
            sum_mask += mask_rate;
            global_step += 1;
        }

        // Per-epoch evaluation.
        let acc_labeled = accuracy_on(&mut net, &bundle.labeled, None);
        let acc_test = accuracy_on(&mut net, &bundle.test, None);
        let acc_unlabeled = if !eval_u_indices.is_empty() {
            let samples: Vec<_> = eval_u_indices
                .iter()
                .map(|ix| bundle.unlabeled[*ix].clone())
                .collect();
            let truth: Vec<Option<usize>> = samples
                .iter()
                .map(|s| bundle.hidden.reveal(&s.id))
                .collect();
            Some(accuracy_on(&mut net, &samples, Some(&truth)))
        } else {
            None
        };
        trace.epochs.push(EpochStats {
            epoch,
            acc_labeled,
            acc_unlabeled,
            acc_test,
            loss_labeled: sum_lx / steps_per_epoch as f64,
            loss_unlabeled: sum_lu / steps_per_epoch as f64,
            mask_rate: sum_mask / steps_per_epoch as f64,
        });
    }

    let _ = evaluate; // re-exported; used by callers
    Ok((net, trace))
}
