//! SGD with momentum and decoupled weight decay on weight tensors.

use crate::nn::elem::Elem;
use crate::nn::layers::Param;
use ndarray::ArrayD;

pub struct SgdMomentum<F: Elem> {
    momentum: f64,
    weight_decay: f64,
    velocity: Vec<ArrayD<F>>,
}

impl<F: Elem> SgdMomentum<F> {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        SgdMomentum {
            momentum,
            weight_decay,
            velocity: Vec::new(),
        }
    }

    /// `v = mu v + g (+ wd w); w -= lr v`. Parameter order must be stable
    /// across steps.
    pub fn step(&mut self, params: &mut [Param<'_, F>], lr: f64) {
        if self.velocity.is_empty() {
            self.velocity = params
                .iter()
                .map(|p| ArrayD::zeros(p.value.raw_dim()))
                .collect();
        }
        assert_eq!(self.velocity.len(), params.len(), "parameter set changed");
        let mu = F::from_float(self.momentum);
        let lr = F::from_float(lr);
        let wd = F::from_float(self.weight_decay);
        for (p, v) in params.iter_mut().zip(self.velocity.iter_mut()) {
            ndarray::Zip::from(&mut **v)
                .and(&**p.grad)
                .and(&**p.value)
                .for_each(|v, g, w| {
                    let mut g = *g;
                    if p.decay {
                        g = g + wd * *w;
                    }
                    *v = mu * *v + g;
                });
            ndarray::Zip::from(&mut **p.value)
                .and(&**v)
                .for_each(|w, v| *w = *w - lr * *v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn momentum_accumulates() {
        let mut w = ArrayD::<f64>::zeros(IxDyn(&[2]));
        let mut g = ArrayD::<f64>::ones(IxDyn(&[2]));
        let mut opt = SgdMomentum::new(0.5, 0.0);
        let mut params = vec![Param {
            name: "w".into(),
            value: &mut w,
            grad: &mut g,
            decay: false,
        }];
        opt.step(&mut params, 0.1);
        // v = 1, w = -0.1
        assert!((params[0].value[0] + 0.1).abs() < 1e-12);
        opt.step(&mut params, 0.1);
        // v = 0.5 + 1 = 1.5, w = -0.1 - 0.15 = -0.25
        assert!((params[0].value[0] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn weight_decay_applies_only_when_flagged() {
        let mut w = ArrayD::<f64>::ones(IxDyn(&[1]));
        let mut g = ArrayD::<f64>::zeros(IxDyn(&[1]));
        let mut opt = SgdMomentum::new(0.0, 0.1);
        let mut params = vec![Param {
            name: "w".into(),
            value: &mut w,
            grad: &mut g,
            decay: true,
        }];
        opt.step(&mut params, 1.0);
        // pure decay: w -= lr * wd * w
        assert!((params[0].value[0] - 0.9).abs() < 1e-12);
    }
}
