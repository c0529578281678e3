//! Sequential network with activation taps for saliency and feature
//! extraction.

use crate::error::{Error, Result};
use crate::nn::elem::Elem;
use crate::nn::layers::{Layer, LayerKind, Param};
use ndarray::{Array2, Array4};
use std::collections::HashMap;

pub struct Network<F: Elem> {
    pub layers: Vec<Box<dyn Layer<F>>>,
    input_shape: (usize, usize, usize), // (C, H, W)
    num_classes: usize,
}

impl<F: Elem> Network<F> {
    pub fn new(
        layers: Vec<Box<dyn Layer<F>>>,
        input_shape: (usize, usize, usize),
        num_classes: usize,
    ) -> Self {
        Network {
            layers,
            input_shape,
            num_classes,
        }
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_params(&mut self) -> usize {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params())
            .map(|p| p.value.len())
            .sum()
    }

    /// Logits for a batch; the final layer output must be `(N, K, 1, 1)`.
    pub fn forward(&mut self, x: &Array4<F>, train: bool) -> Array2<F> {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, train);
        }
        let (n, k, h, w) = cur.dim();
        debug_assert_eq!((h, w), (1, 1), "head must reduce spatial dims");
        cur.into_shape_with_order((n, k)).unwrap()
    }

    /// Forward keeping every intermediate activation (index i = output of
    /// layer i).
    pub fn forward_collect(&mut self, x: &Array4<F>, train: bool) -> (Array2<F>, Vec<Array4<F>>) {
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, train);
            acts.push(cur.clone());
        }
        let (n, k, _, _) = cur.dim();
        (cur.into_shape_with_order((n, k)).unwrap(), acts)
    }

    /// Backpropagate a logit gradient, accumulating parameter gradients;
    /// returns the gradient with respect to the input batch.
    pub fn backward(&mut self, grad_logits: &Array2<F>) -> Array4<F> {
        let (n, k) = grad_logits.dim();
        let mut grad = grad_logits
            .clone()
            .into_shape_with_order((n, k, 1, 1))
            .unwrap();
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad);
        }
        grad
    }

    /// Backpropagate keeping the gradient at every layer output (index i =
    /// gradient w.r.t. output of layer i).
    pub fn backward_collect(&mut self, grad_logits: &Array2<F>) -> Vec<Array4<F>> {
        let (n, k) = grad_logits.dim();
        let mut grads = vec![Array4::<F>::zeros((0, 0, 0, 0)); self.layers.len()];
        let mut grad = grad_logits
            .clone()
            .into_shape_with_order((n, k, 1, 1))
            .unwrap();
        for i in (0..self.layers.len()).rev() {
            grads[i] = grad.clone();
            grad = self.layers[i].backward(&grad);
        }
        grads
    }

    /// Features at the input of the final linear layer, flattened per sample.
    pub fn features(&mut self, x: &Array4<F>) -> Array2<F> {
        let head = self.head_index();
        let mut cur = x.clone();
        for layer in &mut self.layers[..head] {
            cur = layer.forward(&cur, false);
        }
        let (n, c, h, w) = cur.dim();
        cur.into_shape_with_order((n, c * h * w)).unwrap()
    }

    /// Index of the final linear (classifier head) layer.
    pub fn head_index(&self) -> usize {
        self.layers
            .iter()
            .rposition(|l| l.kind() == LayerKind::Linear)
            .expect("network has a linear head")
    }

    pub fn params(&mut self) -> Vec<Param<'_, F>> {
        self.layers.iter_mut().flat_map(|l| l.params()).collect()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params() {
            p.grad.fill(F::zero());
        }
    }

    /// Shapes of every layer output for the configured input shape.
    pub fn out_shapes(&self) -> Vec<(usize, usize, usize)> {
        let mut cur = self.input_shape;
        self.layers
            .iter()
            .map(|l| {
                cur = l.out_shape(cur);
                cur
            })
            .collect()
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name() == name)
    }

    /// Export all persistent tensors as f64 for checkpointing.
    pub fn export_tensors(&mut self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.tensors())
            .map(|(name, arr)| {
                (
                    name,
                    arr.shape().to_vec(),
                    arr.iter().map(|v| v.as_float()).collect(),
                )
            })
            .collect()
    }

    /// Load tensors exported by [`Network::export_tensors`]. Every tensor in
    /// the network must be present with a matching shape.
    pub fn import_tensors(&mut self, data: &[(String, Vec<usize>, Vec<f64>)]) -> Result<()> {
        let map: HashMap<&str, (&Vec<usize>, &Vec<f64>)> = data
            .iter()
            .map(|(n, s, v)| (n.as_str(), (s, v)))
            .collect();
        for layer in &mut self.layers {
            for (name, arr) in layer.tensors() {
                let (shape, values) = map.get(name.as_str()).ok_or_else(|| {
                    Error::Config(format!("checkpoint missing tensor {name}"))
                })?;
                if arr.shape() != shape.as_slice() {
                    return Err(Error::Config(format!(
                        "checkpoint tensor {name} has shape {shape:?}, expected {:?}",
                        arr.shape()
                    )));
                }
                for (dst, src) in arr.iter_mut().zip(values.iter()) {
                    *dst = F::from_float(*src);
                }
            }
        }
        Ok(())
    }

    /// Copy parameter values (not grads) from another network with the same
    /// architecture.
    pub fn clone_weights_from(&mut self, other: &mut Network<F>) -> Result<()> {
        let data = other.export_tensors();
        self.import_tensors(&data)
    }
}

/// Convert images `(H, W, C)` f64 to a batch tensor `(N, C, H, W)`.
pub fn batch_to_input<F: Elem>(images: &[&crate::imgops::Image]) -> Array4<F> {
    let (h, w, c) = images
        .first()
        .map(|i| i.dim())
        .unwrap_or((1, 1, 1));
    let mut out = Array4::<F>::zeros((images.len(), c, h, w));
    for (n, img) in images.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    out[(n, ch, y, x)] = F::from_float(img[(y, x, ch)]);
                }
            }
        }
    }
    out
}

/// Logits as f64 rows regardless of the network precision.
pub fn logits_to_f64<F: Elem>(logits: &Array2<F>) -> Array2<f64> {
    logits.mapv(|v| v.as_float())
}
