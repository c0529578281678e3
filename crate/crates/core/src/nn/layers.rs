//! Network layers with explicit forward/backward passes.
//!
//! Tensors are `(N, C, H, W)`; each layer caches what its backward pass
//! needs, so `backward` must follow the matching `forward`.

use crate::nn::elem::Elem;
use ndarray::{Array1, Array2, Array4, ArrayD, Ix1, Ix2, Ix4, IxDyn};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Linear,
    Activation,
    Pool,
    Norm,
    Reshape,
    Block,
}

/// A trainable tensor with its gradient accumulator.
pub struct Param<'a, F: Elem> {
    pub name: String,
    pub value: &'a mut ArrayD<F>,
    pub grad: &'a mut ArrayD<F>,
    /// Whether weight decay applies (weights yes, biases and norms no).
    pub decay: bool,
}

pub trait Layer<F: Elem>: Send {
    fn name(&self) -> &str;
    fn kind(&self) -> LayerKind;
    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F>;
    fn backward(&mut self, grad: &Array4<F>) -> Array4<F>;
    fn params(&mut self) -> Vec<Param<'_, F>> {
        Vec::new()
    }
    /// All persistent tensors (trainable params plus e.g. running stats),
    /// for checkpointing.
    fn tensors(&mut self) -> Vec<(String, &mut ArrayD<F>)> {
        Vec::new()
    }
    fn out_shape(&self, input: (usize, usize, usize)) -> (usize, usize, usize);
}

fn he_normal<F: Elem, R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> ArrayD<F> {
    let std = (2.0 / fan_in as f64).sqrt();
    ArrayD::from_shape_simple_fn(IxDyn(shape), || {
        let z = F::sample_normal(rng);
        z * F::from_float(std)
    })
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

pub struct Conv2d<F: Elem> {
    name: String,
    in_c: usize,
    out_c: usize,
    k: usize,
    stride: usize,
    pad: usize,
    weight: ArrayD<F>, // (out_c, in_c, k, k)
    bias: ArrayD<F>,   // (out_c)
    wgrad: ArrayD<F>,
    bgrad: ArrayD<F>,
    cols: Option<Array2<F>>, // (N*OH*OW, in_c*k*k)
    in_dim: (usize, usize, usize, usize),
}

impl<F: Elem> Conv2d<F> {
    pub fn new(
        name: impl Into<String>,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_c * k * k;
        Conv2d {
            name: name.into(),
            in_c,
            out_c,
            k,
            stride,
            pad,
            weight: he_normal(&[out_c, in_c, k, k], fan_in, rng),
            bias: ArrayD::zeros(IxDyn(&[out_c])),
            wgrad: ArrayD::zeros(IxDyn(&[out_c, in_c, k, k])),
            bgrad: ArrayD::zeros(IxDyn(&[out_c])),
            cols: None,
            in_dim: (0, 0, 0, 0),
        }
    }

    fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h + 2 * self.pad - self.k) / self.stride + 1;
        let ow = (w + 2 * self.pad - self.k) / self.stride + 1;
        (oh, ow)
    }

    fn im2col(&self, x: &Array4<F>) -> Array2<F> {
        let (n, c, h, w) = x.dim();
        let (oh, ow) = self.out_hw(h, w);
        let k = self.k;
        let kk = c * k * k;
        let mut cols = Array2::<F>::zeros((n * oh * ow, kk));
        let xs = x.as_slice().expect("standard layout");
        let cs = cols.as_slice_mut().expect("standard layout");
        for ni in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = ((ni * oh + oy) * ow + ox) * kk;
                    for ci in 0..c {
                        let x_base = (ni * c + ci) * h;
                        for ky in 0..k {
                            let sy = (oy * self.stride + ky) as isize - self.pad as isize;
                            let col_base = row + (ci * k + ky) * k;
                            if sy < 0 || sy >= h as isize {
                                continue; // zeros already in place
                            }
                            let x_row = (x_base + sy as usize) * w;
                            for kx in 0..k {
                                let sx = (ox * self.stride + kx) as isize - self.pad as isize;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                cs[col_base + kx] = xs[x_row + sx as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, dcols: &Array2<F>) -> Array4<F> {
        let (n, c, h, w) = self.in_dim;
        let (oh, ow) = self.out_hw(h, w);
        let k = self.k;
        let kk = c * k * k;
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        let ds = dcols.as_slice().expect("standard layout");
        let xs = dx.as_slice_mut().expect("standard layout");
        for ni in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = ((ni * oh + oy) * ow + ox) * kk;
                    for ci in 0..c {
                        let x_base = (ni * c + ci) * h;
                        for ky in 0..k {
                            let sy = (oy * self.stride + ky) as isize - self.pad as isize;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let col_base = row + (ci * k + ky) * k;
                            let x_row = (x_base + sy as usize) * w;
                            for kx in 0..k {
                                let sx = (ox * self.stride + kx) as isize - self.pad as isize;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                xs[x_row + sx as usize] =
                                    xs[x_row + sx as usize] + ds[col_base + kx];
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

impl<F: Elem> Layer<F> for Conv2d<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Conv
    }

    fn forward(&mut self, x: &Array4<F>, _train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_c, "channel mismatch in {}", self.name);
        self.in_dim = (n, c, h, w);
        let (oh, ow) = self.out_hw(h, w);
        let cols = self.im2col(x);
        let w2d = self
            .weight
            .view()
            .into_dimensionality::<Ix4>()
            .unwrap()
            .into_shape_with_order((self.out_c, self.in_c * self.k * self.k))
            .unwrap()
            .to_owned();
        // (R, K) x (K, OC)
        let mut out2d = cols.dot(&w2d.t());
        let bias = self.bias.view().into_dimensionality::<Ix1>().unwrap();
        for mut row in out2d.rows_mut() {
            row += &bias;
        }
        self.cols = Some(cols);
        // (N, OH, OW, OC) -> (N, OC, OH, OW)
        let out = out2d
            .into_shape_with_order((n, oh, ow, self.out_c))
            .unwrap()
            .permuted_axes([0, 3, 1, 2]);
        out.as_standard_layout().to_owned()
    }

    fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let (n, oc, oh, ow) = grad.dim();
        let cols = self.cols.take().expect("backward before forward");
        // (N, OC, OH, OW) -> (R, OC)
        let g2d = grad
            .view()
            .permuted_axes([0, 2, 3, 1])
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((n * oh * ow, oc))
            .unwrap();
        let kk = self.in_c * self.k * self.k;
        // dW = g2d^T . cols -> (OC, K)
        let dw = g2d.t().dot(&cols);
        {
            let mut wg = self
                .wgrad
                .view_mut()
                .into_shape_with_order((self.out_c, kk))
                .unwrap();
            wg += &dw;
        }
        {
            let mut bg = self.bgrad.view_mut().into_dimensionality::<Ix1>().unwrap();
            for (c, col) in g2d.columns().into_iter().enumerate() {
                bg[c] = bg[c] + col.sum();
            }
        }
        let w2d = self
            .weight
            .view()
            .into_dimensionality::<Ix4>()
            .unwrap()
            .into_shape_with_order((self.out_c, kk))
            .unwrap()
            .to_owned();
        let dcols = g2d.dot(&w2d); // (R, K)
        self.col2im(&dcols)
    }

    fn params(&mut self) -> Vec<Param<'_, F>> {
        vec![
            Param {
                name: format!("{}.weight", self.name),
                value: &mut self.weight,
                grad: &mut self.wgrad,
                decay: true,
            },
            Param {
                name: format!("{}.bias", self.name),
                value: &mut self.bias,
                grad: &mut self.bgrad,
                decay: false,
            },
        ]
    }

    fn tensors(&mut self) -> Vec<(String, &mut ArrayD<F>)> {
        vec![
            (format!("{}.weight", self.name), &mut self.weight),
            (format!("{}.bias", self.name), &mut self.bias),
        ]
    }

    fn out_shape(&self, input: (usize, usize, usize)) -> (usize, usize, usize) {
        let (_, h, w) = input;
        let (oh, ow) = self.out_hw(h, w);
        (self.out_c, oh, ow)
    }
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

pub struct Relu<F: Elem> {
    name: String,
    mask: Option<Array4<F>>,
}

impl<F: Elem> Relu<F> {
    pub fn new(name: impl Into<String>) -> Self {
        Relu {
            name: name.into(),
            mask: None,
        }
    }
}

impl<F: Elem> Layer<F> for Relu<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Activation
    }

    fn forward(&mut self, x: &Array4<F>, _train: bool) -> Array4<F> {
        let zero = F::zero();
        let one = F::one();
        let mask = x.mapv(|v| if v > zero { one } else { zero });
        let out = x * &mask;
        self.mask = Some(mask);
        out
    }

    fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let mask = self.mask.take().expect("backward before forward");
        grad * &mask
    }

    fn out_shape(&self, input: (usize, usize, usize)) -> (usize, usize, usize) {
        input
    }
}

// ---------------------------------------------------------------------------
// 2x2 max pooling, stride 2
// ---------------------------------------------------------------------------

pub struct MaxPool2<F: Elem> {
    name: String,
    argmax: Option<Vec<usize>>, // flat input index per output element
    in_dim: (usize, usize, usize, usize),
    _marker: std::marker::PhantomData<F>,
}

impl<F: Elem> MaxPool2<F> {
    pub fn new(name: impl Into<String>) -> Self {
        MaxPool2 {
            name: name.into(),
            argmax: None,
            in_dim: (0, 0, 0, 0),
            _marker: std::marker::PhantomData,
        }
    }
}

impl<F: Elem> Layer<F> for MaxPool2<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Pool
    }

    fn forward(&mut self, x: &Array4<F>, _train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        self.in_dim = (n, c, h, w);
        let (oh, ow) = (h / 2, w / 2);
        let xs = x.as_slice().expect("standard layout");
        let mut out = Array4::<F>::zeros((n, c, oh, ow));
        let mut argmax = vec![0usize; n * c * oh * ow];
        {
            let os = out.as_slice_mut().unwrap();
            for ni in 0..n {
                for ci in 0..c {
                    let base = (ni * c + ci) * h;
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut best_ix = (base + 2 * oy) * w + 2 * ox;
                            let mut best = xs[best_ix];
                            // Ties keep the first index in scan order.
                            for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                                let ix = (base + 2 * oy + dy) * w + 2 * ox + dx;
                                if xs[ix] > best {
                                    best = xs[ix];
                                    best_ix = ix;
                                }
                            }
                            let o_ix = ((ni * c + ci) * oh + oy) * ow + ox;
                            os[o_ix] = best;
                            argmax[o_ix] = best_ix;
                        }
                    }
                }
            }
        }
        self.argmax = Some(argmax);
        out
    }

    fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let argmax = self.argmax.take().expect("backward before forward");
        let (n, c, h, w) = self.in_dim;
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        let gs = grad.as_slice().expect("standard layout");
        let ds = dx.as_slice_mut().unwrap();
        for (o_ix, in_ix) in argmax.iter().enumerate() {
            ds[*in_ix] = ds[*in_ix] + gs[o_ix];
        }
        dx
    }

    fn out_shape(&self, input: (usize, usize, usize)) -> (usize, usize, usize) {
        (input.0, input.1 / 2, input.2 / 2)
    }
}

// ---------------------------------------------------------------------------
// Global average pool
// ---------------------------------------------------------------------------

pub struct GlobalAvgPool<F: Elem> {
    name: String,
    in_dim: (usize, usize, usize, usize),
    _marker: std::marker::PhantomData<F>,
}

impl<F: Elem> GlobalAvgPool<F> {
    pub fn new(name: impl Into<String>) -> Self {
        GlobalAvgPool {
            name: name.into(),
            in_dim: (0, 0, 0, 0),
            _marker: std::marker::PhantomData,
        }
    }
}

impl<F: Elem> Layer<F> for GlobalAvgPool<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Pool
    }

    fn forward(&mut self, x: &Array4<F>, _train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        self.in_dim = (n, c, h, w);
        let scale = F::from_float(1.0 / (h * w) as f64);
        let mut out = Array4::<F>::zeros((n, c, 1, 1));
        for ni in 0..n {
            for ci in 0..c {
                let mut sum = F::zero();
                for v in x.slice(ndarray::s![ni, ci, .., ..]).iter() {
                    sum = sum + *v;
                }
                out[(ni, ci, 0, 0)] = sum * scale;
            }
        }
        out
    }

    fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let (n, c, h, w) = self.in_dim;
        let scale = F::from_float(1.0 / (h * w) as f64);
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        for ni in 0..n {
            for ci in 0..c {
                let g = grad[(ni, ci, 0, 0)] * scale;
                dx.slice_mut(ndarray::s![ni, ci, .., ..]).fill(g);
            }
        }
        dx
    }

    fn out_shape(&self, input: (usize, usize, usize)) -> (usize, usize, usize) {
        (input.0, 1, 1)
    }
}

// ---------------------------------------------------------------------------
// Flatten
// ---------------------------------------------------------------------------

pub struct Flatten<F: Elem> {
    name: String,
    in_dim: (usize, usize, usize, usize),
    _marker: std::marker::PhantomData<F>,
}

impl<F: Elem> Flatten<F> {
    pub fn new(name: impl Into<String>) -> Self {
        Flatten {
            name: name.into(),
            in_dim: (0, 0, 0, 0),
            _marker: std::marker::PhantomData,
        }
    }
}

impl<F: Elem> Layer<F> for Flatten<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Reshape
    }

    fn forward(&mut self, x: &Array4<F>, _train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        self.in_dim = (n, c, h, w);
        x.clone()
            .into_shape_with_order((n, c * h * w, 1, 1))
            .unwrap()
    }

    fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        grad.clone().into_shape_with_order(self.in_dim).unwrap()
    }

    fn out_shape(&self, input: (usize, usize, usize)) -> (usize, usize, usize) {
        (input.0 * input.1 * input.2, 1, 1)
    }
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

pub struct Linear<F: Elem> {
    name: String,
    in_f: usize,
    out_f: usize,
    weight: ArrayD<F>, // (out, in)
    bias: ArrayD<F>,   // (out)
    wgrad: ArrayD<F>,
    bgrad: ArrayD<F>,
    input: Option<Array2<F>>,
}

impl<F: Elem> Linear<F> {
    pub fn new(
        name: impl Into<String>,
        in_f: usize,
        out_f: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Linear {
            name: name.into(),
            in_f,
            out_f,
            weight: he_normal(&[out_f, in_f], in_f, rng),
            bias: ArrayD::zeros(IxDyn(&[out_f])),
            wgrad: ArrayD::zeros(IxDyn(&[out_f, in_f])),
            bgrad: ArrayD::zeros(IxDyn(&[out_f])),
            input: None,
        }
    }
}

impl<F: Elem> Layer<F> for Linear<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Linear
    }

    fn forward(&mut self, x: &Array4<F>, _train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        assert_eq!(c * h * w, self.in_f, "input size mismatch in {}", self.name);
        let x2d = x
            .clone()
            .into_shape_with_order((n, self.in_f))
            .unwrap();
        let w2d = self.weight.view().into_dimensionality::<Ix2>().unwrap();
        let mut out = x2d.dot(&w2d.t());
        let bias = self.bias.view().into_dimensionality::<Ix1>().unwrap();
        for mut row in out.rows_mut() {
            row += &bias;
        }
        self.input = Some(x2d);
        out.into_shape_with_order((n, self.out_f, 1, 1)).unwrap()
    }

    fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let n = grad.dim().0;
        let g2d = grad
            .clone()
            .into_shape_with_order((n, self.out_f))
            .unwrap();
        let x2d = self.input.take().expect("backward before forward");
        {
            let mut wg = self.wgrad.view_mut().into_dimensionality::<Ix2>().unwrap();
            wg += &g2d.t().dot(&x2d);
        }
        {
            let mut bg = self.bgrad.view_mut().into_dimensionality::<Ix1>().unwrap();
            for (c, col) in g2d.columns().into_iter().enumerate() {
                bg[c] = bg[c] + col.sum();
            }
        }
        let w2d = self.weight.view().into_dimensionality::<Ix2>().unwrap();
        let dx = g2d.dot(&w2d);
        dx.into_shape_with_order((n, self.in_f, 1, 1)).unwrap()
    }

    fn params(&mut self) -> Vec<Param<'_, F>> {
        vec![
            Param {
                name: format!("{}.weight", self.name),
                value: &mut self.weight,
                grad: &mut self.wgrad,
                decay: true,
            },
            Param {
                name: format!("{}.bias", self.name),
                value: &mut self.bias,
                grad: &mut self.bgrad,
                decay: false,
            },
        ]
    }

    fn tensors(&mut self) -> Vec<(String, &mut ArrayD<F>)> {
        vec![
            (format!("{}.weight", self.name), &mut self.weight),
            (format!("{}.bias", self.name), &mut self.bias),
        ]
    }

    fn out_shape(&self, _input: (usize, usize, usize)) -> (usize, usize, usize) {
        (self.out_f, 1, 1)
    }
}

// ---------------------------------------------------------------------------
// Batch normalization (per channel)
// ---------------------------------------------------------------------------

pub struct BatchNorm2d<F: Elem> {
    name: String,
    channels: usize,
    eps: f64,
    momentum: f64,
    gamma: ArrayD<F>,
    beta: ArrayD<F>,
    ggrad: ArrayD<F>,
    bgrad: ArrayD<F>,
    running_mean: ArrayD<F>,
    running_var: ArrayD<F>,
    cache: Option<(Array4<F>, Array1<F>)>, // (x_hat, inv_std)
}

impl<F: Elem> BatchNorm2d<F> {
    pub fn new(name: impl Into<String>, channels: usize) -> Self {
        BatchNorm2d {
            name: name.into(),
            channels,
            eps: 1e-5,
            momentum: 0.9,
            gamma: ArrayD::ones(IxDyn(&[channels])),
            beta: ArrayD::zeros(IxDyn(&[channels])),
            ggrad: ArrayD::zeros(IxDyn(&[channels])),
            bgrad: ArrayD::zeros(IxDyn(&[channels])),
            running_mean: ArrayD::zeros(IxDyn(&[channels])),
            running_var: ArrayD::ones(IxDyn(&[channels])),
            cache: None,
        }
    }
}

impl<F: Elem> Layer<F> for BatchNorm2d<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Norm
    }

    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.channels, "channel mismatch in {}", self.name);
        let m = (n * h * w) as f64;
        let gamma = self.gamma.view().into_dimensionality::<Ix1>().unwrap();
        let beta = self.beta.view().into_dimensionality::<Ix1>().unwrap();
        let mut out = Array4::<F>::zeros((n, c, h, w));

        if train {
            let mut x_hat = Array4::<F>::zeros((n, c, h, w));
            let mut inv_stds = Array1::<F>::zeros(c);
            for ci in 0..c {
                let ch = x.slice(ndarray::s![.., ci, .., ..]);
                let mean = ch.iter().map(|v| v.as_float()).sum::<f64>() / m;
                let var = ch
                    .iter()
                    .map(|v| {
                        let d = v.as_float() - mean;
                        d * d
                    })
                    .sum::<f64>()
                    / m;
                let inv_std = 1.0 / (var + self.eps).sqrt();
                inv_stds[ci] = F::from_float(inv_std);
                let meanf = F::from_float(mean);
                let inv = F::from_float(inv_std);
                for ni in 0..n {
                    for y in 0..h {
                        for xx in 0..w {
                            let xh = (x[(ni, ci, y, xx)] - meanf) * inv;
                            x_hat[(ni, ci, y, xx)] = xh;
                            out[(ni, ci, y, xx)] = gamma[ci] * xh + beta[ci];
                        }
                    }
                }
                let mom = self.momentum;
                let rm = self.running_mean[ci].as_float() * mom + mean * (1.0 - mom);
                let rv = self.running_var[ci].as_float() * mom + var * (1.0 - mom);
                self.running_mean[ci] = F::from_float(rm);
                self.running_var[ci] = F::from_float(rv);
            }
            self.cache = Some((x_hat, inv_stds));
        } else {
            for ci in 0..c {
                let mean = self.running_mean[ci];
                let inv = F::from_float(1.0 / (self.running_var[ci].as_float() + self.eps).sqrt());
                for ni in 0..n {
                    for y in 0..h {
                        for xx in 0..w {
                            out[(ni, ci, y, xx)] =
                                gamma[ci] * ((x[(ni, ci, y, xx)] - mean) * inv) + beta[ci];
                        }
                    }
                }
            }
        }
        out
    }

    fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let (x_hat, inv_stds) = self.cache.take().expect("backward before forward");
        let (n, c, h, w) = grad.dim();
        let m = F::from_float((n * h * w) as f64);
        let gamma = self.gamma.view().into_dimensionality::<Ix1>().unwrap();
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        for ci in 0..c {
            let mut sum_dy = F::zero();
            let mut sum_dy_xhat = F::zero();
            for ni in 0..n {
                for y in 0..h {
                    for xx in 0..w {
                        let g = grad[(ni, ci, y, xx)];
                        sum_dy = sum_dy + g;
                        sum_dy_xhat = sum_dy_xhat + g * x_hat[(ni, ci, y, xx)];
                    }
                }
            }
            {
                let mut gg = self.ggrad.view_mut().into_dimensionality::<Ix1>().unwrap();
                gg[ci] = gg[ci] + sum_dy_xhat;
                let mut bg = self.bgrad.view_mut().into_dimensionality::<Ix1>().unwrap();
                bg[ci] = bg[ci] + sum_dy;
            }
            let scale = gamma[ci] * inv_stds[ci] / m;
            for ni in 0..n {
                for y in 0..h {
                    for xx in 0..w {
                        let g = grad[(ni, ci, y, xx)];
                        dx[(ni, ci, y, xx)] = scale
                            * (m * g - sum_dy - x_hat[(ni, ci, y, xx)] * sum_dy_xhat);
                    }
                }
            }
        }
        dx
    }

    fn params(&mut self) -> Vec<Param<'_, F>> {
        vec![
            Param {
                name: format!("{}.gamma", self.name),
                value: &mut self.gamma,
                grad: &mut self.ggrad,
                decay: false,
            },
            Param {
                name: format!("{}.beta", self.name),
                value: &mut self.beta,
                grad: &mut self.bgrad,
                decay: false,
            },
        ]
    }

    fn tensors(&mut self) -> Vec<(String, &mut ArrayD<F>)> {
        vec![
            (format!("{}.gamma", self.name), &mut self.gamma),
            (format!("{}.beta", self.name), &mut self.beta),
            (format!("{}.running_mean", self.name), &mut self.running_mean),
            (format!("{}.running_var", self.name), &mut self.running_var),
        ]
    }

    fn out_shape(&self, input: (usize, usize, usize)) -> (usize, usize, usize) {
        input
    }
}

// ---------------------------------------------------------------------------
// Pre-activation residual block (wide-resnet style)
// ---------------------------------------------------------------------------

pub struct ResidualBlock<F: Elem> {
    name: String,
    bn1: BatchNorm2d<F>,
    relu1: Relu<F>,
    conv1: Conv2d<F>,
    bn2: BatchNorm2d<F>,
    relu2: Relu<F>,
    conv2: Conv2d<F>,
    /// 1x1 projection on the pre-activated input when shape changes.
    shortcut: Option<Conv2d<F>>,
    in_c: usize,
    out_c: usize,
    stride: usize,
}

impl<F: Elem> ResidualBlock<F> {
    pub fn new(
        name: impl Into<String>,
        in_c: usize,
        out_c: usize,
        stride: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let name = name.into();
        let shortcut = (in_c != out_c || stride != 1).then(|| {
            Conv2d::new(format!("{name}.shortcut"), in_c, out_c, 1, stride, 0, rng)
        });
        ResidualBlock {
            bn1: BatchNorm2d::new(format!("{name}.bn1"), in_c),
            relu1: Relu::new(format!("{name}.relu1")),
            conv1: Conv2d::new(format!("{name}.conv1"), in_c, out_c, 3, stride, 1, rng),
            bn2: BatchNorm2d::new(format!("{name}.bn2"), out_c),
            relu2: Relu::new(format!("{name}.relu2")),
            conv2: Conv2d::new(format!("{name}.conv2"), out_c, out_c, 3, 1, 1, rng),
            shortcut,
            in_c,
            out_c,
            stride,
            name,
        }
    }
}

impl<F: Elem> Layer<F> for ResidualBlock<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Block
    }

    fn forward(&mut self, x: &Array4<F>, train: bool) -> Array4<F> {
        let pre = self.relu1.forward(&self.bn1.forward(x, train), train);
        let main = self.conv1.forward(&pre, train);
        let main = self.relu2.forward(&self.bn2.forward(&main, train), train);
        let main = self.conv2.forward(&main, train);
        match &mut self.shortcut {
            Some(proj) => main + proj.forward(&pre, train),
            None => main + x,
        }
    }

    fn backward(&mut self, grad: &Array4<F>) -> Array4<F> {
        let d_main = self
            .bn2
            .backward(&self.relu2.backward(&self.conv2.backward(grad)));
        let d_pre_main = self.conv1.backward(&d_main);
        match &mut self.shortcut {
            Some(proj) => {
                let d_pre = d_pre_main + proj.backward(grad);
                self.bn1.backward(&self.relu1.backward(&d_pre))
            }
            None => {
                let d_x_from_pre = self.bn1.backward(&self.relu1.backward(&d_pre_main));
                d_x_from_pre + grad
            }
        }
    }

    fn params(&mut self) -> Vec<Param<'_, F>> {
        let mut out = Vec::new();
        out.extend(self.bn1.params());
        out.extend(self.conv1.params());
        out.extend(self.bn2.params());
        out.extend(self.conv2.params());
        if let Some(p) = &mut self.shortcut {
            out.extend(p.params());
        }
        out
    }

    fn tensors(&mut self) -> Vec<(String, &mut ArrayD<F>)> {
        let mut out = Vec::new();
        out.extend(self.bn1.tensors());
        out.extend(self.conv1.tensors());
        out.extend(self.bn2.tensors());
        out.extend(self.conv2.tensors());
        if let Some(p) = &mut self.shortcut {
            out.extend(p.tensors());
        }
        out
    }

    fn out_shape(&self, input: (usize, usize, usize)) -> (usize, usize, usize) {
        let _ = self.in_c;
        let (_, h, w) = input;
        (
            self.out_c,
            (h + self.stride - 1) / self.stride,
            (w + self.stride - 1) / self.stride,
        )
    }
}
