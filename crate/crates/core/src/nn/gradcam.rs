//! GradCAM saliency maps: channel-weighted positive activations at a
//! convolutional layer, upsampled to the input size and min-max normalized.

use crate::error::{Error, Result};
use crate::imgops::{self, Image};
use crate::nn::elem::Elem;
use crate::nn::layers::LayerKind;
use crate::nn::net::{batch_to_input, Network};
use ndarray::{Array2, Array3};

/// Compute a saliency map for `image` at the layer named `layer`. When
/// `class` is `None` the predicted class is explained. The selected layer
/// must be convolutional (a conv layer or residual block) with a spatial
/// output.
pub fn gradcam<F: Elem>(
    net: &mut Network<F>,
    image: &Image,
    class: Option<usize>,
    layer: &str,
) -> Result<Array2<f64>> {
    let index = net
        .layer_index(layer)
        .ok_or_else(|| Error::Argument(format!("no layer named {layer:?}")))?;
    let kind = net.layers[index].kind();
    if !matches!(kind, LayerKind::Conv | LayerKind::Block) {
        return Err(Error::Argument(format!(
            "layer {layer:?} is not convolutional ({kind:?})"
        )));
    }
    let shapes = net.out_shapes();
    let (_, lh, lw) = shapes[index];
    if lh <= 1 && lw <= 1 {
        return Err(Error::Argument(format!(
            "layer {layer:?} has no spatial output"
        )));
    }

    let (h, w, _) = image.dim();
    let x = batch_to_input::<F>(&[image]);
    net.zero_grads();
    let (logits, acts) = net.forward_collect(&x, false);
    let class = match class {
        Some(c) => {
            if c >= net.num_classes() {
                return Err(Error::Argument(format!(
                    "class {c} outside {} classes",
                    net.num_classes()
                )));
            }
            c
        }
        None => {
            let row = logits.row(0);
            let mut best = 0;
            for (i, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = i;
                }
            }
            best
        }
    };
    let mut seed = Array2::<F>::zeros(logits.dim());
    seed[(0, class)] = F::one();
    let grads = net.backward_collect(&seed);

    let act = &acts[index]; // (1, C, H', W')
    let grad = &grads[index];
    let (_, c, gh, gw) = act.dim();
    let spatial = (gh * gw) as f64;
    // Channel weights: global average of the gradient.
    let mut map = Array2::<f64>::zeros((gh, gw));
    for ch in 0..c {
        let mut alpha = 0.0;
        for y in 0..gh {
            for xx in 0..gw {
                alpha += grad[(0, ch, y, xx)].as_float();
            }
        }
        alpha /= spatial;
        for y in 0..gh {
            for xx in 0..gw {
                map[(y, xx)] += alpha * act[(0, ch, y, xx)].as_float();
            }
        }
    }
    map.mapv_inplace(|v| v.max(0.0));

    // Upsample to the input size and min-max normalize.
    let map3 = Array3::from_shape_fn((gh, gw, 1), |(y, x, _)| map[(y, x)]);
    let up = imgops::resize(&map3, h, w);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in up.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let range = hi - lo;
    Ok(Array2::from_shape_fn((h, w), |(y, x)| {
        if range < 1e-12 {
            0.0
        } else {
            (up[(y, x, 0)] - lo) / range
        }
    }))
}
