//! Model specifications and backbone constructors.

use crate::error::{Error, Result};
use crate::nn::elem::Elem;
use crate::nn::layers::{
    BatchNorm2d, Conv2d, Flatten, GlobalAvgPool, Layer, Linear, MaxPool2, Relu, ResidualBlock,
};
use crate::nn::net::Network;
use crate::rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backbone {
    /// Two conv blocks plus an MLP head; the desk-scale default.
    SmallCnn,
    /// Pre-activation wide residual network.
    WideResnet { depth: usize, width: usize },
    /// Compact VGG-style stack used by the detector classifier.
    VggLite,
}

impl Backbone {
    /// Parse ids like `small-cnn`, `wide-resnet-28-2`, `vgg-lite`.
    pub fn parse(id: &str) -> Result<Self> {
        if id == "small-cnn" {
            return Ok(Backbone::SmallCnn);
        }
        if id == "vgg-lite" {
            return Ok(Backbone::VggLite);
        }
        if let Some(rest) = id.strip_prefix("wide-resnet-") {
            let parts: Vec<&str> = rest.split('-').collect();
            if parts.len() == 2 {
                let depth: usize = parts[0]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad depth in {id:?}")))?;
                let width: usize = parts[1]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad width in {id:?}")))?;
                if depth < 10 || (depth - 4) % 6 != 0 {
                    return Err(Error::Config(format!(
                        "wide-resnet depth must be 6n+4, got {depth}"
                    )));
                }
                if width == 0 {
                    return Err(Error::Config("wide-resnet width must be >= 1".into()));
                }
                return Ok(Backbone::WideResnet { depth, width });
            }
        }
        Err(Error::Config(format!(
            "unknown backbone {id:?}; known: small-cnn, wide-resnet-<depth>-<width>, vgg-lite"
        )))
    }

    pub fn id(&self) -> String {
        match self {
            Backbone::SmallCnn => "small-cnn".into(),
            Backbone::WideResnet { depth, width } => format!("wide-resnet-{depth}-{width}"),
            Backbone::VggLite => "vgg-lite".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub backbone: Backbone,
    /// Input `(C, H, W)`.
    pub input: (usize, usize, usize),
    pub classes: usize,
}

impl ModelSpec {
    pub fn new(backbone: Backbone, input: (usize, usize, usize), classes: usize) -> Self {
        ModelSpec {
            backbone,
            input,
            classes,
        }
    }

    /// Build the network with seed-deterministic initialization.
    pub fn build<F: Elem>(&self, seed: u64) -> Result<Network<F>> {
        let (c, h, w) = self.input;
        if c == 0 || h == 0 || w == 0 || self.classes == 0 {
            return Err(Error::Config(format!(
                "invalid model spec: input {:?}, classes {}",
                self.input, self.classes
            )));
        }
        let mut r = rng::stream(seed, "model-init", &[]);
        let net = match self.backbone {
            Backbone::SmallCnn => {
                let flat = 32 * (h / 4) * (w / 4);
                let layers: Vec<Box<dyn Layer<F>>> = vec![
                    Box::new(Conv2d::new("conv1", c, 16, 3, 1, 1, &mut r)),
                    Box::new(Relu::new("relu1")),
                    Box::new(MaxPool2::new("pool1")),
                    Box::new(Conv2d::new("conv2", 16, 32, 3, 1, 1, &mut r)),
                    Box::new(Relu::new("relu2")),
                    Box::new(MaxPool2::new("pool2")),
                    Box::new(Flatten::new("flatten")),
                    Box::new(Linear::new("fc1", flat, 128, &mut r)),
                    Box::new(Relu::new("relu3")),
                    Box::new(Linear::new("fc2", 128, self.classes, &mut r)),
                ];
                Network::new(layers, self.input, self.classes)
            }
            Backbone::WideResnet { depth, width } => {
                let n = (depth - 4) / 6;
                let widths = [16, 16 * width, 32 * width, 64 * width];
                let mut layers: Vec<Box<dyn Layer<F>>> =
                    vec![Box::new(Conv2d::new("conv0", c, widths[0], 3, 1, 1, &mut r))];
                let mut in_c = widths[0];
                for (g, out_c) in widths[1..].iter().enumerate() {
                    for b in 0..n {
                        let stride = if g > 0 && b == 0 { 2 } else { 1 };
                        layers.push(Box::new(ResidualBlock::new(
                            format!("group{}.block{}", g + 1, b),
                            in_c,
                            *out_c,
                            stride,
                            &mut r,
                        )));
                        in_c = *out_c;
                    }
                }
                layers.push(Box::new(BatchNorm2d::new("bn_final", in_c)));
                layers.push(Box::new(Relu::new("relu_final")));
                layers.push(Box::new(GlobalAvgPool::new("gap")));
                layers.push(Box::new(Flatten::new("flatten")));
                layers.push(Box::new(Linear::new("fc", in_c, self.classes, &mut r)));
                Network::new(layers, self.input, self.classes)
            }
            Backbone::VggLite => {
                let flat = 32 * (h / 8).max(1) * (w / 8).max(1);
                let layers: Vec<Box<dyn Layer<F>>> = vec![
                    Box::new(Conv2d::new("conv1", c, 16, 3, 1, 1, &mut r)),
                    Box::new(Relu::new("relu1")),
                    Box::new(MaxPool2::new("pool1")),
                    Box::new(Conv2d::new("conv2", 16, 32, 3, 1, 1, &mut r)),
                    Box::new(Relu::new("relu2")),
                    Box::new(MaxPool2::new("pool2")),
                    Box::new(Conv2d::new("conv3", 32, 32, 3, 1, 1, &mut r)),
                    Box::new(Relu::new("relu3")),
                    Box::new(MaxPool2::new("pool3")),
                    Box::new(Flatten::new("flatten")),
                    Box::new(Linear::new("fc1", flat, 64, &mut r)),
                    Box::new(Relu::new("relu4")),
                    Box::new(Linear::new("fc2", 64, self.classes, &mut r)),
                ];
                Network::new(layers, self.input, self.classes)
            }
        };
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_ids() {
        assert_eq!(Backbone::parse("small-cnn").unwrap(), Backbone::SmallCnn);
        assert_eq!(
            Backbone::parse("wide-resnet-28-2").unwrap(),
            Backbone::WideResnet {
                depth: 28,
                width: 2
            }
        );
        assert!(Backbone::parse("wide-resnet-27-2").is_err());
        assert!(Backbone::parse("resnet-50").is_err());
    }

    #[test]
    fn param_count_is_reproducible() {
        let spec = ModelSpec::new(Backbone::SmallCnn, (1, 28, 28), 10);
        let mut a: Network<f32> = spec.build(0).unwrap();
        let mut b: Network<f32> = spec.build(0).unwrap();
        assert_eq!(a.num_params(), b.num_params());
        assert!(a.num_params() > 0);
        let ta = a.export_tensors();
        let tb = b.export_tensors();
        assert_eq!(ta, tb, "same seed, same init");
        let mut c: Network<f32> = spec.build(1).unwrap();
        assert_ne!(ta, c.export_tensors(), "different seed, different init");
    }

    #[test]
    fn wide_resnet_builds_and_runs() {
        let spec = ModelSpec::new(
            Backbone::WideResnet {
                depth: 10,
                width: 1,
            },
            (3, 16, 16),
            4,
        );
        let mut net: Network<f32> = spec.build(3).unwrap();
        let x = ndarray::Array4::<f32>::zeros((2, 3, 16, 16));
        let logits = net.forward(&x, true);
        assert_eq!(logits.dim(), (2, 4));
    }
}
