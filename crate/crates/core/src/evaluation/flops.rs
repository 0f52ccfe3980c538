//! FLOP accounting for the CNN, counting multiplications and additions
//! separately.
//!
//! * conv1d: `2 * kernel * c_in * c_out * l_out`
//! * dense: `2 * inputs * units`
//! * max pool: `l_out * width` comparisons per channel
//! * global pool: one operation per input element
//! * relu, sigmoid, softmax: one per output element; linear is free
//! * flatten, dropout: free

use serde::Serialize;

use super::EvalError;
use crate::likelihood::{Activation, CnnArchitecture, Layer, Shape};

/// Published totals for comparison models that are not implemented here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceModel {
    pub name: &'static str,
    pub mflops: f64,
}

pub const REFERENCE_MODELS: [ReferenceModel; 4] = [
    ReferenceModel {
        name: "2D CNN (Boonyakitanont et al.)",
        mflops: 14.5,
    },
    ReferenceModel {
        name: "2D CNN (Gomez et al.)",
        mflops: 200.0,
    },
    ReferenceModel {
        name: "1D CNN",
        mflops: 9.81,
    },
    ReferenceModel {
        name: "1D CNN + GRU",
        mflops: 29.4,
    },
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerFlops {
    pub index: usize,
    pub kind: &'static str,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlopReport {
    pub layers: Vec<LayerFlops>,
    pub total: u64,
}

impl FlopReport {
    pub fn mflops(&self) -> f64 {
        self.total as f64 / 1e6
    }
}

fn activation_cost(activation: Activation, elements: usize) -> u64 {
    match activation {
        Activation::Linear => 0,
        Activation::Relu | Activation::Sigmoid | Activation::Softmax => elements as u64,
    }
}

/// FLOPs of one layer applied to `input`, and its output shape.
pub fn layer_flops(layer: &Layer, input: Shape) -> Result<(u64, Shape), EvalError> {
    let output = layer.output_shape(input).map_err(EvalError::Flops)?;
    let flops = match (*layer, input, output) {
        (
            Layer::Conv1d {
                kernel_size,
                activation,
                ..
            },
            Shape::Seq { channels: c_in, .. },
            Shape::Seq {
                len: l_out,
                channels: c_out,
            },
        ) => {
            2 * (kernel_size * c_in * c_out * l_out) as u64
                + activation_cost(activation, l_out * c_out)
        }
        (Layer::MaxPool { width }, _, Shape::Seq { len, channels }) => {
            (len * width * channels) as u64
        }
        (Layer::GlobalPool { .. }, s, _) => s.size() as u64,
        (Layer::Dense { units, activation }, Shape::Flat(n), _) => {
            2 * (n * units) as u64 + activation_cost(activation, units)
        }
        _ => 0,
    };
    Ok((flops, output))
}

/// Per-layer FLOPs of a layer stack starting from `input`; no head check,
/// so partial stacks can be counted.
pub fn layers_flop_count(input: Shape, layers: &[Layer]) -> Result<FlopReport, EvalError> {
    let mut shape = input;
    let mut out = Vec::with_capacity(layers.len());
    for (index, layer) in layers.iter().enumerate() {
        let (flops, next) = layer_flops(layer, shape)
            .map_err(|e| EvalError::Flops(format!("layer {index}: {e}")))?;
        out.push(LayerFlops {
            index,
            kind: layer.kind_name(),
            flops,
        });
        shape = next;
    }
    let total = out.iter().map(|l| l.flops).sum();
    Ok(FlopReport { layers: out, total })
}

/// FLOPs of one forward pass of a valid architecture.
pub fn cnn_flop_count(arch: &CnnArchitecture) -> Result<FlopReport, EvalError> {
    arch.validate()
        .map_err(|e| EvalError::Flops(e.to_string()))?;
    layers_flop_count(arch.input_shape(), &arch.layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_conv_fixtures() {
        let dense = Layer::Dense {
            units: 2,
            activation: Activation::Linear,
        };
        assert_eq!(layer_flops(&dense, Shape::Flat(100)).unwrap().0, 400);
        let conv = Layer::Conv1d {
            out_channels: 2,
            kernel_size: 3,
            stride: 1,
            activation: Activation::Linear,
        };
        let (f, s) = layer_flops(
            &conv,
            Shape::Seq {
                len: 1024,
                channels: 18,
            },
        )
        .unwrap();
        assert_eq!(
            s,
            Shape::Seq {
                len: 1022,
                channels: 2
            }
        );
        assert_eq!(f, 220_752);
    }

    #[test]
    fn activations_and_pooling() {
        let conv = Layer::Conv1d {
            out_channels: 2,
            kernel_size: 3,
            stride: 1,
            activation: Activation::Relu,
        };
        let (f, _) = layer_flops(
            &conv,
            Shape::Seq {
                len: 1024,
                channels: 18,
            },
        )
        .unwrap();
        assert_eq!(f, 220_752 + 2044);
        let pool = Layer::MaxPool { width: 4 };
        assert_eq!(
            layer_flops(
                &pool,
                Shape::Seq {
                    len: 10,
                    channels: 3
                }
            )
            .unwrap()
            .0,
            24
        );
    }

    #[test]
    fn default_architecture_total() {
        let r = cnn_flop_count(&CnnArchitecture::default()).unwrap();
        assert_eq!(r.layers.len(), 8);
        assert_eq!(r.total, r.layers.iter().map(|l| l.flops).sum::<u64>());
        assert!(r.mflops() > 1.0);
    }

    #[test]
    fn rejects_invalid_architecture() {
        let arch = CnnArchitecture {
            input_len: 4,
            input_channels: 1,
            layers: vec![Layer::Dense {
                units: 1,
                activation: Activation::Sigmoid,
            }],
        };
        assert!(matches!(cnn_flop_count(&arch), Err(EvalError::Flops(_))));
    }
}
