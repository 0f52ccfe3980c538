//! Declarative 1D-CNN architecture and static shape checking.

use serde::{Deserialize, Serialize};

use super::LikelihoodError;
use crate::preprocess::{BLOCK_CHANNELS, BLOCK_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Softmax,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
            Activation::Softmax => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Linear,
            1 => Activation::Relu,
            2 => Activation::Sigmoid,
            3 => Activation::Softmax,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Average,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    /// Valid (unpadded) convolution along time, mixing all input channels.
    Conv1d {
        out_channels: usize,
        kernel_size: usize,
        #[serde(default = "one")]
        stride: usize,
        activation: Activation,
    },
    /// Non-overlapping max pooling along time; a trailing remainder is dropped.
    MaxPool {
        width: usize,
    },
    GlobalPool {
        kind: PoolKind,
    },
    /// Channel-major flatten of a sequence: index `c * len + t`.
    Flatten,
    Dense {
        units: usize,
        activation: Activation,
    },
    /// Identity at inference.
    Dropout {
        rate: f32,
    },
}

fn one() -> usize {
    1
}

/// Activation shape between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `len` time steps by `channels` feature maps.
    Seq {
        len: usize,
        channels: usize,
    },
    Flat(usize),
}

impl Shape {
    pub fn size(&self) -> usize {
        match *self {
            Shape::Seq { len, channels } => len * channels,
            Shape::Flat(n) => n,
        }
    }
}

/// Output length of a valid convolution.
pub fn conv_output_len(input_len: usize, kernel: usize, stride: usize) -> Option<usize> {
    (stride > 0 && kernel > 0 && input_len >= kernel).then(|| (input_len - kernel) / stride + 1)
}

impl Layer {
    /// Shape produced from `input`, or why the layer cannot accept it.
    pub fn output_shape(&self, input: Shape) -> Result<Shape, String> {
        match (*self, input) {
            (
                Layer::Conv1d {
                    out_channels,
                    kernel_size,
                    stride,
                    activation,
                },
                Shape::Seq { len, .. },
            ) => {
                if out_channels == 0 {
                    return Err("conv1d with zero output channels".into());
                }
                if activation == Activation::Softmax {
                    return Err("softmax is only supported on the output layer".into());
                }
                let len = conv_output_len(len, kernel_size, stride).ok_or_else(|| {
                    format!(
                        "kernel {kernel_size} / stride {stride} does not fit input length {len}"
                    )
                })?;
                Ok(Shape::Seq {
                    len,
                    channels: out_channels,
                })
            }
            (Layer::MaxPool { width }, Shape::Seq { len, channels }) => {
                if width == 0 || len < width {
                    return Err(format!(
                        "pool width {width} does not fit input length {len}"
                    ));
                }
                Ok(Shape::Seq {
                    len: len / width,
                    channels,
                })
            }
            (Layer::GlobalPool { .. }, Shape::Seq { channels, .. }) => Ok(Shape::Flat(channels)),
            (Layer::Flatten, s @ Shape::Seq { .. }) => Ok(Shape::Flat(s.size())),
            (Layer::Dense { units, .. }, Shape::Flat(_)) => {
                if units == 0 {
                    Err("dense layer with zero units".into())
                } else {
                    Ok(Shape::Flat(units))
                }
            }
            (Layer::Dropout { rate }, s) => {
                if (0.0..1.0).contains(&rate) {
                    Ok(s)
                } else {
                    Err(format!("dropout rate {rate} outside [0, 1)"))
                }
            }
            (layer, s) => Err(format!(
                "{} cannot follow a {:?} activation",
                layer.kind_name(),
                s
            )),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Conv1d { .. } => "conv1d",
            Layer::MaxPool { .. } => "max_pool",
            Layer::GlobalPool { .. } => "global_pool",
            Layer::Flatten => "flatten",
            Layer::Dense { .. } => "dense",
            Layer::Dropout { .. } => "dropout",
        }
    }

    /// Shapes of (weight, bias) for layers that carry parameters.
    pub fn param_shapes(&self, input: Shape) -> Option<(Vec<usize>, Vec<usize>)> {
        match (*self, input) {
            (
                Layer::Conv1d {
                    out_channels,
                    kernel_size,
                    ..
                },
                Shape::Seq { channels, .. },
            ) => Some((
                vec![out_channels, channels, kernel_size],
                vec![out_channels],
            )),
            (Layer::Dense { units, .. }, Shape::Flat(n)) => Some((vec![units, n], vec![units])),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnArchitecture {
    #[serde(default = "default_len")]
    pub input_len: usize,
    #[serde(default = "default_channels")]
    pub input_channels: usize,
    pub layers: Vec<Layer>,
}

fn default_len() -> usize {
    BLOCK_LEN
}

fn default_channels() -> usize {
    BLOCK_CHANNELS
}

impl Default for CnnArchitecture {
    /// conv(32, k129) -> pool4 -> conv(32, k15) -> pool4 -> conv(64, k7)
    /// -> global average -> dense(32, relu) -> dense(1, sigmoid).
    fn default() -> Self {
        let conv = |out_channels, kernel_size| Layer::Conv1d {
            out_channels,
            kernel_size,
            stride: 1,
            activation: Activation::Relu,
        };
        CnnArchitecture {
            input_len: BLOCK_LEN,
            input_channels: BLOCK_CHANNELS,
            layers: vec![
                conv(32, 129),
                Layer::MaxPool { width: 4 },
                conv(32, 15),
                Layer::MaxPool { width: 4 },
                conv(64, 7),
                Layer::GlobalPool {
                    kind: PoolKind::Average,
                },
                Layer::Dense {
                    units: 32,
                    activation: Activation::Relu,
                },
                Layer::Dense {
                    units: 1,
                    activation: Activation::Sigmoid,
                },
            ],
        }
    }
}

impl CnnArchitecture {
    pub fn input_shape(&self) -> Shape {
        Shape::Seq {
            len: self.input_len,
            channels: self.input_channels,
        }
    }

    /// Output shape of every layer, after checking they chain and that the
    /// network ends in a single probability (1-unit sigmoid or 2-unit softmax).
    pub fn shapes(&self) -> Result<Vec<Shape>, LikelihoodError> {
        if self.input_len == 0 || self.input_channels == 0 {
            return Err(LikelihoodError::Shape {
                layer: None,
                detail: "empty input shape".into(),
            });
        }
        let mut shape = self.input_shape();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer
                .output_shape(shape)
                .map_err(|detail| LikelihoodError::Shape {
                    layer: Some(i),
                    detail,
                })?;
            out.push(shape);
        }
        let head = self
            .layers
            .iter()
            .enumerate()
            .rev()
            .find(|(_, l)| !matches!(l, Layer::Dropout { .. }));
        match head {
            Some((
                _,
                Layer::Dense {
                    units: 1,
                    activation: Activation::Sigmoid,
                },
            ))
            | Some((
                _,
                Layer::Dense {
                    units: 2,
                    activation: Activation::Softmax,
                },
            )) => Ok(out),
            Some((i, _)) => Err(LikelihoodError::Shape {
                layer: Some(i),
                detail: "network must end in dense(1, sigmoid) or dense(2, softmax)".into(),
            }),
            None => Err(LikelihoodError::Shape {
                layer: None,
                detail: "architecture has no layers".into(),
            }),
        }
    }

    pub fn validate(&self) -> Result<(), LikelihoodError> {
        self.shapes().map(|_| ())
    }

    /// Input samples seen by one output position of the convolution and
    /// pooling stack that precedes the first global pool or flatten.
    pub fn receptive_field(&self) -> usize {
        let (mut field, mut jump) = (1usize, 1usize);
        for layer in &self.layers {
            match *layer {
                Layer::Conv1d {
                    kernel_size,
                    stride,
                    ..
                } => {
                    field += (kernel_size.saturating_sub(1)) * jump;
                    jump *= stride.max(1);
                }
                Layer::MaxPool { width } => {
                    field += width.saturating_sub(1) * jump;
                    jump *= width.max(1);
                }
                Layer::Dropout { .. } => {}
                Layer::GlobalPool { .. } | Layer::Flatten | Layer::Dense { .. } => break,
            }
        }
        field
    }

    /// Number of learnable parameters (weights and biases).
    pub fn param_count(&self) -> Result<usize, LikelihoodError> {
        let shapes = self.shapes()?;
        let mut input = self.input_shape();
        let mut total = 0;
        for (layer, &out) in self.layers.iter().zip(&shapes) {
            if let Some((w, b)) = layer.param_shapes(input) {
                total += w.iter().product::<usize>() + b.iter().product::<usize>();
            }
            input = out;
        }
        Ok(total)
    }
}
