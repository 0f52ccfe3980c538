use rand::Rng;

use super::arch::{Activation, CnnArchitecture, Layer, PoolKind, Shape};
use super::LikelihoodError;

/// Weights and biases of one parametrized layer, row-major:
/// conv1d weight is `[out_channels, in_channels, kernel]`, dense weight is
/// `[units, inputs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

/// A validated architecture with its parameters. Immutable once built, so it
/// can be shared across threads evaluating different blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: CnnArchitecture,
    shapes: Vec<Shape>,
    params: Vec<Option<LayerParams>>,
}

impl Model {
    /// `params[i]` must be `Some` exactly for conv1d and dense layers.
    pub fn new(
        arch: CnnArchitecture,
        params: Vec<Option<LayerParams>>,
    ) -> Result<Self, LikelihoodError> {
        let shapes = arch.shapes()?;
        if params.len() != arch.layers.len() {
            return Err(LikelihoodError::Shape {
                layer: None,
                detail: format!(
                    "{} parameter slots for {} layers",
                    params.len(),
                    arch.layers.len()
                ),
            });
        }
        let mut input = arch.input_shape();
        for (i, (layer, p)) in arch.layers.iter().zip(&params).enumerate() {
            match (layer.param_shapes(input), p) {
                (Some((w, b)), Some(p)) => {
                    let (nw, nb) = (w.iter().product::<usize>(), b.iter().product::<usize>());
                    if p.weight.len() != nw || p.bias.len() != nb {
                        return Err(LikelihoodError::Shape {
                            layer: Some(i),
                            detail: format!(
                                "{} expects weight {w:?} ({nw} values) and bias {b:?}, got {} and {}",
                                layer.kind_name(),
                                p.weight.len(),
                                p.bias.len()
                            ),
                        });
                    }
                }
                (None, None) => {}
                (Some(_), None) => {
                    return Err(LikelihoodError::Shape {
                        layer: Some(i),
                        detail: format!("{} is missing its parameters", layer.kind_name()),
                    })
                }
                (None, Some(_)) => {
                    return Err(LikelihoodError::Shape {
                        layer: Some(i),
                        detail: format!("{} takes no parameters", layer.kind_name()),
                    })
                }
            }
            input = shapes[i];
        }
        Ok(Model {
            arch,
            shapes,
            params,
        })
    }

    pub fn zeros(arch: CnnArchitecture) -> Result<Self, LikelihoodError> {
        Self::init(arch, |_| 0.0)
    }

    /// Uniform He-style initialisation; used to make synthetic weight files.
    pub fn random<R: Rng>(arch: CnnArchitecture, rng: &mut R) -> Result<Self, LikelihoodError> {
        Self::init(arch, |fan_in| {
            let limit = (6.0 / fan_in as f32).sqrt();
            rng.gen_range(-limit..limit)
        })
    }

    fn init(
        arch: CnnArchitecture,
        mut draw: impl FnMut(usize) -> f32,
    ) -> Result<Self, LikelihoodError> {
        let shapes = arch.shapes()?;
        let mut input = arch.input_shape();
        let mut params = Vec::with_capacity(arch.layers.len());
        for (layer, &out) in arch.layers.iter().zip(&shapes) {
            params.push(layer.param_shapes(input).map(|(w, b)| {
                let fan_in: usize = w[1..].iter().product();
                LayerParams {
                    weight: (0..w.iter().product::<usize>())
                        .map(|_| draw(fan_in))
                        .collect(),
                    bias: (0..b[0]).map(|_| draw(fan_in) * 0.1).collect(),
                }
            }));
            input = out;
        }
        Model::new(arch, params)
    }

    pub fn architecture(&self) -> &CnnArchitecture {
        &self.arch
    }

    pub fn params(&self) -> &[Option<LayerParams>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut LayerParams> {
        self.params.iter_mut().flatten()
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn param_count(&self) -> usize {
        self.params
            .iter()
            .flatten()
            .map(|p| p.weight.len() + p.bias.len())
            .sum()
    }

    /// Seizure probability for one block given time-major samples
    /// (`input[t * channels + c]`).
    pub fn forward(&self, input: &[f32]) -> Result<f32, LikelihoodError> {
        let (len, channels) = (self.arch.input_len, self.arch.input_channels);
        if input.len() != len * channels {
            return Err(LikelihoodError::Shape {
                layer: None,
                detail: format!(
                    "input has {} values, expected {len}x{channels}",
                    input.len()
                ),
            });
        }
        // Activations are kept channel-major: x[c * len + t].
        let mut x = vec![0f32; input.len()];
        for t in 0..len {
            for c in 0..channels {
                x[c * len + t] = input[t * channels + c];
            }
        }
        let mut shape = self.arch.input_shape();
        for (i, layer) in self.arch.layers.iter().enumerate() {
            let out_shape = self.shapes[i];
            x = match *layer {
                Layer::Conv1d {
                    kernel_size,
                    stride,
                    activation,
                    ..
                } => {
                    let p = self.params[i].as_ref().expect("validated");
                    let mut y = conv1d(&x, shape, out_shape, kernel_size, stride, p);
                    activate(&mut y, activation);
                    y
                }
                Layer::MaxPool { width } => max_pool(&x, shape, out_shape, width),
                Layer::GlobalPool { kind } => global_pool(&x, shape, kind),
                Layer::Flatten | Layer::Dropout { .. } => x,
                Layer::Dense { activation, .. } => {
                    let p = self.params[i].as_ref().expect("validated");
                    let mut y = dense(&x, p);
                    activate(&mut y, activation);
                    y
                }
            };
            shape = out_shape;
        }
        let q = match x.as_slice() {
            [q] => *q,
            [_, q] => *q,
            _ => unreachable!("head validated to one or two units"),
        };
        if q.is_nan() {
            return Err(LikelihoodError::Numeric(
                "forward pass produced NaN (activations overflowed)".into(),
            ));
        }
        Ok(q.clamp(0.0, 1.0))
    }
}

fn seq_dims(shape: Shape) -> (usize, usize) {
    match shape {
        Shape::Seq { len, channels } => (len, channels),
        Shape::Flat(_) => unreachable!("validated sequence input"),
    }
}

fn conv1d(
    x: &[f32],
    input: Shape,
    output: Shape,
    kernel: usize,
    stride: usize,
    p: &LayerParams,
) -> Vec<f32> {
    let (in_len, in_ch) = seq_dims(input);
    let (out_len, out_ch) = seq_dims(output);
    let mut y = vec![0f32; out_len * out_ch];
    for o in 0..out_ch {
        let acc = &mut y[o * out_len..(o + 1) * out_len];
        acc.fill(p.bias[o]);
        for c in 0..in_ch {
            let w = &p.weight[(o * in_ch + c) * kernel..(o * in_ch + c + 1) * kernel];
            let row = &x[c * in_len..(c + 1) * in_len];
            for (t, a) in acc.iter_mut().enumerate() {
                let window = &row[t * stride..t * stride + kernel];
                *a += w.iter().zip(window).map(|(w, v)| w * v).sum::<f32>();
            }
        }
    }
    y
}

fn max_pool(x: &[f32], input: Shape, output: Shape, width: usize) -> Vec<f32> {
    let (in_len, ch) = seq_dims(input);
    let (out_len, _) = seq_dims(output);
    let mut y = Vec::with_capacity(out_len * ch);
    for c in 0..ch {
        let row = &x[c * in_len..(c + 1) * in_len];
        y.extend(
            row.chunks_exact(width)
                .take(out_len)
                .map(|w| w.iter().copied().fold(f32::NEG_INFINITY, f32::max)),
        );
    }
    y
}

fn global_pool(x: &[f32], input: Shape, kind: PoolKind) -> Vec<f32> {
    let (len, ch) = seq_dims(input);
    (0..ch)
        .map(|c| {
            let row = &x[c * len..(c + 1) * len];
            match kind {
                PoolKind::Average => row.iter().sum::<f32>() / len as f32,
                PoolKind::Max => row.iter().copied().fold(f32::NEG_INFINITY, f32::max),
            }
        })
        .collect()
}

fn dense(x: &[f32], p: &LayerParams) -> Vec<f32> {
    let n = x.len();
    p.bias
        .iter()
        .enumerate()
        .map(|(o, b)| {
            b + p.weight[o * n..(o + 1) * n]
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum::<f32>()
        })
        .collect()
}

pub(crate) fn sigmoid(v: f32) -> f32 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn activate(y: &mut [f32], activation: Activation) {
    match activation {
        Activation::Linear => {}
        Activation::Relu => y.iter_mut().for_each(|v| *v = v.max(0.0)),
        Activation::Sigmoid => y.iter_mut().for_each(|v| *v = sigmoid(*v)),
        Activation::Softmax => {
            let m = y.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            y.iter_mut().for_each(|v| *v = (*v - m).exp());
            let s: f32 = y.iter().sum();
            y.iter_mut().for_each(|v| *v /= s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::arch::PoolKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn block(seed: u64) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..1024 * 18).map(|_| rng.gen_range(-50.0..50.0)).collect()
    }

    #[test]
    fn zero_weights_give_one_half() {
        let model = Model::zeros(CnnArchitecture::default()).unwrap();
        assert_eq!(model.forward(&block(1)).unwrap(), 0.5);
        assert_eq!(model.forward(&vec![0.0; 1024 * 18]).unwrap(), 0.5);
    }

    #[test]
    fn unit_kernel_selects_channel_one() {
        let arch = CnnArchitecture {
            input_len: 1024,
            input_channels: 18,
            layers: vec![
                Layer::Conv1d {
                    out_channels: 1,
                    kernel_size: 1,
                    stride: 1,
                    activation: Activation::Linear,
                },
                Layer::Flatten,
                Layer::Dense {
                    units: 1,
                    activation: Activation::Sigmoid,
                },
            ],
        };
        let mut weight = vec![0.0; 18];
        weight[0] = 1.0;
        let conv = LayerParams {
            weight,
            bias: vec![0.0],
        };
        let head = LayerParams {
            weight: vec![0.0; 1024],
            bias: vec![0.0],
        };
        let model = Model::new(arch, vec![Some(conv.clone()), None, Some(head)]).unwrap();
        let input = block(2);
        let out = conv1d(
            &{
                let mut x = vec![0f32; input.len()];
                for t in 0..1024 {
                    for c in 0..18 {
                        x[c * 1024 + t] = input[t * 18 + c];
                    }
                }
                x
            },
            Shape::Seq {
                len: 1024,
                channels: 18,
            },
            model.shapes()[0],
            1,
            1,
            &conv,
        );
        let channel_one: Vec<f32> = (0..1024).map(|t| input[t * 18]).collect();
        assert_eq!(out, channel_one);
    }

    #[test]
    fn softmax_head_returns_second_unit() {
        let arch = CnnArchitecture {
            input_len: 4,
            input_channels: 1,
            layers: vec![
                Layer::GlobalPool {
                    kind: PoolKind::Max,
                },
                Layer::Dense {
                    units: 2,
                    activation: Activation::Softmax,
                },
            ],
        };
        let head = LayerParams {
            weight: vec![0.0, 0.0],
            bias: vec![0.0, 1.0],
        };
        let model = Model::new(arch, vec![None, Some(head)]).unwrap();
        let q = model.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((q - sigmoid(1.0)).abs() < 1e-6);
    }

    #[test]
    fn wrong_input_size_is_shape_error() {
        let model = Model::zeros(CnnArchitecture::default()).unwrap();
        assert!(matches!(
            model.forward(&[0.0; 10]),
            Err(LikelihoodError::Shape { .. })
        ));
    }

    #[test]
    fn mismatched_dense_weights_name_the_layer() {
        let arch = CnnArchitecture::default();
        let model = Model::zeros(arch.clone()).unwrap();
        let mut params = model.params().to_vec();
        params[6].as_mut().unwrap().weight.pop();
        assert!(matches!(
            Model::new(arch, params),
            Err(LikelihoodError::Shape { layer: Some(6), .. })
        ));
    }
}
