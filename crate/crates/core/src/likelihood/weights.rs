//! Portable weight-file format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic          8 bytes  "ICTALCNN"
//! version        u32      1
//! input_len      u32
//! input_channels u32
//! layer_count    u32
//! layers         layer_count records, each a u8 kind followed by:
//!                  0 conv1d       u32 out_channels, u32 kernel, u32 stride, u8 activation
//!                  1 max_pool     u32 width
//!                  2 global_pool  u8 kind (0 average, 1 max)
//!                  3 flatten      -
//!                  4 dense        u32 units, u8 activation
//!                  5 dropout      f32 rate
//!                activation: 0 linear, 1 relu, 2 sigmoid, 3 softmax
//! tensor_count   u32
//! tensors        tensor_count records:
//!                  u32 layer index, u8 role (0 weight, 1 bias), u8 rank,
//!                  rank x u32 dims, then prod(dims) f32 values (row-major)
//! checksum       u32      CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Conv weights are `[out_channels, in_channels, kernel]` and dense weights
//! `[units, inputs]`, the same layout PyTorch uses, so a trainer can dump its
//! tensors without transposing.

use std::path::Path;

use super::arch::{Activation, CnnArchitecture, Layer, PoolKind};
use super::model::{LayerParams, Model};
use super::LikelihoodError;

const MAGIC: &[u8; 8] = b"ICTALCNN";
const VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], LikelihoodError> {
        if self.bytes.len() - self.pos < n {
            return Err(LikelihoodError::Format(format!(
                "unexpected end of file reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, LikelihoodError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32, LikelihoodError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32, LikelihoodError> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn activation(c: &mut Cursor, layer: usize) -> Result<Activation, LikelihoodError> {
    let code = c.u8("activation")?;
    Activation::from_code(code).ok_or_else(|| {
        LikelihoodError::Format(format!("layer {layer}: unknown activation code {code}"))
    })
}

fn decode_layer(c: &mut Cursor, index: usize) -> Result<Layer, LikelihoodError> {
    let kind = c.u8("layer kind")?;
    Ok(match kind {
        0 => Layer::Conv1d {
            out_channels: c.u32("out_channels")? as usize,
            kernel_size: c.u32("kernel_size")? as usize,
            stride: c.u32("stride")? as usize,
            activation: activation(c, index)?,
        },
        1 => Layer::MaxPool {
            width: c.u32("pool width")? as usize,
        },
        2 => Layer::GlobalPool {
            kind: match c.u8("pool kind")? {
                0 => PoolKind::Average,
                1 => PoolKind::Max,
                k => {
                    return Err(LikelihoodError::Format(format!(
                        "layer {index}: unknown global pool kind {k}"
                    )))
                }
            },
        },
        3 => Layer::Flatten,
        4 => Layer::Dense {
            units: c.u32("units")? as usize,
            activation: activation(c, index)?,
        },
        5 => Layer::Dropout {
            rate: c.f32("dropout rate")?,
        },
        kind => return Err(LikelihoodError::UnknownLayer { index, kind }),
    })
}

/// Decodes a weight file image, verifying checksum and tensor shapes.
pub fn decode_weights(bytes: &[u8]) -> Result<Model, LikelihoodError> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(LikelihoodError::Format(
            "not a weight file (bad magic)".into(),
        ));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(LikelihoodError::Checksum { stored, computed });
    }

    let mut c = Cursor {
        bytes: body,
        pos: MAGIC.len(),
    };
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(LikelihoodError::Format(format!(
            "unsupported version {version}"
        )));
    }
    let input_len = c.u32("input_len")? as usize;
    let input_channels = c.u32("input_channels")? as usize;
    let layer_count = c.u32("layer_count")? as usize;
    let layers = (0..layer_count)
        .map(|i| decode_layer(&mut c, i))
        .collect::<Result<Vec<_>, _>>()?;
    let arch = CnnArchitecture {
        input_len,
        input_channels,
        layers,
    };
    let shapes = arch.shapes()?;

    let mut expected = Vec::with_capacity(layer_count);
    let mut input = arch.input_shape();
    for (layer, &out) in arch.layers.iter().zip(&shapes) {
        expected.push(layer.param_shapes(input));
        input = out;
    }

    let mut weights: Vec<Option<Vec<f32>>> = vec![None; layer_count];
    let mut biases: Vec<Option<Vec<f32>>> = vec![None; layer_count];
    let tensor_count = c.u32("tensor_count")?;
    for _ in 0..tensor_count {
        let layer = c.u32("tensor layer index")? as usize;
        let role = c.u8("tensor role")?;
        let rank = c.u8("tensor rank")? as usize;
        let dims = (0..rank)
            .map(|_| c.u32("tensor dim").map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let shape_err = |detail: String| LikelihoodError::Shape {
            layer: Some(layer),
            detail,
        };
        let Some(Some((w_shape, b_shape))) = expected.get(layer) else {
            return Err(shape_err(format!("layer {layer} does not take parameters")));
        };
        let (want, slot) = match role {
            0 => (w_shape, &mut weights[layer]),
            1 => (b_shape, &mut biases[layer]),
            r => return Err(LikelihoodError::Format(format!("unknown tensor role {r}"))),
        };
        if &dims != want {
            return Err(shape_err(format!(
                "{} {} tensor has shape {dims:?}, architecture needs {want:?}",
                arch.layers[layer].kind_name(),
                if role == 0 { "weight" } else { "bias" }
            )));
        }
        if slot.is_some() {
            return Err(shape_err("tensor given twice".into()));
        }
        let n: usize = dims.iter().product();
        let raw = c.take(4 * n, "tensor data")?;
        *slot = Some(
            raw.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        );
    }
    if c.pos != body.len() {
        return Err(LikelihoodError::Format(format!(
            "{} trailing bytes after tensors",
            body.len() - c.pos
        )));
    }

    let params = weights
        .into_iter()
        .zip(biases)
        .map(|(w, b)| match (w, b) {
            (Some(weight), Some(bias)) => Some(LayerParams { weight, bias }),
            _ => None,
        })
        .collect();
    Model::new(arch, params)
}

pub fn encode_weights(model: &Model) -> Vec<u8> {
    let arch = model.architecture();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        arch.input_len as u32,
        arch.input_channels as u32,
        arch.layers.len() as u32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for layer in &arch.layers {
        match *layer {
            Layer::Conv1d {
                out_channels,
                kernel_size,
                stride,
                activation,
            } => {
                out.push(0);
                for v in [out_channels, kernel_size, stride] {
                    out.extend_from_slice(&(v as u32).to_le_bytes());
                }
                out.push(activation.code());
            }
            Layer::MaxPool { width } => {
                out.push(1);
                out.extend_from_slice(&(width as u32).to_le_bytes());
            }
            Layer::GlobalPool { kind } => {
                out.push(2);
                out.push(match kind {
                    PoolKind::Average => 0,
                    PoolKind::Max => 1,
                });
            }
            Layer::Flatten => out.push(3),
            Layer::Dense { units, activation } => {
                out.push(4);
                out.extend_from_slice(&(units as u32).to_le_bytes());
                out.push(activation.code());
            }
            Layer::Dropout { rate } => {
                out.push(5);
                out.extend_from_slice(&rate.to_le_bytes());
            }
        }
    }

    let mut input = arch.input_shape();
    let mut tensors = Vec::new();
    for (i, (layer, p)) in arch.layers.iter().zip(model.params()).enumerate() {
        if let (Some((ws, bs)), Some(p)) = (layer.param_shapes(input), p) {
            tensors.push((i, 0u8, ws, &p.weight));
            tensors.push((i, 1u8, bs, &p.bias));
        }
        input = model.shapes()[i];
    }
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (layer, role, dims, data) in tensors {
        out.extend_from_slice(&(layer as u32).to_le_bytes());
        out.push(role);
        out.push(dims.len() as u8);
        for d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Loads and validates a weight file.
pub fn load_weights(path: impl AsRef<Path>) -> Result<Model, LikelihoodError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| LikelihoodError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_weights(&bytes)
}

pub fn save_weights(model: &Model, path: impl AsRef<Path>) -> Result<(), LikelihoodError> {
    let path = path.as_ref();
    std::fs::write(path, encode_weights(model)).map_err(|source| LikelihoodError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn tiny() -> CnnArchitecture {
        CnnArchitecture {
            input_len: 1024,
            input_channels: 18,
            layers: vec![
                Layer::Conv1d {
                    out_channels: 2,
                    kernel_size: 3,
                    stride: 1,
                    activation: Activation::Relu,
                },
                Layer::GlobalPool {
                    kind: PoolKind::Average,
                },
                Layer::Dense {
                    units: 1,
                    activation: Activation::Sigmoid,
                },
            ],
        }
    }

    fn tiny_model() -> Model {
        Model::random(tiny(), &mut rand_chacha::ChaCha8Rng::seed_from_u64(3)).unwrap()
    }

    #[test]
    fn tiny_fixture_loads_with_113_parameters() {
        let model = decode_weights(&encode_weights(&tiny_model())).unwrap();
        assert_eq!(model.param_count(), 113);
        assert_eq!(model.architecture().param_count().unwrap(), 113);
        assert_eq!(model, tiny_model());
    }

    #[test]
    fn corrupted_byte_fails_checksum() {
        let mut bytes = encode_weights(&tiny_model());
        let n = bytes.len();
        bytes[n - 10] ^= 0x40;
        assert!(matches!(
            decode_weights(&bytes),
            Err(LikelihoodError::Checksum { .. })
        ));
        let mut bytes = encode_weights(&tiny_model());
        bytes[n - 1] ^= 1;
        assert!(matches!(
            decode_weights(&bytes),
            Err(LikelihoodError::Checksum { .. })
        ));
    }

    fn reseal(mut body: Vec<u8>) -> Vec<u8> {
        let crc = crc32fast::hash(&body);
        body.extend_from_slice(&crc.to_le_bytes());
        body
    }

    #[test]
    fn wrong_dense_shape_names_the_layer() {
        let bytes = encode_weights(&tiny_model());
        let mut body = bytes[..bytes.len() - 4].to_vec();
        // Dense weight record: layer 2, role 0, rank 2, dims [1, 2]. Rewrite
        // the dims to [2, 1]; the data length is unchanged.
        let needle: Vec<u8> = [
            2u32.to_le_bytes().as_slice(),
            &[0, 2],
            &1u32.to_le_bytes(),
            &2u32.to_le_bytes(),
        ]
        .concat();
        let at = body
            .windows(needle.len())
            .position(|w| w == needle.as_slice())
            .unwrap();
        body[at + 6..at + 10].copy_from_slice(&2u32.to_le_bytes());
        body[at + 10..at + 14].copy_from_slice(&1u32.to_le_bytes());
        match decode_weights(&reseal(body)) {
            Err(LikelihoodError::Shape {
                layer: Some(2),
                detail,
            }) => assert!(detail.contains("dense")),
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_layer_kind() {
        let bytes = encode_weights(&tiny_model());
        let mut body = bytes[..bytes.len() - 4].to_vec();
        body[24] = 9; // kind byte of layer 0
        assert!(matches!(
            decode_weights(&reseal(body)),
            Err(LikelihoodError::UnknownLayer { index: 0, kind: 9 })
        ));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = encode_weights(&tiny_model());
        let body = bytes[..bytes.len() - 40].to_vec();
        assert!(matches!(
            decode_weights(&reseal(body)),
            Err(LikelihoodError::Format(_))
        ));
    }
}
