//! Binary parameter container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! 8 bytes   magic  "HVPARAMS"
//! 8 bytes   u64    header length L
//! L bytes   UTF-8 JSON header: {"groups":[{"name":..,"layers":[..]}, ..]}
//! rest      f32    every layer's weight then bias, in header order
//! ```
//!
//! Parameterless layers contribute no payload. Values are narrowed to f32
//! on write, so an f32 network round-trips bit-exactly.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::{Conv3d, ConvTranspose3d, Dense, Layer, Network};

const MAGIC: &[u8; 8] = b"HVPARAMS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerHeader {
    Conv3d {
        weight_shape: Vec<usize>,
        bias_shape: Vec<usize>,
        stride: usize,
        padding: usize,
    },
    ConvTranspose3d {
        weight_shape: Vec<usize>,
        bias_shape: Vec<usize>,
        stride: usize,
        padding: usize,
        output_padding: usize,
    },
    Dense {
        weight_shape: Vec<usize>,
        bias_shape: Vec<usize>,
    },
    Relu,
    Sigmoid,
    Flatten,
    Reshape {
        shape: Vec<usize>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct GroupHeader {
    name: String,
    layers: Vec<LayerHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    groups: Vec<GroupHeader>,
}

fn header_of<T: Scalar>(layer: &Layer<T>) -> LayerHeader {
    match layer {
        Layer::Conv3d(l) => LayerHeader::Conv3d {
            weight_shape: l.weight.shape().to_vec(),
            bias_shape: l.bias.shape().to_vec(),
            stride: l.stride,
            padding: l.padding,
        },
        Layer::ConvTranspose3d(l) => LayerHeader::ConvTranspose3d {
            weight_shape: l.weight.shape().to_vec(),
            bias_shape: l.bias.shape().to_vec(),
            stride: l.stride,
            padding: l.padding,
            output_padding: l.output_padding,
        },
        Layer::Dense(l) => LayerHeader::Dense {
            weight_shape: l.weight.shape().to_vec(),
            bias_shape: l.bias.shape().to_vec(),
        },
        Layer::Relu => LayerHeader::Relu,
        Layer::Sigmoid => LayerHeader::Sigmoid,
        Layer::Flatten => LayerHeader::Flatten,
        Layer::Reshape(s) => LayerHeader::Reshape { shape: s.clone() },
    }
}

/// Writes named layer groups to `w`.
pub fn write_params<T: Scalar, W: Write>(w: &mut W, groups: &[(&str, &Network<T>)]) -> std::io::Result<()> {
    let header = Header {
        groups: groups
            .iter()
            .map(|(name, net)| GroupHeader {
                name: name.to_string(),
                layers: net.layers.iter().map(header_of).collect(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(std::io::Error::other)?;
    w.write_all(MAGIC)?;
    w.write_u64::<LittleEndian>(json.len() as u64)?;
    w.write_all(&json)?;
    for (_, net) in groups {
        for p in net.params() {
            for &v in p.data() {
                w.write_f32::<LittleEndian>(v.to_f64() as f32)?;
            }
        }
    }
    Ok(())
}

fn read_tensor<T: Scalar, R: Read>(r: &mut R, shape: &[usize]) -> Result<Tensor<T>> {
    let n: usize = shape.iter().product();
    let mut buf = vec![0f32; n];
    r.read_f32_into::<LittleEndian>(&mut buf)
        .map_err(|e| Error::Format(format!("parameter payload truncated: {e}")))?;
    Tensor::from_vec(shape, buf.into_iter().map(|v| T::from_f64(v as f64)).collect())
}

/// Reads groups written by [`write_params`], returning `(name, network)` pairs.
pub fn read_params<T: Scalar, R: Read>(r: &mut R) -> Result<Vec<(String, Network<T>)>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Format(format!("missing container magic: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::Format("not a parameter container".into()));
    }
    let len = r
        .read_u64::<LittleEndian>()
        .map_err(|e| Error::Format(format!("missing header length: {e}")))? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)
        .map_err(|e| Error::Format(format!("header truncated: {e}")))?;
    let header: Header = serde_json::from_slice(&json)?;
    let mut out = Vec::with_capacity(header.groups.len());
    for g in header.groups {
        let mut layers = Vec::with_capacity(g.layers.len());
        for lh in g.layers {
            layers.push(match lh {
                LayerHeader::Conv3d { weight_shape, bias_shape, stride, padding } => {
                    let w = read_tensor(r, &weight_shape)?;
                    let b = read_tensor(r, &bias_shape)?;
                    Layer::Conv3d(Conv3d::new(w, b, stride, padding)?)
                }
                LayerHeader::ConvTranspose3d { weight_shape, bias_shape, stride, padding, output_padding } => {
                    let w = read_tensor(r, &weight_shape)?;
                    let b = read_tensor(r, &bias_shape)?;
                    Layer::ConvTranspose3d(ConvTranspose3d::new(w, b, stride, padding, output_padding)?)
                }
                LayerHeader::Dense { weight_shape, bias_shape } => {
                    let w = read_tensor(r, &weight_shape)?;
                    let b = read_tensor(r, &bias_shape)?;
                    Layer::Dense(Dense::new(w, b)?)
                }
                LayerHeader::Relu => Layer::Relu,
                LayerHeader::Sigmoid => Layer::Sigmoid,
                LayerHeader::Flatten => Layer::Flatten,
                LayerHeader::Reshape { shape } => Layer::Reshape(shape),
            });
        }
        out.push((g.name, Network::new(layers)));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::Format(e.to_string()))? != 0 {
        return Err(Error::Format("trailing bytes after parameter payload".into()));
    }
    Ok(out)
}
