use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Smallest extent accepted along any axis.
pub const MIN_EXTENT: usize = 4;

/// A 3D scalar field `[D, H, W]` with voxel spacing in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    data: Tensor<f32>,
    pub spacing: [f32; 3],
    pub id: String,
}

impl Volume {
    pub fn new(id: impl Into<String>, data: Tensor<f32>, spacing: [f32; 3]) -> Result<Self> {
        match data.shape() {
            &[d, h, w] if d >= MIN_EXTENT && h >= MIN_EXTENT && w >= MIN_EXTENT => Ok(Volume {
                data,
                spacing,
                id: id.into(),
            }),
            s => Err(Error::Shape(format!(
                "volume must be 3D with every extent >= {MIN_EXTENT}, got {s:?}"
            ))),
        }
    }

    pub fn data(&self) -> &Tensor<f32> {
        &self.data
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[0], s[1], s[2]]
    }

    /// Same metadata, new voxel values of identical shape.
    pub fn with_data(&self, data: Tensor<f32>) -> Result<Self> {
        if data.shape() != self.data.shape() {
            return Err(Error::Dimension(format!(
                "replacement data {:?} vs volume {:?}",
                data.shape(),
                self.data.shape()
            )));
        }
        Ok(Volume {
            data,
            spacing: self.spacing,
            id: self.id.clone(),
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Model input view `[1, D, H, W]`.
    pub fn as_channels(&self) -> Tensor<f32> {
        let [d, h, w] = self.shape();
        self.data.clone().reshape(&[1, d, h, w]).expect("same element count")
    }
}

/// Affine rescale onto `[0, 1]`.
pub fn normalize_volume(v: &Volume) -> Result<Volume> {
    let (lo, hi) = v.data.min_max();
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::DegenerateInput(format!(
            "volume {} has range [{lo}, {hi}]",
            v.id
        )));
    }
    let (lo, span) = (lo as f64, (hi - lo) as f64);
    let data = v.data.map(|x| (((x as f64) - lo) / span).clamp(0.0, 1.0) as f32);
    v.with_data(data)
}

/// Valid range for audiometric thresholds, dB HL.
pub const THRESHOLD_RANGE_DB: (f32, f32) = (-10.0, 120.0);

/// The two regression targets in dB HL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPair {
    pub pt500: f32,
    pub pt4000: f32,
}

impl TargetPair {
    /// Clamps both thresholds into [`THRESHOLD_RANGE_DB`]; non-finite values are rejected.
    pub fn new(pt500: f32, pt4000: f32) -> Result<Self> {
        if !pt500.is_finite() || !pt4000.is_finite() {
            return Err(Error::Parameter(format!(
                "non-finite threshold ({pt500}, {pt4000})"
            )));
        }
        let (lo, hi) = THRESHOLD_RANGE_DB;
        Ok(TargetPair {
            pt500: pt500.clamp(lo, hi),
            pt4000: pt4000.clamp(lo, hi),
        })
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.pt500 as f64, self.pt4000 as f64]
    }
}
