use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Latent features with their threshold targets, one row per volume.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    /// `[rows, cols]`
    pub values: Tensor<f64>,
    /// `[rows, 2]`: pt500, pt4000
    pub targets: Tensor<f64>,
}

impl FeatureMatrix {
    pub fn new(ids: Vec<String>, values: Tensor<f64>, targets: Tensor<f64>) -> Result<Self> {
        if values.ndim() != 2 || targets.ndim() != 2 {
            return Err(Error::Dimension("features and targets must be matrices".into()));
        }
        let rows = values.shape()[0];
        if targets.shape()[0] != rows || ids.len() != rows {
            return Err(Error::Dimension(format!(
                "{} ids, {rows} feature rows and {} target rows",
                ids.len(),
                targets.shape()[0]
            )));
        }
        if !values.all_finite() || !targets.all_finite() {
            return Err(Error::Parameter("feature matrix has non-finite values".into()));
        }
        Ok(FeatureMatrix { ids, values, targets })
    }

    pub fn rows(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn cols(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let pick = |t: &Tensor<f64>| {
            let data = rows.iter().flat_map(|&r| t.row(r).to_vec()).collect();
            Tensor::from_vec(&[rows.len(), t.shape()[1]], data)
        };
        FeatureMatrix::new(
            rows.iter().map(|&r| self.ids[r].clone()).collect(),
            pick(&self.values)?,
            pick(&self.targets)?,
        )
    }
}

fn column_stats(x: &Tensor<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.ndim() != 2 {
        return Err(Error::Dimension(format!("expected a matrix, got {:?}", x.shape())));
    }
    let n = x.shape()[0] as f64;
    let (mean, sd) = (0..x.shape()[1])
        .map(|j| {
            let c = x.column(j);
            let m = c.iter().sum::<f64>() / n;
            let v = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            (m, v.sqrt())
        })
        .unzip();
    Ok((mean, sd))
}

fn apply(x: &Tensor<f64>, mean: &[f64], sd: &[f64], forward: bool) -> Result<Tensor<f64>> {
    if x.ndim() != 2 || x.shape()[1] != mean.len() {
        return Err(Error::Dimension(format!("expected [_, {}], got {:?}", mean.len(), x.shape())));
    }
    let c = mean.len();
    let data = x
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let j = i % c;
            if forward {
                (v - mean[j]) / sd[j]
            } else {
                v * sd[j] + mean[j]
            }
        })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

/// Per-target mean and standard deviation from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl TargetScaler {
    pub fn fit(y: &Tensor<f64>) -> Result<Self> {
        let (mean, std) = column_stats(y)?;
        if let Some(j) = std.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::DegenerateInput(format!("target column {j} has zero variance")));
        }
        Ok(TargetScaler { mean, std })
    }

    pub fn forward(&self, y: &Tensor<f64>) -> Result<Tensor<f64>> {
        apply(y, &self.mean, &self.std, true)
    }

    pub fn inverse(&self, z: &Tensor<f64>) -> Result<Tensor<f64>> {
        apply(z, &self.mean, &self.std, false)
    }
}

/// Feature standardization; constant columns are centred but not rescaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Tensor<f64>) -> Result<Self> {
        let (mean, sd) = column_stats(x)?;
        let scale = sd.into_iter().map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn transform(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        apply(x, &self.mean, &self.scale, true)
    }
}
