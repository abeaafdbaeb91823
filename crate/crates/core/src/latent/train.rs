use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{volume_input, EncoderDecoder, LossParts, ModelKind};
use crate::error::{Error, Result};
use crate::nnops::{Adam, AdamConfig};
use crate::par::{try_map_indexed, Parallelism};
use crate::tensor::{gaussian_sample, Rng, Scalar, Tensor};
use crate::volio::Volume;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 20, batch_size: 8, lr: 2e-3, beta1: 0.9, beta2: 0.999 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config(format!("adam betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2)));
        }
        Ok(())
    }
}

/// Mean per-sample losses over one epoch, measured before each step's update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLoss>,
    pub wall_time_s: f64,
    /// sha256 of the final parameters, see [`params_checksum`].
    pub checksum: String,
}

/// Hex sha256 over every parameter value, widened to little-endian f64,
/// in [`EncoderDecoder::params`] order.
pub fn params_checksum<T: Scalar>(model: &EncoderDecoder<T>) -> String {
    let mut h = Sha256::new();
    for p in model.params() {
        for &x in p.data() {
            h.update(x.to_f64().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Minibatch Adam on the per-sample objective averaged over each batch.
///
/// Epoch `e` draws from `rng.split(e)`: child 0 shuffles the visiting order
/// and child `1 + i` supplies the VAE noise for item `i`. Per-item gradients
/// may be computed in parallel but are summed in batch order.
pub fn train<T: Scalar>(
    mut model: EncoderDecoder<T>,
    volumes: &[&Volume],
    cfg: &TrainConfig,
    rng: &Rng,
    par: Parallelism,
) -> Result<(EncoderDecoder<T>, TrainReport)> {
    cfg.validate()?;
    if volumes.is_empty() && cfg.epochs > 0 {
        return Err(Error::Parameter("cannot train on an empty dataset".into()));
    }
    for v in volumes {
        if v.shape() != model.input_shape {
            return Err(Error::Dimension(format!(
                "volume {} has shape {:?}, model expects {:?}",
                v.id,
                v.shape(),
                model.input_shape
            )));
        }
    }
    let start = Instant::now();
    let mut adam = Adam::new(model.params(), AdamConfig { beta1: cfg.beta1, beta2: cfg.beta2, ..AdamConfig::with_lr(cfg.lr) });
    let mut curve = Vec::with_capacity(cfg.epochs);
    let n = volumes.len();

    for epoch in 0..cfg.epochs {
        let erng = rng.split(epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        erng.split(0).shuffle(&mut order);
        let mut sum = LossParts::default();

        for batch in order.chunks(cfg.batch_size) {
            let m = &model;
            let results = try_map_indexed(batch.len(), par, |j| {
                let i = batch[j];
                let x = volume_input::<T>(volumes[i]);
                let eps = match m.kind {
                    ModelKind::Vae => Some(gaussian_sample(&mut erng.split(1 + i as u64), &[m.latent_dim], 0.0, 1.0)?),
                    ModelKind::Ae => None,
                };
                m.loss_and_grads(&x, eps.as_ref())
            })?;

            let scale = T::from_f64(1.0 / batch.len() as f64);
            let mut acc: Vec<Tensor<T>> = model.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
            for (parts, grads) in &results {
                if !parts.total.is_finite() {
                    return Err(Error::Divergence { epoch, loss: parts.total });
                }
                sum.total += parts.total;
                sum.recon += parts.recon;
                sum.kl += parts.kl;
                for (a, g) in acc.iter_mut().zip(grads) {
                    a.axpy(scale, g)?;
                }
            }
            adam.step(model.params_mut(), &acc)?;
        }

        let k = n as f64;
        let e = EpochLoss { epoch, total: sum.total / k, recon: sum.recon / k, kl: sum.kl / k };
        if !e.total.is_finite() || model.params().iter().any(|p| !p.all_finite()) {
            return Err(Error::Divergence { epoch, loss: e.total });
        }
        curve.push(e);
    }

    let report = TrainReport {
        epochs: curve,
        wall_time_s: start.elapsed().as_secs_f64(),
        checksum: params_checksum(&model),
    };
    Ok((model, report))
}
