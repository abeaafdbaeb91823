use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnops::{
    kl_divergence, mse_loss, Conv3d, ConvTranspose3d, Dense, Layer, Network, Padding, Trace,
};
use crate::tensor::{gaussian_sample, Rng, Scalar, Tensor};
use crate::volio::Volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ae,
    Vae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub latent_dim: usize,
    /// Encoder channels per stride-2 stage; the decoder mirrors them.
    pub channels: Vec<usize>,
    /// KL weight in the VAE objective.
    pub beta: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { kind: ModelKind::Ae, latent_dim: 64, channels: vec![8, 16, 32], beta: 1e-3 }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be >= 1".into()));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::Config(format!("invalid channel list {:?}", self.channels)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Mean and log-variance heads of the VAE encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeHeads<T: Scalar> {
    pub mu: Network<T>,
    pub logvar: Network<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDecoder<T: Scalar> {
    pub kind: ModelKind,
    pub input_shape: [usize; 3],
    pub latent_dim: usize,
    pub channels: Vec<usize>,
    pub beta: f64,
    /// Ends at the bottleneck for the AE, at the flattened features for the VAE.
    pub encoder: Network<T>,
    pub heads: Option<VaeHeads<T>>,
    pub decoder: Network<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentDistribution<T: Scalar> {
    pub mu: Tensor<T>,
    pub logvar: Tensor<T>,
}

impl<T: Scalar> LatentDistribution<T> {
    pub fn new(mu: Tensor<T>, logvar: Tensor<T>) -> Result<Self> {
        mu.expect_same_shape(&logvar)?;
        if !mu.all_finite() || !logvar.all_finite() {
            return Err(Error::Parameter("latent distribution has non-finite values".into()));
        }
        Ok(LatentDistribution { mu, logvar })
    }
}

/// `z = mu + exp(logvar / 2) · eps` for a given `eps`.
pub fn reparameterize_with<T: Scalar>(dist: &LatentDistribution<T>, eps: &Tensor<T>) -> Result<Tensor<T>> {
    dist.mu.expect_same_shape(eps)?;
    let half = T::from_f64(0.5);
    let sd = dist.logvar.map(|lv| (half * lv).exp());
    let noise = sd.zip_map(eps, |s, e| s * e)?;
    dist.mu.add(&noise)
}

pub fn reparameterize<T: Scalar>(dist: &LatentDistribution<T>, rng: &mut Rng) -> Result<Tensor<T>> {
    let eps = gaussian_sample(rng, dist.mu.shape(), 0.0, 1.0)?;
    reparameterize_with(dist, &eps)
}

/// Per-sample objective terms; `total = recon + beta · kl`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

fn check_extents(shape: [usize; 3], stages: usize) -> Result<()> {
    let min = (1usize << stages).max(8);
    for &n in &shape {
        if !n.is_power_of_two() || n < min {
            return Err(Error::Shape(format!(
                "input extents must be powers of two >= {min}, got {shape:?}"
            )));
        }
    }
    Ok(())
}

/// Builds the mirror architecture: `stages × [conv3d k3 s2 p1, relu]`,
/// flatten, dense to the code (or to the two VAE heads); then dense, relu,
/// reshape and `stages × conv_transpose3d k3 s2` back to one channel with a
/// final sigmoid.
pub fn build_model<T: Scalar>(cfg: &ModelConfig, input_shape: [usize; 3], rng: &mut Rng) -> Result<EncoderDecoder<T>> {
    cfg.validate()?;
    let stages = cfg.channels.len();
    check_extents(input_shape, stages)?;
    let bottom = input_shape.map(|n| n >> stages);
    let deepest = *cfg.channels.last().unwrap();
    let flat = deepest * bottom.iter().product::<usize>();

    let mut enc = Vec::new();
    let mut prev = 1;
    for &c in &cfg.channels {
        enc.push(Layer::Conv3d(Conv3d::init(rng, prev, c, 3, 2, Padding::Explicit(1))));
        enc.push(Layer::Relu);
        prev = c;
    }
    enc.push(Layer::Flatten);
    let heads = match cfg.kind {
        ModelKind::Ae => {
            enc.push(Layer::Dense(Dense::init(rng, flat, cfg.latent_dim)));
            None
        }
        ModelKind::Vae => Some(VaeHeads {
            mu: Network::new(vec![Layer::Dense(Dense::init(rng, flat, cfg.latent_dim))]),
            logvar: Network::new(vec![Layer::Dense(Dense::init(rng, flat, cfg.latent_dim))]),
        }),
    };

    let mut dec = vec![
        Layer::Dense(Dense::init(rng, cfg.latent_dim, flat)),
        Layer::Relu,
        Layer::Reshape(vec![deepest, bottom[0], bottom[1], bottom[2]]),
    ];
    for i in (0..stages).rev() {
        let out = if i == 0 { 1 } else { cfg.channels[i - 1] };
        dec.push(Layer::ConvTranspose3d(ConvTranspose3d::init(rng, cfg.channels[i], out, 3, 2, 1, 1)));
        dec.push(if i == 0 { Layer::Sigmoid } else { Layer::Relu });
    }

    let model = EncoderDecoder {
        kind: cfg.kind,
        input_shape,
        latent_dim: cfg.latent_dim,
        channels: cfg.channels.clone(),
        beta: cfg.beta,
        encoder: Network::new(enc),
        heads,
        decoder: Network::new(dec),
    };
    model.check_structure()?;
    Ok(model)
}

/// A volume as a `[1, D, H, W]` model input.
pub fn volume_input<T: Scalar>(v: &Volume) -> Tensor<T> {
    v.as_channels().cast()
}

impl<T: Scalar> EncoderDecoder<T> {
    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            kind: self.kind,
            latent_dim: self.latent_dim,
            channels: self.channels.clone(),
            beta: self.beta,
        }
    }

    fn channel_shape(&self) -> Vec<usize> {
        let [d, h, w] = self.input_shape;
        vec![1, d, h, w]
    }

    /// Verifies the mirror contract and head sizes.
    pub fn check_structure(&self) -> Result<()> {
        let input = self.channel_shape();
        let features = self.encoder.output_shape(&input)?;
        let code = match &self.heads {
            None => features,
            Some(h) => {
                let mu = h.mu.output_shape(&features)?;
                if h.logvar.output_shape(&features)? != mu {
                    return Err(Error::Shape("vae heads disagree".into()));
                }
                mu
            }
        };
        if code != [self.latent_dim] {
            return Err(Error::Shape(format!("bottleneck {code:?} != latent_dim {}", self.latent_dim)));
        }
        let out = self.decoder.output_shape(&code)?;
        if out != input {
            return Err(Error::Shape(format!("decoder output {out:?} != input {input:?}")));
        }
        Ok(())
    }

    /// Parameters in a fixed order: encoder, mu head, logvar head, decoder.
    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut p = self.encoder.params();
        if let Some(h) = &self.heads {
            p.extend(h.mu.params());
            p.extend(h.logvar.params());
        }
        p.extend(self.decoder.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.encoder.params_mut();
        if let Some(h) = &mut self.heads {
            p.extend(h.mu.params_mut());
            p.extend(h.logvar.params_mut());
        }
        p.extend(self.decoder.params_mut());
        p
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape() != self.channel_shape().as_slice() {
            return Err(Error::Dimension(format!(
                "model expects input {:?}, got {:?}",
                self.channel_shape(),
                x.shape()
            )));
        }
        Ok(())
    }

    /// VAE posterior for one input. Errors for an AE.
    pub fn distribution(&self, x: &Tensor<T>) -> Result<LatentDistribution<T>> {
        self.check_input(x)?;
        let heads = self
            .heads
            .as_ref()
            .ok_or_else(|| Error::Unsupported("an autoencoder has no latent distribution".into()))?;
        let h = self.encoder.forward(x)?;
        LatentDistribution::new(heads.mu.forward(&h)?, heads.logvar.forward(&h)?)
    }

    /// Deterministic code: the bottleneck for an AE, `mu` for a VAE.
    pub fn encode_tensor(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let h = self.encoder.forward(x)?;
        match &self.heads {
            None => Ok(h),
            Some(heads) => heads.mu.forward(&h),
        }
    }

    pub fn decode(&self, z: &Tensor<T>) -> Result<Tensor<T>> {
        if z.shape() != [self.latent_dim] {
            return Err(Error::Dimension(format!("code must be [{}], got {:?}", self.latent_dim, z.shape())));
        }
        self.decoder.forward(z)
    }

    /// Objective for one input. For a VAE, `eps` selects the sampled code;
    /// `None` decodes from `mu`.
    pub fn loss(&self, x: &Tensor<T>, eps: Option<&Tensor<T>>) -> Result<LossParts> {
        Ok(self.loss_and_grads_impl(x, eps, false)?.0)
    }

    /// Objective and its gradient with respect to [`EncoderDecoder::params`].
    pub fn loss_and_grads(&self, x: &Tensor<T>, eps: Option<&Tensor<T>>) -> Result<(LossParts, Vec<Tensor<T>>)> {
        self.loss_and_grads_impl(x, eps, true)
    }

    fn loss_and_grads_impl(
        &self,
        x: &Tensor<T>,
        eps: Option<&Tensor<T>>,
        want_grads: bool,
    ) -> Result<(LossParts, Vec<Tensor<T>>)> {
        self.check_input(x)?;
        let enc: Trace<T> = self.encoder.forward_trace(x)?;
        let features = enc.output();
        let beta = T::from_f64(self.beta);

        struct Vae<T: Scalar> {
            mu: Trace<T>,
            logvar: Trace<T>,
            eps: Option<Tensor<T>>,
        }
        let (z, vae) = match &self.heads {
            None => (features.clone(), None),
            Some(h) => {
                let mu = h.mu.forward_trace(features)?;
                let logvar = h.logvar.forward_trace(features)?;
                let dist = LatentDistribution { mu: mu.output().clone(), logvar: logvar.output().clone() };
                let z = match eps {
                    Some(e) => reparameterize_with(&dist, e)?,
                    None => dist.mu.clone(),
                };
                (z, Some(Vae { mu, logvar, eps: eps.cloned() }))
            }
        };

        let dec = self.decoder.forward_trace(&z)?;
        let (recon, grad_recon) = mse_loss(dec.output(), x)?;
        let kl_terms = match &vae {
            Some(v) => Some(kl_divergence(v.mu.output(), v.logvar.output())?),
            None => None,
        };
        let kl = kl_terms.as_ref().map_or(T::zero(), |k| k.loss);
        let parts = LossParts {
            total: (recon + beta * kl).to_f64(),
            recon: recon.to_f64(),
            kl: kl.to_f64(),
        };
        if !want_grads {
            return Ok((parts, Vec::new()));
        }

        let (grad_z, dec_grads) = self.decoder.backward(&dec, &grad_recon)?;
        let (grad_features, head_grads) = match (&self.heads, vae, kl_terms) {
            (Some(h), Some(v), Some(k)) => {
                let mut g_mu = grad_z.clone();
                g_mu.axpy(beta, &k.grad_mu)?;
                let mut g_lv = match &v.eps {
                    Some(e) => {
                        let half = T::from_f64(0.5);
                        let ds = v.logvar.output().zip_map(e, |lv, e| half * (half * lv).exp() * e)?;
                        grad_z.zip_map(&ds, |g, d| g * d)?
                    }
                    None => Tensor::zeros(&[self.latent_dim]),
                };
                g_lv.axpy(beta, &k.grad_logvar)?;
                let (gf_mu, mut gm) = h.mu.backward(&v.mu, &g_mu)?;
                let (gf_lv, gl) = h.logvar.backward(&v.logvar, &g_lv)?;
                gm.extend(gl);
                (gf_mu.add(&gf_lv)?, gm)
            }
            _ => (grad_z, Vec::new()),
        };
        let (_, mut grads) = self.encoder.backward(&enc, &grad_features)?;
        grads.extend(head_grads);
        grads.extend(dec_grads);
        Ok((parts, grads))
    }
}

/// Latent features of a volume (see [`EncoderDecoder::encode_tensor`]).
pub fn encode<T: Scalar>(model: &EncoderDecoder<T>, v: &Volume) -> Result<Tensor<T>> {
    model.encode_tensor(&volume_input(v))
}

/// Full encode/decode pass through the deterministic code, with the
/// reconstruction's MSE against the input.
pub fn reconstruct<T: Scalar>(model: &EncoderDecoder<T>, v: &Volume) -> Result<(Volume, f64)> {
    let x = volume_input::<T>(v);
    let out = model.decode(&model.encode_tensor(&x)?)?;
    let (mse, _) = mse_loss(&out, &x)?;
    let data: Tensor<f32> = out.cast::<f32>().reshape(&v.shape())?;
    Ok((v.with_data(data)?, mse.to_f64()))
}
