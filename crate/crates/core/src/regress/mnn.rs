//! Two-hidden-layer MLP ("MNN") on standardized features and targets.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::data::{Standardizer, TargetScaler};
use super::tree::check_xy;
use crate::error::{Error, Result};
use crate::nnops::{mse_loss, read_params, write_params, Adam, AdamConfig, Dense, Layer, Network};
use crate::par::{try_map_indexed, Parallelism};
use crate::tensor::{Rng, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MnnConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for MnnConfig {
    fn default() -> Self {
        MnnConfig { hidden: vec![128, 64], epochs: 60, batch_size: 32, lr: 3e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnnModel {
    pub net: Network<f32>,
    pub features: Standardizer,
    pub targets: TargetScaler,
}

impl MnnModel {
    pub fn predict(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        let z = self.features.transform(x)?;
        let rows = z.shape()[0];
        let k = self.targets.mean.len();
        let mut out = Vec::with_capacity(rows * k);
        for r in 0..rows {
            let input = Tensor::vector(&z.row(r).iter().map(|&v| v as f32).collect::<Vec<_>>());
            out.extend(self.net.forward(&input)?.data().iter().map(|&v| v as f64));
        }
        self.targets.inverse(&Tensor::from_vec(&[rows, k], out)?)
    }
}

fn build(rng: &mut Rng, inputs: usize, hidden: &[usize], outputs: usize) -> Network<f32> {
    let mut layers = Vec::new();
    let mut prev = inputs;
    for &h in hidden {
        layers.push(Layer::Dense(Dense::init(rng, prev, h)));
        layers.push(Layer::Relu);
        prev = h;
    }
    layers.push(Layer::Dense(Dense::init(rng, prev, outputs)));
    Network::new(layers)
}

/// Minibatch Adam on MSE in standardized target space. Initialization uses
/// `rng.split(0)`; epoch `e` shuffles with `rng.split(1 + e)`. Returns the
/// model and the per-epoch mean training loss.
pub fn fit_mnn(x: &Tensor<f64>, y: &Tensor<f64>, cfg: &MnnConfig, rng: &Rng, par: Parallelism) -> Result<(MnnModel, Vec<f64>)> {
    check_xy(x, y)?;
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config("mnn needs batch_size >= 1 and lr > 0".into()));
    }
    let features = Standardizer::fit(x)?;
    let targets = TargetScaler::fit(y)?;
    let xs = features.transform(x)?.cast::<f32>();
    let ys = targets.forward(y)?.cast::<f32>();
    let (rows, k) = (x.shape()[0], y.shape()[1]);

    let mut net = build(&mut rng.split(0), x.shape()[1], &cfg.hidden, k);
    let mut adam = Adam::new(net.params(), AdamConfig::with_lr(cfg.lr));
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..rows).collect();
        rng.split(1 + epoch as u64).shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let n = &net;
            let results = try_map_indexed(batch.len(), par, |j| {
                let r = batch[j];
                let trace = n.forward_trace(&Tensor::vector(xs.row(r)))?;
                let (loss, grad) = mse_loss(trace.output(), &Tensor::vector(ys.row(r)))?;
                let (_, grads) = n.backward(&trace, &grad)?;
                Ok::<_, Error>((loss, grads))
            })?;
            let scale = 1.0 / batch.len() as f32;
            let mut acc: Vec<Tensor<f32>> = net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
            for (loss, grads) in &results {
                total += *loss as f64;
                for (a, g) in acc.iter_mut().zip(grads) {
                    a.axpy(scale, g)?;
                }
            }
            adam.step(net.params_mut(), &acc)?;
        }
        let mean = total / rows as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch, loss: mean });
        }
        curve.push(mean);
    }
    Ok((MnnModel { net, features, targets }, curve))
}

#[derive(Serialize, Deserialize)]
struct MnnManifest {
    features: Standardizer,
    targets: TargetScaler,
    #[serde(default)]
    config_hash: Option<String>,
}

/// Writes `mnn.params` and `mnn.json` into `dir`.
pub fn save_mnn(model: &MnnModel, dir: impl AsRef<Path>, config_hash: Option<&str>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join("mnn.params");
    let f = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
    let mut w = BufWriter::new(f);
    write_params(&mut w, &[("mnn", &model.net)])
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&p, e))?;
    let manifest = MnnManifest {
        features: model.features.clone(),
        targets: model.targets.clone(),
        config_hash: config_hash.map(str::to_owned),
    };
    let m = dir.join("mnn.json");
    fs::write(&m, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&m, e))
}

/// Reads a model saved by [`save_mnn`], with the config hash it was stamped with.
pub fn load_mnn(dir: impl AsRef<Path>) -> Result<(MnnModel, Option<String>)> {
    let dir = dir.as_ref();
    let m = dir.join("mnn.json");
    let manifest: MnnManifest = serde_json::from_slice(&fs::read(&m).map_err(|e| Error::io(&m, e))?)?;
    let p = dir.join("mnn.params");
    let f = fs::File::open(&p).map_err(|e| Error::io(&p, e))?;
    let mut groups = read_params::<f32, _>(&mut BufReader::new(f))?;
    if groups.len() != 1 || groups[0].0 != "mnn" {
        return Err(Error::Format(format!("{}: expected a single \"mnn\" group", p.display())));
    }
    let net = groups.remove(0).1;
    Ok((MnnModel { net, features: manifest.features, targets: manifest.targets }, manifest.config_hash))
}
