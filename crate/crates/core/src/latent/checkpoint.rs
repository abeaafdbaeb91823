//! Checkpoints: `model.params` (parameter container) beside a `model.json`
//! manifest describing how to rebuild and verify the model.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{EncoderDecoder, ModelKind, VaeHeads};
use super::train::{params_checksum, TrainConfig};
use crate::error::{Error, Result};
use crate::nnops::{read_params, write_params, Network};

/// Caller-supplied provenance stored in the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub train: Option<TrainConfig>,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub kind: ModelKind,
    pub latent_dim: usize,
    pub beta: f64,
    pub input_shape: [usize; 3],
    pub channels: Vec<usize>,
    pub checksum: String,
    #[serde(flatten)]
    pub meta: CheckpointMeta,
}

const PARAMS: &str = "model.params";
const MANIFEST: &str = "model.json";

/// Writes the checkpoint into `dir`, returning the manifest path.
pub fn save_checkpoint(model: &EncoderDecoder<f32>, dir: impl AsRef<Path>, meta: CheckpointMeta) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut groups: Vec<(&str, &Network<f32>)> = vec![("encoder", &model.encoder)];
    if let Some(h) = &model.heads {
        groups.push(("mu", &h.mu));
        groups.push(("logvar", &h.logvar));
    }
    groups.push(("decoder", &model.decoder));

    let params = dir.join(PARAMS);
    let file = fs::File::create(&params).map_err(|e| Error::io(&params, e))?;
    let mut w = BufWriter::new(file);
    write_params(&mut w, &groups)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&params, e))?;

    let manifest = CheckpointManifest {
        kind: model.kind,
        latent_dim: model.latent_dim,
        beta: model.beta,
        input_shape: model.input_shape,
        channels: model.channels.clone(),
        checksum: params_checksum(model),
        meta,
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Loads a checkpoint written by [`save_checkpoint`] and verifies its checksum.
pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<(EncoderDecoder<f32>, CheckpointManifest)> {
    let dir = dir.as_ref();
    let mpath = dir.join(MANIFEST);
    let text = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: CheckpointManifest = serde_json::from_slice(&text)?;

    let ppath = dir.join(PARAMS);
    let file = fs::File::open(&ppath).map_err(|e| Error::io(&ppath, e))?;
    let mut groups = read_params::<f32, _>(&mut BufReader::new(file))?.into_iter();
    let mut take = |name: &str| match groups.next() {
        Some((n, net)) if n == name => Ok(net),
        other => Err(Error::Format(format!(
            "expected group {name:?}, found {:?}",
            other.map(|(n, _)| n)
        ))),
    };
    let encoder = take("encoder")?;
    let heads = match manifest.kind {
        ModelKind::Ae => None,
        ModelKind::Vae => Some(VaeHeads { mu: take("mu")?, logvar: take("logvar")? }),
    };
    let decoder = take("decoder")?;
    if let Some((n, _)) = groups.next() {
        return Err(Error::Format(format!("unexpected group {n:?}")));
    }

    let model = EncoderDecoder {
        kind: manifest.kind,
        input_shape: manifest.input_shape,
        latent_dim: manifest.latent_dim,
        channels: manifest.channels.clone(),
        beta: manifest.beta,
        encoder,
        heads,
        decoder,
    };
    model.check_structure()?;
    let sum = params_checksum(&model);
    if sum != manifest.checksum {
        return Err(Error::ArtifactMismatch(format!(
            "{}: parameter checksum {sum} does not match manifest {}",
            dir.display(),
            manifest.checksum
        )));
    }
    Ok((model, manifest))
}
