use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::latent::{ModelConfig, TrainConfig};
use crate::par::Parallelism;
use crate::regress::{ForestParams, GbtParams, MnnConfig};
use crate::volio::PhantomConfig;

/// Where the volumes come from. Synthetic volume size is `phantom.size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataConfig {
    Synthetic {
        n: usize,
        #[serde(default)]
        phantom: PhantomConfig,
    },
    Directory {
        path: PathBuf,
        labels: PathBuf,
        /// Expected `[D, H, W]`; checked after loading when present.
        #[serde(default)]
        size: Option<[usize; 3]>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase1Config {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase2Config {
    pub test_fraction: f64,
    pub forest: ForestParams,
    pub gbt: GbtParams,
    pub mnn: MnnConfig,
}

impl Default for Phase2Config {
    fn default() -> Self {
        Phase2Config {
            test_fraction: 0.2,
            forest: ForestParams::default(),
            gbt: GbtParams::default(),
            mnn: MnnConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub phase1: Phase1Config,
    #[serde(default)]
    pub phase2: Phase2Config,
    pub output_dir: PathBuf,
    /// Execution strategy only; results do not depend on it.
    #[serde(default)]
    pub parallelism: Parallelism,
}

/// Fields that do not affect any result and are left out of the hash.
const UNHASHED: [&str; 2] = ["output_dir", "parallelism"];

impl PipelineConfig {
    pub fn synthetic(n: usize, seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            seed,
            data: DataConfig::Synthetic { n, phantom: PhantomConfig::default() },
            augment: AugmentConfig::default(),
            phase1: Phase1Config::default(),
            phase2: Phase2Config::default(),
            output_dir: output_dir.into(),
            parallelism: Parallelism::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.data {
            DataConfig::Synthetic { n, phantom } => {
                if *n < 2 {
                    return Err(Error::Config(format!("data.n must be >= 2, got {n}")));
                }
                phantom.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
            DataConfig::Directory { path, labels, .. } => {
                for p in [path, labels] {
                    if !p.exists() {
                        return Err(Error::Config(format!("{} does not exist", p.display())));
                    }
                }
            }
        }
        self.augment.validate()?;
        self.phase1.model.validate()?;
        self.phase1.train.validate()?;
        let f = self.phase2.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("phase2.test_fraction {f} not in (0, 1)")));
        }
        if self.phase2.forest.n_trees == 0 || self.phase2.forest.min_leaf == 0 {
            return Err(Error::Config("phase2.forest needs n_trees >= 1 and min_leaf >= 1".into()));
        }
        self.phase2.gbt.validate().map_err(|e| Error::Config(e.to_string()))?;
        let m = &self.phase2.mnn;
        if m.batch_size == 0 || !(m.lr > 0.0) || m.hidden.contains(&0) {
            return Err(Error::Config("phase2.mnn needs batch_size >= 1, lr > 0 and non-zero widths".into()));
        }
        Ok(())
    }

    /// Hex sha256 of the canonical (sorted-key, compact) JSON of every field
    /// that can influence a result.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            for k in UNHASHED {
                map.remove(k);
            }
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}
