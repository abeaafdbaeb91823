//! The two-phase pipeline: volumes, augmentation, autoencoder, latent
//! features, regressors, scores.
//!
//! Every stage reads its inputs from and writes its outputs to the
//! configured output directory, so stages can run one at a time:
//!
//! ```text
//! resolved_config.json       config after defaults and the seed override
//! data/                      normalized volumes, labels.csv, manifest.json (split)
//! augmented/                 augmented training copies, labels.csv, manifest.json
//! phase1/                    autoencoder checkpoint (model.params, model.json)
//! loss_curve.csv             phase-1 epoch losses
//! features.json              latent features of every volume
//! phase2/                    forest.json, gbt.json, mnn.params, mnn.json, mnn_loss_curve.csv
//! metrics.json, metrics.csv  test-set scores
//! table.txt                  the scores as a text table
//! timings.json               wall-clock seconds per stage
//! ```
//!
//! All randomness comes from `Rng::new(seed).split(k)`: k = 0 data
//! generation, 1 train/test split, 2 augmentation, 3 autoencoder init,
//! 4 phase-1 training, 5 forest, 6 boosting, 7 MNN.
//!
//! JSON artifacts carry the config hash; a stage refuses inputs stamped
//! with a different hash.

mod config;
mod report;

pub use config::{DataConfig, Phase1Config, Phase2Config, PipelineConfig};
pub use report::{emit_table, parse_metrics_csv, DatasetSizes, MetricsReport, ModelMetrics, MODEL_NAMES};

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::augment::augment_dataset;
use crate::error::{Error, Result, StageContext};
use crate::latent::{build_model, encode, load_checkpoint, save_checkpoint, train, CheckpointMeta, TrainReport};
use crate::par::try_map_indexed;
use crate::regress::{
    fit_forest, fit_gbt, fit_mnn, load_mnn, mae, mean_baseline, predict_ensemble, rmse, save_mnn, BoostedModel,
    FeatureMatrix, ForestModel,
};
use crate::tensor::{Rng, Tensor};
use crate::volio::{
    load_directory, normalize_volume, save_directory, split_dataset, synthetic_dataset, write_labels, write_volume,
    LabeledDataset, Provenance, Sample,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    GenData,
    Augment,
    TrainPhase1,
    Encode,
    TrainPhase2,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::GenData,
        Stage::Augment,
        Stage::TrainPhase1,
        Stage::Encode,
        Stage::TrainPhase2,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::GenData => "gen-data",
            Stage::Augment => "augment",
            Stage::TrainPhase1 => "train-phase1",
            Stage::Encode => "encode",
            Stage::TrainPhase2 => "train-phase2",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown stage {s}")))
    }
}

const DATA_DIR: &str = "data";
const AUG_DIR: &str = "augmented";
const PHASE1_DIR: &str = "phase1";
const PHASE2_DIR: &str = "phase2";
const MANIFEST: &str = "manifest.json";
const LABELS: &str = "labels.csv";
const FEATURES: &str = "features.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const TABLE_TXT: &str = "table.txt";
pub const LOSS_CURVE: &str = "loss_curve.csv";
pub const RESOLVED_CONFIG: &str = "resolved_config.json";
pub const TIMINGS: &str = "timings.json";

mod streams {
    pub const DATA: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const AUGMENT: u64 = 2;
    pub const INIT: u64 = 3;
    pub const PHASE1: u64 = 4;
    pub const FOREST: u64 = 5;
    pub const GBT: u64 = 6;
    pub const MNN: u64 = 7;
}

#[derive(Serialize, Deserialize)]
struct Stamped<T> {
    config_hash: String,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize, Deserialize)]
struct DataManifest {
    provenance: Provenance,
    train: Vec<String>,
    test: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct AugmentManifest {
    ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Augmented,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub id: String,
    pub split: Split,
    pub features: Vec<f64>,
    pub targets: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub latent_dim: usize,
    pub rows: Vec<FeatureRow>,
}

impl Features {
    /// Rows whose split is in `splits`, in file order.
    pub fn matrix(&self, splits: &[Split]) -> Result<FeatureMatrix> {
        let rows: Vec<&FeatureRow> = self.rows.iter().filter(|r| splits.contains(&r.split)).collect();
        if rows.is_empty() {
            return Err(Error::DegenerateInput(format!("no feature rows in splits {splits:?}")));
        }
        let values = Tensor::from_rows(&rows.iter().map(|r| r.features.clone()).collect::<Vec<_>>())?;
        let targets = Tensor::from_rows(&rows.iter().map(|r| r.targets.to_vec()).collect::<Vec<_>>())?;
        FeatureMatrix::new(rows.iter().map(|r| r.id.clone()).collect(), values, targets)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// A validated config together with its hash.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    hash: String,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate().stage("config")?;
        let hash = config.hash();
        Ok(Pipeline { config, hash })
    }

    /// Reads a config file, applying `seed` over the file's seed.
    pub fn load(path: impl AsRef<Path>, seed: Option<u64>) -> Result<Self> {
        let mut config = PipelineConfig::load(path).stage("config")?;
        if let Some(s) = seed {
            config.seed = s;
        }
        Self::new(config)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn output_dir(&self) -> &Path {
        &self.config.output_dir
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.config.output_dir.join(rel)
    }

    fn rng(&self, stream: u64) -> Rng {
        Rng::new(self.config.seed).split(stream)
    }

    fn stamp<T: Serialize>(&self, path: &Path, body: T) -> Result<()> {
        write_json(path, &Stamped { config_hash: self.hash.clone(), body })
    }

    fn check_hash(&self, found: Option<&str>, what: &Path) -> Result<()> {
        match found {
            Some(h) if h == self.hash => Ok(()),
            other => Err(Error::ArtifactMismatch(format!(
                "{} was produced by config {}, current config is {}",
                what.display(),
                other.unwrap_or("<unstamped>"),
                self.hash
            ))),
        }
    }

    fn read_stamped<T: DeserializeOwned>(&self, path: &Path) -> Result<T> {
        let s: Stamped<T> = read_json(path)?;
        self.check_hash(Some(&s.config_hash), path)?;
        Ok(s.body)
    }

    /// Creates the output directory and writes `resolved_config.json`.
    pub fn prepare(&self) -> Result<()> {
        let dir = self.output_dir();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&self.path(RESOLVED_CONFIG), &self.config)
    }

    /// Runs one stage, recording its duration in `timings.json`.
    pub fn run_stage(&self, stage: Stage) -> Result<()> {
        self.prepare().stage(stage.name())?;
        let t = Instant::now();
        match stage {
            Stage::GenData => self.gen_data(),
            Stage::Augment => self.augment(),
            Stage::TrainPhase1 => self.train_phase1().map(|_| ()),
            Stage::Encode => self.encode(),
            Stage::TrainPhase2 => self.train_phase2(),
            Stage::Evaluate => self.evaluate().map(|_| ()),
            Stage::Report => self.report().map(|_| ()),
        }
        .stage(stage.name())?;
        self.record_timing(stage.name(), t.elapsed().as_secs_f64()).stage(stage.name())
    }

    /// Every stage in order; returns the final report.
    pub fn run(&self) -> Result<MetricsReport> {
        let t = Instant::now();
        for stage in Stage::ALL {
            self.run_stage(stage)?;
        }
        self.record_timing("total", t.elapsed().as_secs_f64()).stage("run")?;
        self.read_metrics().stage("run")
    }

    fn record_timing(&self, key: &str, secs: f64) -> Result<()> {
        let path = self.path(TIMINGS);
        let mut t: BTreeMap<String, f64> = if path.exists() { read_json(&path)? } else { BTreeMap::new() };
        t.insert(key.to_owned(), secs);
        write_json(&path, &t)
    }

    pub fn gen_data(&self) -> Result<()> {
        let par = self.config.parallelism;
        let ds = match &self.config.data {
            DataConfig::Synthetic { n, phantom } => synthetic_dataset(*n, phantom, &self.rng(streams::DATA), par)?,
            DataConfig::Directory { path, labels, size } => {
                let ds = load_directory(path, labels, Provenance::External)?;
                if let Some(s) = size {
                    if ds.shape() != *s {
                        return Err(Error::Dimension(format!("volumes are {:?}, config expects {s:?}", ds.shape())));
                    }
                }
                ds
            }
        };
        let provenance = ds.provenance;
        let items = try_map_indexed(ds.len(), par, |i| {
            let s = &ds.items()[i];
            Ok::<_, Error>(Sample { volume: normalize_volume(&s.volume)?, targets: s.targets })
        })?;
        let ds = LabeledDataset::new(items, provenance)?;
        let (train, test) = split_dataset(&ds, self.config.phase2.test_fraction, self.rng(streams::SPLIT).key())?;
        let dir = self.path(DATA_DIR);
        fresh_dir(&dir)?;
        save_directory(&ds, &dir)?;
        let ids = |d: &LabeledDataset| d.ids().into_iter().map(str::to_owned).collect();
        self.stamp(&dir.join(MANIFEST), DataManifest { provenance, train: ids(&train), test: ids(&test) })
    }

    /// The normalized dataset split as recorded by `gen-data`.
    pub fn load_split(&self) -> Result<(Vec<Sample>, Vec<Sample>)> {
        let dir = self.path(DATA_DIR);
        let m: DataManifest = self.read_stamped(&dir.join(MANIFEST))?;
        let mut by_id: BTreeMap<String, Sample> = load_directory(&dir, dir.join(LABELS), m.provenance)?
            .into_items()
            .into_iter()
            .map(|s| (s.volume.id.clone(), s))
            .collect();
        let mut take = |ids: &[String]| {
            ids.iter()
                .map(|id| by_id.remove(id).ok_or_else(|| Error::ArtifactMismatch(format!("volume {id} missing from {}", dir.display()))))
                .collect::<Result<Vec<_>>>()
        };
        Ok((take(&m.train)?, take(&m.test)?))
    }

    pub fn augment(&self) -> Result<()> {
        let (train, _) = self.load_split()?;
        let train = LabeledDataset::new(train, Provenance::Synthetic)?;
        let copies = augment_dataset(&train, &self.config.augment, &self.rng(streams::AUGMENT), self.config.parallelism)?;
        let dir = self.path(AUG_DIR);
        fresh_dir(&dir)?;
        for s in &copies {
            write_volume(&s.volume, &dir)?;
        }
        write_labels(dir.join(LABELS), copies.iter().map(|s| (s.volume.id.as_str(), s.targets)))?;
        let ids = copies.iter().map(|s| s.volume.id.clone()).collect();
        self.stamp(&dir.join(MANIFEST), AugmentManifest { ids })
    }

    pub fn load_augmented(&self) -> Result<Vec<Sample>> {
        let dir = self.path(AUG_DIR);
        let m: AugmentManifest = self.read_stamped(&dir.join(MANIFEST))?;
        if m.ids.is_empty() {
            return Ok(Vec::new());
        }
        let items = load_directory(&dir, dir.join(LABELS), Provenance::Synthetic)?.into_items();
        if items.iter().map(|s| &s.volume.id).ne(m.ids.iter()) {
            return Err(Error::ArtifactMismatch(format!("{} does not match its manifest", dir.display())));
        }
        Ok(items)
    }

    pub fn train_phase1(&self) -> Result<TrainReport> {
        let (train_items, _) = self.load_split()?;
        let aug = self.load_augmented()?;
        let vols: Vec<_> = train_items.iter().chain(&aug).map(|s| &s.volume).collect();
        let p1 = &self.config.phase1;
        let model = build_model::<f32>(&p1.model, vols[0].shape(), &mut self.rng(streams::INIT))?;
        let (model, report) = train(model, &vols, &p1.train, &self.rng(streams::PHASE1), self.config.parallelism)?;
        let meta = CheckpointMeta {
            train: Some(p1.train.clone()),
            seed: Some(self.config.seed),
            config_hash: Some(self.hash.clone()),
        };
        save_checkpoint(&model, self.path(PHASE1_DIR), meta)?;
        let mut w = csv::Writer::from_path(self.path(LOSS_CURVE))?;
        w.write_record(["epoch", "total", "recon", "kl"])?;
        for e in &report.epochs {
            w.serialize((e.epoch + 1, e.total, e.recon, e.kl))?;
        }
        w.flush().map_err(|e| Error::io(self.path(LOSS_CURVE), e))?;
        Ok(report)
    }

    pub fn encode(&self) -> Result<()> {
        let (model, manifest) = load_checkpoint(self.path(PHASE1_DIR))?;
        self.check_hash(manifest.meta.config_hash.as_deref(), &self.path(PHASE1_DIR))?;
        let (train_items, test_items) = self.load_split()?;
        let aug = self.load_augmented()?;
        let all: Vec<(&Sample, Split)> = train_items
            .iter()
            .map(|s| (s, Split::Train))
            .chain(aug.iter().map(|s| (s, Split::Augmented)))
            .chain(test_items.iter().map(|s| (s, Split::Test)))
            .collect();
        let rows = try_map_indexed(all.len(), self.config.parallelism, |i| {
            let (s, split) = all[i];
            let z = encode(&model, &s.volume)?;
            Ok::<_, Error>(FeatureRow {
                id: s.volume.id.clone(),
                split,
                features: z.data().iter().map(|&v| v as f64).collect(),
                targets: s.targets.as_array(),
            })
        })?;
        self.stamp(&self.path(FEATURES), Features { latent_dim: model.latent_dim, rows })
    }

    pub fn load_features(&self) -> Result<Features> {
        self.read_stamped(&self.path(FEATURES))
    }

    pub fn train_phase2(&self) -> Result<()> {
        let fm = self.load_features()?.matrix(&[Split::Train, Split::Augmented])?;
        let (x, y) = (&fm.values, &fm.targets);
        let (p2, par) = (&self.config.phase2, self.config.parallelism);
        let forest = fit_forest(x, y, &p2.forest, &self.rng(streams::FOREST), par)?;
        let gbt = fit_gbt(x, y, &p2.gbt, &self.rng(streams::GBT), par)?;
        let (mnn, curve) = fit_mnn(x, y, &p2.mnn, &self.rng(streams::MNN), par)?;
        let dir = self.path(PHASE2_DIR);
        self.stamp(&dir.join("forest.json"), ModelBody { model: forest })?;
        self.stamp(&dir.join("gbt.json"), ModelBody { model: gbt })?;
        save_mnn(&mnn, &dir, Some(&self.hash))?;
        let path = dir.join("mnn_loss_curve.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["epoch", "mse"])?;
        for (e, l) in curve.iter().enumerate() {
            w.serialize((e + 1, l))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    pub fn evaluate(&self) -> Result<MetricsReport> {
        let features = self.load_features()?;
        let (_, manifest) = load_checkpoint(self.path(PHASE1_DIR))?;
        self.check_hash(manifest.meta.config_hash.as_deref(), &self.path(PHASE1_DIR))?;
        let dir = self.path(PHASE2_DIR);
        let forest: ModelBody<ForestModel> = self.read_stamped(&dir.join("forest.json"))?;
        let gbt: ModelBody<BoostedModel> = self.read_stamped(&dir.join("gbt.json"))?;
        let (mnn, mnn_hash) = load_mnn(&dir)?;
        self.check_hash(mnn_hash.as_deref(), &dir.join("mnn.json"))?;

        let train = features.matrix(&[Split::Train, Split::Augmented])?;
        let test = features.matrix(&[Split::Test])?;
        let (x, y) = (&test.values, &test.targets);
        let score = |name: &str, pred: &Tensor<f64>| Ok::<_, Error>(ModelMetrics::new(name, &rmse(pred, y)?, &mae(pred, y)?));
        let baseline = score("mean", &mean_baseline(&train.targets, test.rows())?)?;
        let models = vec![
            score("forest", &forest.model.predict(x)?)?,
            score("gbt", &gbt.model.predict(x)?)?,
            score("mnn", &mnn.predict(x)?)?,
            score("ensemble", &predict_ensemble(&mnn, &gbt.model, x)?)?,
        ];
        let count = |s: Split| features.rows.iter().filter(|r| r.split == s).count();
        let report = MetricsReport {
            seed: self.config.seed,
            config_hash: self.hash.clone(),
            dataset: DatasetSizes {
                total: count(Split::Train) + count(Split::Test),
                train: count(Split::Train),
                augmented: count(Split::Augmented),
                test: count(Split::Test),
            },
            baseline,
            models,
        };
        write_json(&self.path(METRICS_JSON), &report)?;
        Ok(report)
    }

    pub fn read_metrics(&self) -> Result<MetricsReport> {
        let path = self.path(METRICS_JSON);
        let report: MetricsReport = read_json(&path)?;
        self.check_hash(Some(&report.config_hash), &path)?;
        Ok(report)
    }

    /// Writes `metrics.csv` and `table.txt`, returning the table text.
    pub fn report(&self) -> Result<String> {
        let (text, csv) = emit_table(&self.read_metrics()?);
        for (name, body) in [(METRICS_CSV, &csv), (TABLE_TXT, &text)] {
            let p = self.path(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(text)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelBody<T> {
    model: T,
}
