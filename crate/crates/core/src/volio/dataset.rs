use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::phantom::{make_phantom_detailed, PhantomConfig};
use super::{format, TargetPair, Volume};
use crate::error::{Error, Result};
use crate::par::{try_map_indexed, Parallelism};
use crate::tensor::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub volume: Volume,
    pub targets: TargetPair,
}

/// Non-empty set of equally shaped volumes with threshold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    items: Vec<Sample>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(items: Vec<Sample>, provenance: Provenance) -> Result<Self> {
        let Some(first) = items.first() else {
            return Err(Error::Parameter("dataset must not be empty".into()));
        };
        let shape = first.volume.shape();
        if let Some(bad) = items.iter().find(|s| s.volume.shape() != shape) {
            return Err(Error::Dimension(format!(
                "volume {} has shape {:?}, dataset shape is {shape:?}",
                bad.volume.id,
                bad.volume.shape()
            )));
        }
        Ok(LabeledDataset { items, provenance })
    }

    pub fn items(&self) -> &[Sample] {
        &self.items
    }

    pub fn into_items(self) -> Vec<Sample> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn shape(&self) -> [usize; 3] {
        self.items[0].volume.shape()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.items.iter().map(|s| s.volume.id.as_str()).collect()
    }
}

pub fn phantom_id(index: usize) -> String {
    format!("phantom_{index:04}")
}

/// `n` phantoms; item `i` draws from `rng.split(i)`, so the result does not
/// depend on `par`.
pub fn synthetic_dataset(n: usize, cfg: &PhantomConfig, rng: &Rng, par: Parallelism) -> Result<LabeledDataset> {
    let items = try_map_indexed(n, par, |i| {
        let p = make_phantom_detailed(&mut rng.split(i as u64), cfg, &phantom_id(i))?;
        Ok::<_, Error>(Sample { volume: p.volume, targets: p.targets })
    })?;
    LabeledDataset::new(items, Provenance::Synthetic)
}

/// Seeded shuffle then partition. Test size is `max(1, floor(n · fraction))`;
/// the train side always keeps at least one item.
pub fn split_dataset(ds: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Parameter(format!("test_fraction {test_fraction} not in (0, 1)")));
    }
    let n = ds.len();
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 items to split, got {n}")));
    }
    let n_test = ((n as f64 * test_fraction).floor() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let (test_idx, train_idx) = order.split_at(n_test);
    let pick = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        LabeledDataset::new(idx.iter().map(|&i| ds.items[i].clone()).collect(), ds.provenance)
    };
    Ok((pick(train_idx)?, pick(test_idx)?))
}

/// Labels CSV with header `id,pt500,pt4000`.
pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, TargetPair>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "pt500", "pt4000"] {
        return Err(Error::Format(format!(
            "{}: labels header must be id,pt500,pt4000, got {:?}",
            path.display(),
            headers
        )));
    }
    let mut out = BTreeMap::new();
    for row in rdr.deserialize() {
        let (id, pt500, pt4000): (String, f32, f32) = row?;
        if out.insert(id.clone(), TargetPair::new(pt500, pt4000)?).is_some() {
            return Err(Error::Format(format!("duplicate label id {id}")));
        }
    }
    Ok(out)
}

pub fn write_labels<'a>(path: impl AsRef<Path>, rows: impl IntoIterator<Item = (&'a str, TargetPair)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["id", "pt500", "pt4000"])?;
    for (id, t) in rows {
        w.serialize((id, t.pt500, t.pt4000))?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(())
}

/// Loads every volume in `dir` (internal format or `.nii`) and joins labels by id.
pub fn load_directory(dir: impl AsRef<Path>, labels: impl AsRef<Path>, provenance: Provenance) -> Result<LabeledDataset> {
    let labels = read_labels(labels)?;
    let mut items = Vec::new();
    for path in format::list_volumes(dir)? {
        let volume = format::read_any(&path)?;
        let targets = *labels
            .get(&volume.id)
            .ok_or_else(|| Error::Format(format!("no label row for volume {}", volume.id)))?;
        items.push(Sample { volume, targets });
    }
    LabeledDataset::new(items, provenance)
}

/// Writes every volume and a `labels.csv` into `dir`.
pub fn save_directory(ds: &LabeledDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    for s in ds.items() {
        format::write_volume(&s.volume, dir)?;
    }
    write_labels(
        dir.join("labels.csv"),
        ds.items().iter().map(|s| (s.volume.id.as_str(), s.targets)),
    )
}
