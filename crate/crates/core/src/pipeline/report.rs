use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_NAMES: [&str; 4] = ["forest", "gbt", "mnn", "ensemble"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    pub pt500_rmse: f64,
    pub pt4000_rmse: f64,
    pub pt500_mae: f64,
    pub pt4000_mae: f64,
}

impl ModelMetrics {
    pub fn new(model: &str, rmse: &[f64], mae: &[f64]) -> Self {
        ModelMetrics {
            model: model.to_owned(),
            pt500_rmse: rmse[0],
            pt4000_rmse: rmse[1],
            pt500_mae: mae[0],
            pt4000_mae: mae[1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSizes {
    pub total: usize,
    pub train: usize,
    pub augmented: usize,
    pub test: usize,
}

/// Test-set scores of one run. Wall-clock timings live in `timings.json`
/// so this document is a pure function of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub config_hash: String,
    pub dataset: DatasetSizes,
    /// Predicts the phase-2 training mean for every test row.
    pub baseline: ModelMetrics,
    pub models: Vec<ModelMetrics>,
}

impl MetricsReport {
    pub fn model(&self, name: &str) -> Option<&ModelMetrics> {
        self.models.iter().find(|m| m.model == name)
    }
}

fn label(model: &str) -> &str {
    match model {
        "forest" => "Random Forest",
        "gbt" => "Gradient Boosted Trees",
        "mnn" => "MNN",
        "ensemble" => "Ensemble of MNN and GBT",
        other => other,
    }
}

/// Text table (header plus one row per model) and the matching CSV.
pub fn emit_table(report: &MetricsReport) -> (String, String) {
    let mut text = format!("{:<26}{:>20}{:>21}\n", "Model", "RMSE of PT500 (dB)", "RMSE of PT4000 (dB)");
    let mut csv = String::from("model,pt500_rmse_db,pt4000_rmse_db\n");
    for m in &report.models {
        text += &format!("{:<26}{:>20.4}{:>21.4}\n", label(&m.model), m.pt500_rmse, m.pt4000_rmse);
        csv += &format!("{},{:.4},{:.4}\n", m.model, m.pt500_rmse, m.pt4000_rmse);
    }
    (text, csv)
}

/// Parses the CSV written by [`emit_table`] into `(model, pt500, pt4000)` rows.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<(String, f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["model", "pt500_rmse_db", "pt4000_rmse_db"] {
        return Err(Error::Format("metrics CSV header must be model,pt500_rmse_db,pt4000_rmse_db".into()));
    }
    rdr.deserialize().map(|r| Ok(r?)).collect()
}
