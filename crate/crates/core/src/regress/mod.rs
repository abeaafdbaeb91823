//! Phase two: tree ensembles, boosting and an MLP regressing hearing
//! thresholds from latent features, plus RMSE evaluation.

mod data;
mod forest;
mod gbt;
mod metrics;
mod mnn;
mod tree;

pub use data::{FeatureMatrix, Standardizer, TargetScaler};
pub use forest::{fit_forest, ForestModel, ForestParams};
pub use gbt::{fit_gbt, second_order_gain, BoostedModel, BoostedTarget, GbtParams};
pub use metrics::{average_predictions, mae, mean_baseline, predict_ensemble, rmse};
pub use mnn::{fit_mnn, load_mnn, save_mnn, MnnConfig, MnnModel};
pub use tree::{fit_tree, Node, TreeModel, TreeParams};
