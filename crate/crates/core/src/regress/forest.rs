use serde::{Deserialize, Serialize};

use super::tree::{check_features, check_xy, Grower, TreeModel, TreeParams, VarianceReduction};
use crate::error::Result;
use crate::par::{map_indexed, Parallelism};
use crate::tensor::{Rng, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per node; `None` means `ceil(cols / 3)`.
    pub feature_subsample: Option<usize>,
    /// Resample rows with replacement per tree. Off only in tests.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: 10, min_leaf: 2, feature_subsample: None, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    /// Stream key each tree was grown from.
    pub seeds: Vec<u64>,
    pub params: ForestParams,
}

impl ForestModel {
    pub fn predict(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        let order: Vec<usize> = (0..self.trees.len()).collect();
        self.predict_in_order(x, &order)
    }

    /// Mean over the trees visited in `order`.
    pub fn predict_in_order(&self, x: &Tensor<f64>, order: &[usize]) -> Result<Tensor<f64>> {
        let first = &self.trees[0];
        check_features(x, first.n_features)?;
        let rows = x.shape()[0];
        let mut out = Tensor::zeros(&[rows, first.n_outputs]);
        for &t in order {
            out.axpy(1.0, &self.trees[t].predict(x)?)?;
        }
        Ok(out.scale(1.0 / order.len() as f64))
    }
}

/// Bagged CART trees; tree `i` draws its bootstrap sample and feature
/// subsets from `rng.split(i)`.
pub fn fit_forest(x: &Tensor<f64>, y: &Tensor<f64>, params: &ForestParams, rng: &Rng, par: Parallelism) -> Result<ForestModel> {
    check_xy(x, y)?;
    if params.n_trees == 0 {
        return Err(crate::Error::Parameter("a forest needs at least one tree".into()));
    }
    let (rows, cols) = (x.shape()[0], x.shape()[1]);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        feature_subsample: Some(params.feature_subsample.unwrap_or(cols.div_ceil(3))),
    };
    let grower = Grower::new(x, VarianceReduction { y }, tree_params, 0.0);
    let trees = map_indexed(params.n_trees, par, |i| {
        let mut trng = rng.split(i as u64);
        let sample: Vec<usize> = if params.bootstrap {
            (0..rows).map(|_| trng.below(rows)).collect()
        } else {
            (0..rows).collect()
        };
        (grower.grow(&sample, y.shape()[1], &mut trng), rng.split(i as u64).key())
    });
    let (trees, seeds) = trees.into_iter().unzip();
    Ok(ForestModel { trees, seeds, params: params.clone() })
}
