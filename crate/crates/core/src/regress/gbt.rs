use serde::{Deserialize, Serialize};

use super::tree::{check_features, check_xy, Criterion, Grower, TreeModel, TreeParams};
use crate::error::{Error, Result};
use crate::par::{map_indexed, Parallelism};
use crate::tensor::{Rng, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub rounds: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub min_gain: f64,
    pub min_leaf: usize,
    pub feature_subsample: Option<usize>,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            rounds: 200,
            shrinkage: 0.1,
            max_depth: 3,
            lambda: 1.0,
            min_gain: 0.0,
            min_leaf: 1,
            feature_subsample: None,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::Parameter(format!("shrinkage {} not in (0, 1]", self.shrinkage)));
        }
        if !(self.lambda >= 0.0) || !(self.min_gain >= 0.0) {
            return Err(Error::Parameter("lambda and min_gain must be >= 0".into()));
        }
        Ok(())
    }
}

/// `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)]` with `G = G_L + G_R`, `H = H_L + H_R`.
pub fn second_order_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr))
}

/// Squared loss with unit hessians: `g = pred - y`, `h = 1`.
struct SecondOrder<'a> {
    g: &'a [f64],
    lambda: f64,
}

impl Criterion for SecondOrder<'_> {
    fn width(&self) -> usize {
        2
    }

    fn row_stats(&self, row: usize, out: &mut [f64]) {
        out[0] = self.g[row];
        out[1] = self.g[row] * self.g[row];
    }

    fn gain(&self, _p: (usize, &[f64]), l: (usize, &[f64]), r: (usize, &[f64])) -> f64 {
        second_order_gain(l.1[0], l.0 as f64, r.1[0], r.0 as f64, self.lambda)
    }

    fn leaf(&self, n: usize, s: &[f64]) -> Vec<f64> {
        vec![-s[0] / (n as f64 + self.lambda)]
    }

    fn scale(&self, _n: usize, s: &[f64]) -> f64 {
        s[1]
    }
}

/// Boosted trees for one target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTarget {
    pub base_score: f64,
    pub trees: Vec<TreeModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub targets: Vec<BoostedTarget>,
    pub n_features: usize,
    pub params: GbtParams,
}

impl BoostedModel {
    pub fn base_score(&self) -> Vec<f64> {
        self.targets.iter().map(|t| t.base_score).collect()
    }

    pub fn predict(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        self.predict_rounds(x, usize::MAX)
    }

    /// Prediction using only the first `rounds` trees of each target.
    pub fn predict_rounds(&self, x: &Tensor<f64>, rounds: usize) -> Result<Tensor<f64>> {
        check_features(x, self.n_features)?;
        let rows = x.shape()[0];
        let k = self.targets.len();
        let mut out = vec![0.0; rows * k];
        for (j, t) in self.targets.iter().enumerate() {
            for r in 0..rows {
                let mut p = t.base_score;
                for tree in t.trees.iter().take(rounds) {
                    p += self.params.shrinkage * tree.predict_row(x.row(r))[0];
                }
                out[r * k + j] = p;
            }
        }
        Tensor::from_vec(&[rows, k], out)
    }
}

fn fit_column(x: &Tensor<f64>, y: &[f64], params: &GbtParams, rng: &mut Rng) -> BoostedTarget {
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        feature_subsample: params.feature_subsample,
    };
    let rows: Vec<usize> = (0..n).collect();
    let mut trees = Vec::with_capacity(params.rounds);
    for _ in 0..params.rounds {
        let g: Vec<f64> = pred.iter().zip(y).map(|(p, t)| p - t).collect();
        let crit = SecondOrder { g: &g, lambda: params.lambda };
        let tree = Grower::new(x, crit, tree_params.clone(), params.min_gain).grow(&rows, 1, rng);
        for (r, p) in pred.iter_mut().enumerate() {
            *p += params.shrinkage * tree.predict_row(x.row(r))[0];
        }
        trees.push(tree);
    }
    BoostedTarget { base_score: base, trees }
}

/// One independently boosted model per target column; column `j` draws
/// feature subsets from `rng.split(j)`.
pub fn fit_gbt(x: &Tensor<f64>, y: &Tensor<f64>, params: &GbtParams, rng: &Rng, par: Parallelism) -> Result<BoostedModel> {
    check_xy(x, y)?;
    params.validate()?;
    let targets = map_indexed(y.shape()[1], par, |j| fit_column(x, &y.column(j), params, &mut rng.split(j as u64)));
    Ok(BoostedModel { targets, n_features: x.shape()[1], params: params.clone() })
}
