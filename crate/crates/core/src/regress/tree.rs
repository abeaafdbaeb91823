//! Greedy binary regression trees over a pluggable split criterion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: Vec<f64> },
}

/// Flat node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub n_outputs: usize,
}

impl TreeModel {
    pub fn predict_row(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &Tensor<f64>) -> Result<Tensor<f64>> {
        check_features(x, self.n_features)?;
        let rows = x.shape()[0];
        let data = (0..rows).flat_map(|r| self.predict_row(x.row(r)).to_vec()).collect();
        Tensor::from_vec(&[rows, self.n_outputs], data)
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

pub(crate) fn check_features(x: &Tensor<f64>, cols: usize) -> Result<()> {
    if x.ndim() != 2 || x.shape()[1] != cols {
        return Err(Error::Dimension(format!("expected features [_, {cols}], got {:?}", x.shape())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per node; `None` scans all of them.
    pub feature_subsample: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 10, min_leaf: 1, feature_subsample: None }
    }
}

/// What a tree optimizes. Each row contributes a fixed-width statistic
/// vector; node quality is a function of the summed vectors.
pub(crate) trait Criterion {
    fn width(&self) -> usize;
    fn row_stats(&self, row: usize, out: &mut [f64]);
    fn gain(&self, parent: (usize, &[f64]), left: (usize, &[f64]), right: (usize, &[f64])) -> f64;
    fn leaf(&self, n: usize, sums: &[f64]) -> Vec<f64>;
    /// Magnitude against which gains count as round-off.
    fn scale(&self, n: usize, sums: &[f64]) -> f64;
}

/// Summed squared error over all target columns (CART variance reduction).
pub(crate) struct VarianceReduction<'a> {
    pub y: &'a Tensor<f64>,
}

impl VarianceReduction<'_> {
    fn sse(&self, n: usize, s: &[f64]) -> f64 {
        let k = self.y.shape()[1];
        s[k] - s[..k].iter().map(|v| v * v).sum::<f64>() / n as f64
    }
}

impl Criterion for VarianceReduction<'_> {
    fn width(&self) -> usize {
        self.y.shape()[1] + 1
    }

    fn row_stats(&self, row: usize, out: &mut [f64]) {
        let y = self.y.row(row);
        out[..y.len()].copy_from_slice(y);
        out[y.len()] = y.iter().map(|v| v * v).sum();
    }

    fn gain(&self, p: (usize, &[f64]), l: (usize, &[f64]), r: (usize, &[f64])) -> f64 {
        self.sse(p.0, p.1) - self.sse(l.0, l.1) - self.sse(r.0, r.1)
    }

    fn leaf(&self, n: usize, s: &[f64]) -> Vec<f64> {
        s[..self.y.shape()[1]].iter().map(|v| v / n as f64).collect()
    }

    fn scale(&self, _n: usize, s: &[f64]) -> f64 {
        s[self.y.shape()[1]]
    }
}

pub(crate) struct Grower<'a, C: Criterion> {
    pub x: &'a Tensor<f64>,
    pub criterion: C,
    pub params: TreeParams,
    pub min_gain: f64,
    stats: Vec<f64>,
}

const GAIN_TOLERANCE: f64 = 1e-12;

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
    n_left: usize,
}

impl<'a, C: Criterion> Grower<'a, C> {
    pub fn new(x: &'a Tensor<f64>, criterion: C, params: TreeParams, min_gain: f64) -> Self {
        let rows = x.shape()[0];
        let w = criterion.width();
        let mut stats = vec![0.0; rows * w];
        for r in 0..rows {
            criterion.row_stats(r, &mut stats[r * w..(r + 1) * w]);
        }
        Grower { x, criterion, params, min_gain, stats }
    }

    fn sums(&self, rows: &[usize]) -> Vec<f64> {
        let w = self.criterion.width();
        let mut s = vec![0.0; w];
        for &r in rows {
            for (a, b) in s.iter_mut().zip(&self.stats[r * w..(r + 1) * w]) {
                *a += b;
            }
        }
        s
    }

    /// Grows from `rows`, drawing per-node feature subsets from `rng`.
    pub fn grow(&self, rows: &[usize], n_outputs: usize, rng: &mut Rng) -> TreeModel {
        let mut nodes = Vec::new();
        let mut rows = rows.to_vec();
        self.build(&mut rows, 0, rng, &mut nodes);
        TreeModel { nodes, n_features: self.x.shape()[1], n_outputs }
    }

    fn build(&self, rows: &mut [usize], depth: usize, rng: &mut Rng, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let sums = self.sums(rows);
        let n = rows.len();
        let leaf = Node::Leaf { value: self.criterion.leaf(n, &sums) };
        nodes.push(leaf);
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        let Some(best) = self.best_split(rows, &sums, rng) else {
            return id;
        };
        let f = best.feature;
        // stable partition keeps row order reproducible
        let (mut l, mut r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&row| self.x.data()[row * self.x.shape()[1] + f] <= best.threshold);
        debug_assert_eq!(l.len(), best.n_left);
        let left = self.build(&mut l, depth + 1, rng, nodes);
        let right = self.build(&mut r, depth + 1, rng, nodes);
        nodes[id] = Node::Split { feature: f, threshold: best.threshold, left, right };
        id
    }

    fn features(&self, rng: &mut Rng) -> Vec<usize> {
        let cols = self.x.shape()[1];
        match self.params.feature_subsample {
            Some(k) if k < cols => {
                let mut f = rng.choose_distinct(cols, k.max(1));
                f.sort_unstable();
                f
            }
            _ => (0..cols).collect(),
        }
    }

    fn best_split(&self, rows: &[usize], parent: &[f64], rng: &mut Rng) -> Option<Best> {
        let n = rows.len();
        let cols = self.x.shape()[1];
        let w = self.criterion.width();
        let min_leaf = self.params.min_leaf.max(1);
        let tol = GAIN_TOLERANCE * self.criterion.scale(n, parent).abs().max(1.0);
        let mut best: Option<Best> = None;
        let mut order = rows.to_vec();
        let mut left = vec![0.0; w];
        let mut right = vec![0.0; w];
        for f in self.features(rng) {
            let xv = |r: usize| self.x.data()[r * cols + f];
            order.copy_from_slice(rows);
            order.sort_by(|&a, &b| xv(a).total_cmp(&xv(b)));
            left.fill(0.0);
            for i in 1..n {
                let r = order[i - 1];
                for (a, b) in left.iter_mut().zip(&self.stats[r * w..(r + 1) * w]) {
                    *a += b;
                }
                let (lo, hi) = (xv(order[i - 1]), xv(order[i]));
                if i < min_leaf || n - i < min_leaf || lo == hi {
                    continue;
                }
                for ((d, p), l) in right.iter_mut().zip(parent).zip(&left) {
                    *d = p - l;
                }
                let gain = self.criterion.gain((n, parent), (i, &left), (n - i, &right));
                if best.as_ref().is_none_or(|b| gain > b.gain + tol) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Best { gain, feature: f, threshold, n_left: i });
                }
            }
        }
        best.filter(|b| b.gain > self.min_gain + tol)
    }
}

/// CART regression tree on a `[rows, k]` target matrix.
pub fn fit_tree(x: &Tensor<f64>, y: &Tensor<f64>, params: &TreeParams, rng: &mut Rng) -> Result<TreeModel> {
    check_xy(x, y)?;
    let rows: Vec<usize> = (0..x.shape()[0]).collect();
    let g = Grower::new(x, VarianceReduction { y }, params.clone(), 0.0);
    Ok(g.grow(&rows, y.shape()[1], rng))
}

pub(crate) fn check_xy(x: &Tensor<f64>, y: &Tensor<f64>) -> Result<()> {
    if x.ndim() != 2 || y.ndim() != 2 {
        return Err(Error::Dimension("features and targets must be matrices".into()));
    }
    if x.shape()[0] == 0 || x.shape()[1] == 0 {
        return Err(Error::Parameter("empty feature matrix".into()));
    }
    if x.shape()[0] != y.shape()[0] {
        return Err(Error::Dimension(format!("{} feature rows vs {} target rows", x.shape()[0], y.shape()[0])));
    }
    Ok(())
}
