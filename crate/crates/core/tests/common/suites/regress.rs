use hearvol_core::par::Parallelism;
use hearvol_core::regress::*;
use hearvol_core::tensor::{uniform_sample, Rng, Tensor};

/// Exact-arithmetic exhaustive CART split search for integer-valued data.
pub mod oracle {
    use super::*;

    /// Gain as a fraction `num / den` (Σy² terms cancel).
    #[derive(Clone, Copy)]
    struct Frac {
        num: i128,
        den: i128,
    }

    impl Frac {
        fn gt(self, o: Frac) -> bool {
            self.num * o.den > o.num * self.den
        }
    }

    fn sums(y: &[Vec<i64>], rows: &[usize]) -> Vec<i128> {
        let k = y[0].len();
        (0..k).map(|j| rows.iter().map(|&r| y[r][j] as i128).sum()).collect()
    }

    fn gain(y: &[Vec<i64>], p: &[usize], l: &[usize], r: &[usize]) -> Frac {
        let (np, nl, nr) = (p.len() as i128, l.len() as i128, r.len() as i128);
        let (sp, sl, sr) = (sums(y, p), sums(y, l), sums(y, r));
        let num = (0..sp.len())
            .map(|j| sl[j] * sl[j] * nr * np + sr[j] * sr[j] * nl * np - sp[j] * sp[j] * nl * nr)
            .sum();
        Frac { num, den: np * nl * nr }
    }

    pub fn tree(x: &[Vec<i64>], y: &[Vec<i64>], max_depth: usize, min_leaf: usize) -> Vec<Node> {
        let mut nodes = Vec::new();
        build(x, y, &(0..x.len()).collect::<Vec<_>>(), 0, max_depth, min_leaf, &mut nodes);
        nodes
    }

    fn build(x: &[Vec<i64>], y: &[Vec<i64>], rows: &[usize], depth: usize, max_depth: usize, min_leaf: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let n = rows.len();
        let s = sums(y, rows);
        nodes.push(Node::Leaf { value: s.iter().map(|&v| v as f64 / n as f64).collect() });
        if depth >= max_depth || n < 2 * min_leaf {
            return id;
        }
        let mut best: Option<(Frac, usize, i64, i64)> = None;
        for f in 0..x[0].len() {
            let mut vals: Vec<i64> = rows.iter().map(|&r| x[r][f]).collect();
            vals.sort();
            vals.dedup();
            for w in vals.windows(2) {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| x[row][f] <= w[0]);
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let g = gain(y, rows, &l, &r);
                if best.is_none_or(|b| g.gt(b.0)) {
                    best = Some((g, f, w[0], w[1]));
                }
            }
        }
        match best {
            Some((g, f, lo, hi)) if g.num > 0 => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| x[row][f] <= lo);
                let left = build(x, y, &l, depth + 1, max_depth, min_leaf, nodes);
                let right = build(x, y, &r, depth + 1, max_depth, min_leaf, nodes);
                nodes[id] = Node::Split { feature: f, threshold: 0.5 * (lo + hi) as f64, left, right };
                id
            }
            _ => id,
        }
    }
}

fn to_tensor(m: &[Vec<i64>]) -> Tensor<f64> {
    Tensor::from_rows(&m.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect::<Vec<_>>()).unwrap()
}

fn random_case(rng: &mut Rng) -> (Vec<Vec<i64>>, Vec<Vec<i64>>, usize, usize) {
    let rows = 1 + rng.below(12);
    let cols = 1 + rng.below(3);
    // few distinct values, so equal-gain ties are common
    let x = (0..rows).map(|_| (0..cols).map(|_| rng.below(5) as i64).collect()).collect();
    let y = (0..rows).map(|_| (0..2).map(|_| rng.below(11) as i64).collect()).collect();
    (x, y, rng.below(5), 1 + rng.below(3))
}

pub fn check_against_oracle(x: &[Vec<i64>], y: &[Vec<i64>], max_depth: usize, min_leaf: usize) -> Result<(), String> {
    let params = TreeParams { max_depth, min_leaf, feature_subsample: None };
    let got = fit_tree(&to_tensor(x), &to_tensor(y), &params, &mut Rng::new(0)).unwrap();
    let want = oracle::tree(x, y, max_depth, min_leaf);
    if got.nodes == want {
        Ok(())
    } else {
        Err(format!("x {x:?} y {y:?} depth {max_depth} min_leaf {min_leaf}\n got {:?}\nwant {want:?}", got.nodes))
    }
}

pub fn tree_matches_exhaustive_search_on_50_datasets() {
    let mut rng = Rng::new(2024);
    for _ in 0..50 {
        let (x, y, d, m) = random_case(&mut rng);
        check_against_oracle(&x, &y, d, m).unwrap();
    }
}


pub fn positive_feature_scaling_keeps_structure() {
    let mut rng = Rng::new(3);
    let x: Tensor<f64> = uniform_sample(&mut rng, &[40, 3], 0.0, 1.0);
    let y: Tensor<f64> = uniform_sample(&mut rng, &[40, 2], 0.0, 50.0);
    let p = TreeParams { max_depth: 5, min_leaf: 2, feature_subsample: None };
    let a = fit_tree(&x, &y, &p, &mut Rng::new(1)).unwrap();
    let xs = x.scale(7.5);
    let b = fit_tree(&xs, &y, &p, &mut Rng::new(1)).unwrap();
    assert_eq!(a.nodes.len(), b.nodes.len());
    for (na, nb) in a.nodes.iter().zip(&b.nodes) {
        match (na, nb) {
            (Node::Leaf { value: va }, Node::Leaf { value: vb }) => assert_eq!(va, vb),
            (
                Node::Split { feature: fa, threshold: ta, left: la, right: ra },
                Node::Split { feature: fb, threshold: tb, left: lb, right: rb },
            ) => {
                assert_eq!((fa, la, ra), (fb, lb, rb));
                assert!((ta * 7.5 - tb).abs() < 1e-9);
            }
            _ => panic!("structure differs"),
        }
    }
    assert_eq!(a.predict(&x).unwrap(), b.predict(&xs).unwrap());
}

pub fn gbt_hand_example() {
    assert!((second_order_gain(5.0, 1.0, -5.0, 1.0, 0.0) - 25.0).abs() < 1e-9);
    let x = Tensor::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
    let y = Tensor::from_rows(&[vec![0.0, 0.0], vec![10.0, 10.0]]).unwrap();
    let p = GbtParams { rounds: 1, shrinkage: 1.0, max_depth: 1, lambda: 0.0, ..Default::default() };
    let m = fit_gbt(&x, &y, &p, &Rng::new(0), Parallelism::Serial).unwrap();
    assert_eq!(m.base_score(), vec![5.0, 5.0]);
    let tree = &m.targets[0].trees[0];
    assert_eq!(
        tree.nodes,
        vec![
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 },
            Node::Leaf { value: vec![-5.0] },
            Node::Leaf { value: vec![5.0] },
        ]
    );
    let pred = m.predict(&x).unwrap();
    for (a, b) in pred.data().iter().zip(y.data()) {
        assert!((a - b).abs() < 1e-9);
    }
}

pub fn gbt_zero_rounds_predicts_mean() {
    let mut rng = Rng::new(4);
    let x: Tensor<f64> = uniform_sample(&mut rng, &[10, 2], 0.0, 1.0);
    let y: Tensor<f64> = uniform_sample(&mut rng, &[10, 2], 0.0, 1.0);
    let m = fit_gbt(&x, &y, &GbtParams { rounds: 0, ..Default::default() }, &Rng::new(0), Parallelism::Serial).unwrap();
    let means = mean_baseline(&y, 10).unwrap();
    assert_eq!(m.predict(&x).unwrap(), means);
}

pub fn gbt_training_rmse_never_increases() {
    let mut rng = Rng::new(5);
    let x: Tensor<f64> = uniform_sample(&mut rng, &[80, 4], -1.0, 1.0);
    let y = Tensor::from_fn(&[80, 2], |i| {
        let r = x.row(i / 2);
        (r[0] * 3.0).sin() * 10.0 + r[1] * r[2] * 5.0 + (i % 2) as f64 * 7.0
    });
    for lambda in [0.0, 1.0, 10.0] {
        let p = GbtParams { rounds: 50, lambda, ..Default::default() };
        let m = fit_gbt(&x, &y, &p, &Rng::new(0), Parallelism::Serial).unwrap();
        let mut prev = rmse(&m.predict_rounds(&x, 0).unwrap(), &y).unwrap();
        for k in 1..=50 {
            let cur = rmse(&m.predict_rounds(&x, k).unwrap(), &y).unwrap();
            for j in 0..2 {
                assert!(cur[j] <= prev[j] + 1e-12, "lambda {lambda} round {k}: {cur:?} > {prev:?}");
            }
            prev = cur;
        }
    }
}

pub fn gbt_unregularized_fits_exactly() {
    let mut rng = Rng::new(6);
    let x: Tensor<f64> = uniform_sample(&mut rng, &[30, 3], 0.0, 1.0);
    let y: Tensor<f64> = uniform_sample(&mut rng, &[30, 2], -10.0, 100.0);
    let p = GbtParams { rounds: 1, shrinkage: 1.0, max_depth: usize::MAX, lambda: 0.0, ..Default::default() };
    let m = fit_gbt(&x, &y, &p, &Rng::new(0), Parallelism::Serial).unwrap();
    let err = rmse(&m.predict(&x).unwrap(), &y).unwrap();
    assert!(err.iter().all(|&e| e < 1e-9), "{err:?}");
}

fn regression_data(n: usize, seed: u64) -> (Tensor<f64>, Tensor<f64>) {
    let mut rng = Rng::new(seed);
    let x: Tensor<f64> = uniform_sample(&mut rng, &[n, 6], 0.0, 1.0);
    let y = Tensor::from_fn(&[n, 2], |i| {
        let r = x.row(i / 2);
        if i % 2 == 0 { 15.0 + 35.0 * r[0] } else { 25.0 + 60.0 * r[0] * r[1] }
    });
    (x, y)
}

pub fn single_unbagged_tree_forest_equals_fit_tree() {
    let (x, y) = regression_data(50, 7);
    let fp = ForestParams { n_trees: 1, bootstrap: false, max_depth: 6, min_leaf: 2, feature_subsample: None };
    let rng = Rng::new(11);
    let forest = fit_forest(&x, &y, &fp, &rng, Parallelism::Serial).unwrap();
    let tp = TreeParams { max_depth: 6, min_leaf: 2, feature_subsample: Some(2) };
    let tree = fit_tree(&x, &y, &tp, &mut rng.split(0)).unwrap();
    assert_eq!(forest.predict(&x).unwrap(), tree.predict(&x).unwrap());
}

pub fn forest_is_order_and_parallelism_invariant() {
    let (x, y) = regression_data(60, 8);
    let fp = ForestParams { n_trees: 20, ..Default::default() };
    let a = fit_forest(&x, &y, &fp, &Rng::new(1), Parallelism::Serial).unwrap();
    let b = fit_forest(&x, &y, &fp, &Rng::new(1), Parallelism::Parallel).unwrap();
    assert_eq!(a, b);
    let rev: Vec<usize> = (0..20).rev().collect();
    let (p, q) = (a.predict(&x).unwrap(), a.predict_in_order(&x, &rev).unwrap());
    for (u, v) in p.data().iter().zip(q.data()) {
        assert!((u - v).abs() < 1e-9);
    }
    assert!(a.trees.iter().all(|t| t.depth() <= 10));
}

pub fn fitted_models_generalize_and_serialize() {
    let (x, y) = regression_data(240, 9);
    let (xt, yt) = regression_data(60, 10);
    let base = rmse(&mean_baseline(&y, 60).unwrap(), &yt).unwrap();
    let forest = fit_forest(&x, &y, &ForestParams { n_trees: 30, ..Default::default() }, &Rng::new(1), Parallelism::Parallel).unwrap();
    let gbt = fit_gbt(&x, &y, &GbtParams::default(), &Rng::new(2), Parallelism::Parallel).unwrap();
    let (mnn, _) = fit_mnn(&x, &y, &MnnConfig { epochs: 100, ..Default::default() }, &Rng::new(3), Parallelism::Parallel).unwrap();
    let ens = predict_ensemble(&mnn, &gbt, &xt).unwrap();
    let scores = [
        rmse(&forest.predict(&xt).unwrap(), &yt).unwrap(),
        rmse(&gbt.predict(&xt).unwrap(), &yt).unwrap(),
        rmse(&mnn.predict(&xt).unwrap(), &yt).unwrap(),
        rmse(&ens, &yt).unwrap(),
    ];
    for s in &scores {
        assert!(s[0] < 0.5 * base[0] && s[1] < 0.5 * base[1], "{s:?} vs baseline {base:?}");
    }
    for j in 0..2 {
        assert!(scores[3][j] <= scores[1][j].max(scores[2][j]) + 1e-12);
    }

    let f2: ForestModel = serde_json::from_str(&serde_json::to_string(&forest).unwrap()).unwrap();
    assert_eq!(f2.predict(&xt).unwrap(), forest.predict(&xt).unwrap());
    let g2: BoostedModel = serde_json::from_str(&serde_json::to_string(&gbt).unwrap()).unwrap();
    assert_eq!(g2.predict(&xt).unwrap(), gbt.predict(&xt).unwrap());
}
