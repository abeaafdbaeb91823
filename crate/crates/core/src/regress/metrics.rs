use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::gbt::BoostedModel;
use super::mnn::MnnModel;

fn per_column(pred: &Tensor<f64>, truth: &Tensor<f64>, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    pred.expect_same_shape(truth)?;
    if pred.ndim() != 2 || pred.shape()[0] == 0 {
        return Err(Error::Dimension(format!("expected [rows >= 1, k], got {:?}", pred.shape())));
    }
    let (rows, k) = (pred.shape()[0], pred.shape()[1]);
    let mut acc = vec![0.0; k];
    for (i, (p, t)) in pred.data().iter().zip(truth.data()).enumerate() {
        acc[i % k] += f(p - t);
    }
    Ok(acc.into_iter().map(|a| a / rows as f64).collect())
}

/// Per-column root mean squared error.
pub fn rmse(pred: &Tensor<f64>, truth: &Tensor<f64>) -> Result<Vec<f64>> {
    Ok(per_column(pred, truth, |d| d * d)?.into_iter().map(f64::sqrt).collect())
}

/// Per-column mean absolute error.
pub fn mae(pred: &Tensor<f64>, truth: &Tensor<f64>) -> Result<Vec<f64>> {
    per_column(pred, truth, f64::abs)
}

/// Elementwise unweighted mean of equally shaped prediction matrices.
pub fn average_predictions(preds: &[Tensor<f64>]) -> Result<Tensor<f64>> {
    let first = preds.first().ok_or_else(|| Error::Parameter("nothing to average".into()))?;
    let mut out = Tensor::zeros(first.shape());
    for p in preds {
        out.axpy(1.0, p)?;
    }
    Ok(out.scale(1.0 / preds.len() as f64))
}

/// The MLP + boosted-trees ensemble.
pub fn predict_ensemble(mnn: &MnnModel, gbt: &BoostedModel, x: &Tensor<f64>) -> Result<Tensor<f64>> {
    average_predictions(&[mnn.predict(x)?, gbt.predict(x)?])
}

/// Predicts the training-set column means for every test row.
pub fn mean_baseline(train_targets: &Tensor<f64>, test_rows: usize) -> Result<Tensor<f64>> {
    if train_targets.ndim() != 2 || train_targets.shape()[0] == 0 {
        return Err(Error::Dimension("baseline needs a non-empty target matrix".into()));
    }
    let k = train_targets.shape()[1];
    let n = train_targets.shape()[0] as f64;
    let means: Vec<f64> = (0..k).map(|j| train_targets.column(j).iter().sum::<f64>() / n).collect();
    Tensor::from_vec(&[test_rows, k], (0..test_rows).flat_map(|_| means.clone()).collect())
}
