use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    pred.expect_same_shape(target)?;
    let n = T::from_f64(pred.len() as f64);
    let diff = pred.sub(target)?;
    let loss = diff.data().iter().fold(T::zero(), |acc, &d| acc + d * d) / n;
    let two = T::from_f64(2.0);
    Ok((loss, diff.map(|d| two * d / n)))
}

/// KL divergence of `N(mu, exp(logvar))` from the standard normal prior.
#[derive(Debug, Clone)]
pub struct KlTerms<T: Scalar> {
    pub loss: T,
    pub grad_mu: Tensor<T>,
    pub grad_logvar: Tensor<T>,
}

/// `-½ Σ (1 + logvar - mu² - exp(logvar))`, summed over latent dims and
/// averaged over the batch axis. A 1D input is a batch of one; a 2D input
/// is `[batch, latent]`.
pub fn kl_divergence<T: Scalar>(mu: &Tensor<T>, logvar: &Tensor<T>) -> Result<KlTerms<T>> {
    mu.expect_same_shape(logvar)?;
    let batch = match mu.shape() {
        [_] => 1,
        [b, _] => *b,
        s => return Err(Error::Dimension(format!("kl expects 1D or 2D, got {s:?}"))),
    };
    let b = T::from_f64(batch as f64);
    let half = T::from_f64(0.5);
    let mut total = T::zero();
    for (&m, &lv) in mu.data().iter().zip(logvar.data()) {
        total = total + (T::one() + lv - m * m - lv.exp());
    }
    Ok(KlTerms {
        loss: -half * total / b,
        grad_mu: mu.map(|m| m / b),
        grad_logvar: logvar.map(|lv| half * (lv.exp() - T::one()) / b),
    })
}
