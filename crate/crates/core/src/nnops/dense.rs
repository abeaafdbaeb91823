use crate::error::{Error, Result};
use crate::tensor::{uniform_sample, Rng, Scalar, Tensor};

use super::conv::LayerGrads;

/// Fully connected layer `y = W·x + b`, weights `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        match (weight.shape(), bias.shape()) {
            (&[out, _], &[b]) if b == out => Ok(Dense { weight, bias }),
            (w, b) => Err(Error::Shape(format!("dense weight {w:?} with bias {b:?}"))),
        }
    }

    pub fn init(rng: &mut Rng, inputs: usize, outputs: usize) -> Self {
        let s = (6.0 / (inputs + outputs) as f64).sqrt();
        Dense {
            weight: uniform_sample(rng, &[outputs, inputs], -s, s),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    fn check(&self, x: &Tensor<T>) -> Result<()> {
        if x.ndim() != 1 || x.len() != self.inputs() {
            return Err(Error::Dimension(format!(
                "dense expects [{}], got {:?}",
                self.inputs(),
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(x)?;
        let n = self.inputs();
        let xs = x.data();
        let y: Vec<T> = self
            .weight
            .data()
            .chunks(n)
            .zip(self.bias.data())
            .map(|(row, &b)| row.iter().zip(xs).fold(b, |acc, (&w, &v)| acc + w * v))
            .collect();
        Ok(Tensor::vector(&y))
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<LayerGrads<T>> {
        self.check(x)?;
        if grad_out.shape() != [self.outputs()] {
            return Err(Error::Dimension(format!(
                "dense grad_out {:?}, expected [{}]",
                grad_out.shape(),
                self.outputs()
            )));
        }
        let n = self.inputs();
        let mut gin = vec![T::zero(); n];
        let mut gw = Vec::with_capacity(self.weight.len());
        for (row, &g) in self.weight.data().chunks(n).zip(grad_out.data()) {
            for (gi, &w) in gin.iter_mut().zip(row) {
                *gi = *gi + w * g;
            }
            gw.extend(x.data().iter().map(|&v| g * v));
        }
        Ok(LayerGrads {
            input: Tensor::vector(&gin),
            weight: Some(Tensor::from_vec(self.weight.shape(), gw)?),
            bias: Some(grad_out.clone()),
        })
    }
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

/// Subgradient at exactly 0 is taken as 0.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    x.zip_map(grad_out, |v, g| if v > T::zero() { g } else { T::zero() })
}

pub fn sigmoid<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

#[inline]
fn sigmoid_scalar<T: Scalar>(v: T) -> T {
    // split by sign so exp never overflows
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    x.zip_map(grad_out, |v, g| {
        let s = sigmoid_scalar(v);
        g * s * (T::one() - s)
    })
}
