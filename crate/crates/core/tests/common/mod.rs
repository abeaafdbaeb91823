#![allow(dead_code)]

pub mod nifti_writer;
#[allow(clippy::needless_range_loop)]
pub mod suites;

use hearvol_core::gradcheck::{central_difference, max_relative_error};
use hearvol_core::nnops::Layer;
use hearvol_core::tensor::{uniform_sample, Rng, Tensor};

pub const FD_STEP: f64 = 1e-3;
pub const LAYER_TOL: f64 = 1e-4;
/// Denominator floor for relative errors of near-zero gradient entries.
pub const FD_FLOOR: f64 = 1e-6;

pub fn random(rng: &mut Rng, shape: &[usize]) -> Tensor<f64> {
    uniform_sample(rng, shape, -1.0, 1.0)
}

/// Random tensor with every entry at least `margin` away from zero, for
/// checks across the ReLU kink.
pub fn random_away_from_zero(rng: &mut Rng, shape: &[usize], margin: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let v = rng.uniform_range(margin, 1.0);
        if rng.coin(0.5) { v } else { -v }
    })
}

fn with_data(t: &Tensor<f64>, data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(t.shape(), data.to_vec()).unwrap()
}

fn replace_param(layer: &Layer<f64>, which: usize, data: &[f64]) -> Layer<f64> {
    let mut l = layer.clone();
    let (w, b) = l.params_mut().unwrap();
    let target = if which == 0 { w } else { b };
    target.data_mut().copy_from_slice(data);
    l
}

/// Result of checking one layer: worst relative error over input, weight and
/// bias gradients of the probe objective `<layer(x), r>`.
#[derive(Debug)]
pub struct LayerCheck {
    pub input_err: f64,
    pub param_err: f64,
}

impl LayerCheck {
    pub fn worst(&self) -> f64 {
        self.input_err.max(self.param_err)
    }
}

pub fn check_layer(layer: &Layer<f64>, x: &Tensor<f64>, rng: &mut Rng) -> LayerCheck {
    let y = layer.forward(x).unwrap();
    let r = random(rng, y.shape());
    let grads = layer.backward(x, &r).unwrap();

    let all: Vec<usize> = (0..x.len()).collect();
    let num = central_difference(
        |d| layer.forward(&with_data(x, d)).unwrap().dot(&r).unwrap(),
        x.data(),
        &all,
        FD_STEP,
    );
    let input_err = max_relative_error(grads.input.data(), &num, FD_FLOOR);

    let mut param_err: f64 = 0.0;
    if let Some((w, b)) = layer.params() {
        for (which, (p, g)) in [(w, grads.weight.unwrap()), (b, grads.bias.unwrap())]
            .into_iter()
            .enumerate()
        {
            let idx: Vec<usize> = (0..p.len()).collect();
            let num = central_difference(
                |d| replace_param(layer, which, d).forward(x).unwrap().dot(&r).unwrap(),
                p.data(),
                &idx,
                FD_STEP,
            );
            param_err = param_err.max(max_relative_error(g.data(), &num, FD_FLOOR));
        }
    }
    LayerCheck { input_err, param_err }
}
