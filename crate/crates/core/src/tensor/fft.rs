//! Separable radix-2 FFT over 3D volumes.
//!
//! Forward uses the `e^{-2πi kn/N}` kernel with no scaling; the inverse
//! scales every axis by `1/N_axis`, so the round trip is the identity.

use std::f64::consts::PI;

use super::Tensor;
use crate::error::{Error, Result};

/// Complex-valued 3D field, stored as separate real and imaginary planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVolume {
    pub re: Tensor<f64>,
    pub im: Tensor<f64>,
}

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

impl ComplexVolume {
    pub fn new(re: Tensor<f64>, im: Tensor<f64>) -> Result<Self> {
        if re.ndim() != 3 {
            return Err(Error::Dimension(format!("expected 3D volume, got {:?}", re.shape())));
        }
        re.expect_same_shape(&im)?;
        Ok(ComplexVolume { re, im })
    }

    pub fn from_real(re: Tensor<f64>) -> Result<Self> {
        let im = Tensor::zeros(re.shape());
        Self::new(re, im)
    }

    pub fn shape(&self) -> [usize; 3] {
        let s = self.re.shape();
        [s[0], s[1], s[2]]
    }

    pub fn magnitude_sq(&self, offset: usize) -> f64 {
        let (r, i) = (self.re.data()[offset], self.im.data()[offset]);
        r * r + i * i
    }
}

struct Plan {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    rev: Vec<usize>,
}

impl Plan {
    fn new(n: usize) -> Self {
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if n == 1 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let half = n / 2;
        let cos = (0..half).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
        let sin = (0..half).map(|k| (2.0 * PI * k as f64 / n as f64).sin()).collect();
        Plan { n, cos, sin, rev }
    }

    /// In-place iterative Cooley-Tukey on one line.
    fn run(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.rev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let (wr, wi) = (self.cos[k * step], sign * self.sin[k * step]);
                    let (a, b) = (start + k, start + k + half);
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len <<= 1;
        }
        if inverse {
            let s = 1.0 / n as f64;
            re.iter_mut().for_each(|x| *x *= s);
            im.iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// Forward (or inverse) 3D DFT. Every extent must be a power of two.
pub fn fft3(v: &ComplexVolume, inverse: bool) -> Result<ComplexVolume> {
    let shape = v.shape();
    if let Some(&bad) = shape.iter().find(|&&e| !is_power_of_two(e)) {
        return Err(Error::UnsupportedSize(format!(
            "fft3 needs power-of-two extents, got {bad} in {shape:?}"
        )));
    }
    let mut out = v.clone();
    let strides = [shape[1] * shape[2], shape[2], 1];
    for axis in 0..3 {
        let n = shape[axis];
        if n == 1 {
            continue;
        }
        let plan = Plan::new(n);
        let (o1, o2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut lre = vec![0.0; n];
        let mut lim = vec![0.0; n];
        for a in 0..shape[o1] {
            for b in 0..shape[o2] {
                let base = a * strides[o1] + b * strides[o2];
                let st = strides[axis];
                {
                    let (r, i) = (out.re.data(), out.im.data());
                    for k in 0..n {
                        lre[k] = r[base + k * st];
                        lim[k] = i[base + k * st];
                    }
                }
                plan.run(&mut lre, &mut lim, inverse);
                let r = out.re.data_mut();
                for k in 0..n {
                    r[base + k * st] = lre[k];
                }
                let i = out.im.data_mut();
                for k in 0..n {
                    i[base + k * st] = lim[k];
                }
            }
        }
    }
    Ok(out)
}
