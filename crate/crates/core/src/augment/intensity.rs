use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};
use crate::volio::Volume;

fn clamp_unit(t: &Tensor<f32>) -> Tensor<f32> {
    t.map(|x| x.clamp(0.0, 1.0))
}

/// Adds i.i.d. `N(0, sigma²)` noise per voxel, then clamps to `[0, 1]`.
pub fn add_noise(v: &Volume, rng: &mut Rng, sigma: f64) -> Result<Volume> {
    if !(sigma >= 0.0) {
        return Err(Error::Parameter(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    let data: Vec<f32> = v
        .data()
        .data()
        .iter()
        .map(|&x| ((x as f64 + sigma * rng.normal()) as f32).clamp(0.0, 1.0))
        .collect();
    v.with_data(Tensor::from_vec(&v.shape(), data)?)
}

/// `v^gamma` per voxel.
pub fn adjust_gamma(v: &Volume, gamma: f64) -> Result<Volume> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Parameter(format!("gamma must be > 0, got {gamma}")));
    }
    if gamma == 1.0 {
        return Ok(v.clone());
    }
    let g = gamma as f32;
    v.with_data(v.data().map(|x| x.clamp(0.0, 1.0).powf(g)))
}

/// Normalized sampled Gaussian of radius `ceil(3·sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|x| x / s).collect()
}

/// Mirror index without repeating the edge sample (`d c b | a b c d | c b a`).
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

fn convolve_axis(data: &[f32], shape: [usize; 3], axis: usize, kernel: &[f64]) -> Vec<f32> {
    let r = (kernel.len() / 2) as i64;
    let strides = [shape[1] * shape[2], shape[2], 1];
    let n = shape[axis];
    let st = strides[axis];
    let mut out = vec![0f32; data.len()];
    let mut line = vec![0f64; n];
    let (o1, o2) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for a in 0..shape[o1] {
        for b in 0..shape[o2] {
            let base = a * strides[o1] + b * strides[o2];
            for (k, l) in line.iter_mut().enumerate() {
                *l = data[base + k * st] as f64;
            }
            for i in 0..n {
                let mut acc = 0.0;
                for (j, &w) in kernel.iter().enumerate() {
                    acc += w * line[reflect(i as i64 + j as i64 - r, n)];
                }
                out[base + i * st] = acc as f32;
            }
        }
    }
    out
}

/// Separable Gaussian blur with reflect padding.
pub fn gaussian_blur(v: &Volume, sigma: f64) -> Result<Volume> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("blur sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(v.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let shape = v.shape();
    let mut data = v.data().data().to_vec();
    for axis in 0..3 {
        data = convolve_axis(&data, shape, axis, &kernel);
    }
    v.with_data(Tensor::from_vec(&shape, data)?)
}

/// Exponents `[ez, ey, ex]` of every monomial with total degree `<= order`,
/// in coefficient draw order.
pub fn polynomial_terms(order: u32) -> Vec<[u32; 3]> {
    let mut terms = Vec::new();
    for i in 0..=order {
        for j in 0..=order - i {
            for k in 0..=order - i - j {
                terms.push([i, j, k]);
            }
        }
    }
    terms
}

/// Multiplicative field `exp(P(z, y, x))` on coordinates normalized to `[-1, 1]`.
pub fn bias_field(shape: [usize; 3], order: u32, coeffs: &[f64]) -> Result<Tensor<f32>> {
    let terms = polynomial_terms(order);
    if coeffs.len() != terms.len() {
        return Err(Error::Parameter(format!(
            "order {order} needs {} coefficients, got {}",
            terms.len(),
            coeffs.len()
        )));
    }
    let norm = |i: usize, n: usize| if n > 1 { 2.0 * i as f64 / (n - 1) as f64 - 1.0 } else { 0.0 };
    let [d, h, w] = shape;
    Ok(Tensor::from_fn(&[d, h, w], |idx| {
        let c = [norm(idx / (h * w), d), norm((idx / w) % h, h), norm(idx % w, w)];
        let p: f64 = terms
            .iter()
            .zip(coeffs)
            .map(|(e, &a)| a * c[0].powi(e[0] as i32) * c[1].powi(e[1] as i32) * c[2].powi(e[2] as i32))
            .sum();
        p.exp() as f32
    }))
}

/// Multiplies by a random smooth bias field and clamps to `[0, 1]`.
pub fn apply_bias_field(v: &Volume, rng: &mut Rng, order: u32, coeff_range: (f64, f64)) -> Result<Volume> {
    let coeffs: Vec<f64> = polynomial_terms(order)
        .iter()
        .map(|_| rng.uniform_range(coeff_range.0, coeff_range.1))
        .collect();
    apply_bias_coefficients(v, order, &coeffs)
}

pub fn apply_bias_coefficients(v: &Volume, order: u32, coeffs: &[f64]) -> Result<Volume> {
    if coeffs.iter().all(|&c| c == 0.0) {
        return Ok(v.clone());
    }
    let field = bias_field(v.shape(), order, coeffs)?;
    v.with_data(clamp_unit(&v.data().zip_map(&field, |a, b| a * b)?))
}
