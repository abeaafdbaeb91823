//! 3D convolution and its adjoint, with hand-derived backward passes.
//!
//! Both layers share one geometry: a "wide" grid (the conv input, or the
//! transposed-conv output) and a "narrow" grid related by
//! `narrow = (wide + 2·pad - k) / stride + 1`. Weights are always laid out
//! `[narrow_ch, wide_ch, kD, kH, kW]`, which is `[out, in, ...]` for conv3d
//! and `[in, out, ...]` for the transposed layer. With shared weights the
//! transposed forward map is exactly the adjoint of the conv forward map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{uniform_sample, Rng, Scalar, Tensor};

/// Zero-fill padding policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Valid,
    /// Symmetric `(k-1)/2` fill, shape-preserving at stride 1.
    Same,
    Explicit(usize),
}

impl Padding {
    pub fn resolve(self, kernel: usize) -> usize {
        match self {
            Padding::Valid => 0,
            Padding::Same => (kernel - 1) / 2,
            Padding::Explicit(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    wide_ch: usize,
    narrow_ch: usize,
    wide: [usize; 3],
    narrow: [usize; 3],
    k: [usize; 3],
    stride: usize,
    pad: usize,
}

/// Output indices `o` with `0 <= o*s + tap - pad < wide`.
#[inline]
fn valid_range(tap: usize, s: usize, pad: usize, wide: usize, narrow: usize) -> (usize, usize) {
    let lo = if pad > tap { (pad - tap).div_ceil(s) } else { 0 };
    // largest o with o*s + tap - pad <= wide - 1
    let top = wide + pad;
    let hi = if top > tap { ((top - tap - 1) / s + 1).min(narrow) } else { 0 };
    (lo, hi.max(lo))
}

impl Geometry {
    fn narrow_len(&self) -> usize {
        self.narrow.iter().product()
    }

    fn wide_len(&self) -> usize {
        self.wide.iter().product()
    }

    /// Calls `f(weight_index, narrow_row_offset, wide_row_offset_at_o_lo, lo, hi)` for every
    /// kernel tap and every (z, y) row pair that overlaps the wide grid. Along x, narrow
    /// element `o` pairs with wide element `wide_row + (o - lo) * stride`.
    #[inline]
    #[allow(clippy::needless_range_loop)]
    fn for_each_row(&self, mut f: impl FnMut(usize, usize, usize, usize, usize)) {
        let [kd, kh, kw] = self.k;
        let [wd, wh, ww] = self.wide;
        let [nd, nh, nw] = self.narrow;
        let (s, p) = (self.stride, self.pad);
        let wide_plane = wh * ww;
        let narrow_plane = nh * nw;
        let xr: Vec<(usize, usize)> = (0..kw).map(|tx| valid_range(tx, s, p, ww, nw)).collect();
        for o in 0..self.narrow_ch {
            for c in 0..self.wide_ch {
                let wbase = (o * self.wide_ch + c) * kd * kh * kw;
                let nbase = o * nd * narrow_plane;
                let cbase = c * wd * wide_plane;
                for tz in 0..kd {
                    let (zlo, zhi) = valid_range(tz, s, p, wd, nd);
                    for ty in 0..kh {
                        let (ylo, yhi) = valid_range(ty, s, p, wh, nh);
                        for tx in 0..kw {
                            let (xlo, xhi) = xr[tx];
                            if xlo >= xhi {
                                continue;
                            }
                            let widx = wbase + (tz * kh + ty) * kw + tx;
                            let ix0 = xlo * s + tx - p;
                            for oz in zlo..zhi {
                                let iz = oz * s + tz - p;
                                for oy in ylo..yhi {
                                    let iy = oy * s + ty - p;
                                    let nrow = nbase + oz * narrow_plane + oy * nw + xlo;
                                    let wrow = cbase + iz * wide_plane + iy * ww + ix0;
                                    f(widx, nrow, wrow, xlo, xhi);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// `narrow[o] += Σ w · wide[c]`
    fn correlate<T: Scalar>(&self, wide: &[T], w: &[T], narrow: &mut [T]) {
        let s = self.stride;
        self.for_each_row(|widx, nrow, wrow, lo, hi| {
            let wv = w[widx];
            let n = hi - lo;
            let dst = &mut narrow[nrow..nrow + n];
            if s == 1 {
                for (d, &x) in dst.iter_mut().zip(&wide[wrow..wrow + n]) {
                    *d = *d + wv * x;
                }
            } else {
                for (j, d) in dst.iter_mut().enumerate() {
                    *d = *d + wv * wide[wrow + j * s];
                }
            }
        });
    }

    /// `wide[c] += Σ w · narrow[o]`
    fn scatter<T: Scalar>(&self, narrow: &[T], w: &[T], wide: &mut [T]) {
        let s = self.stride;
        self.for_each_row(|widx, nrow, wrow, lo, hi| {
            let wv = w[widx];
            let n = hi - lo;
            let src = &narrow[nrow..nrow + n];
            if s == 1 {
                for (d, &g) in wide[wrow..wrow + n].iter_mut().zip(src) {
                    *d = *d + wv * g;
                }
            } else {
                for (j, &g) in src.iter().enumerate() {
                    let d = &mut wide[wrow + j * s];
                    *d = *d + wv * g;
                }
            }
        });
    }

    /// `gw[o, c, tap] += Σ narrow[o] · wide[c]`
    fn weight_grad<T: Scalar>(&self, narrow: &[T], wide: &[T], gw: &mut [T]) {
        let s = self.stride;
        self.for_each_row(|widx, nrow, wrow, lo, hi| {
            let n = hi - lo;
            let a = &narrow[nrow..nrow + n];
            let mut acc = T::zero();
            if s == 1 {
                for (&g, &x) in a.iter().zip(&wide[wrow..wrow + n]) {
                    acc = acc + g * x;
                }
            } else {
                for (j, &g) in a.iter().enumerate() {
                    acc = acc + g * wide[wrow + j * s];
                }
            }
            gw[widx] = gw[widx] + acc;
        });
    }
}

fn kernel_dims<T: Scalar>(weight: &Tensor<T>) -> Result<(usize, usize, [usize; 3])> {
    match weight.shape() {
        &[a, b, kd, kh, kw] => Ok((a, b, [kd, kh, kw])),
        s => Err(Error::Shape(format!("conv weight must be 5D, got {s:?}"))),
    }
}

fn glorot_uniform<T: Scalar>(rng: &mut Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform_sample(rng, shape, -s, s)
}

/// Gradients produced by one layer's backward pass.
#[derive(Debug, Clone)]
pub struct LayerGrads<T: Scalar> {
    pub input: Tensor<T>,
    pub weight: Option<Tensor<T>>,
    pub bias: Option<Tensor<T>>,
}

/// Cross-correlation with weights `[out_ch, in_ch, kD, kH, kW]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3d<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> Conv3d<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>, stride: usize, padding: usize) -> Result<Self> {
        let (out_ch, _, _) = kernel_dims(&weight)?;
        if bias.shape() != [out_ch] {
            return Err(Error::Shape(format!(
                "bias {:?} does not match {out_ch} output channels",
                bias.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::Parameter("stride must be >= 1".into()));
        }
        Ok(Conv3d { weight, bias, stride, padding })
    }

    pub fn init(
        rng: &mut Rng,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    ) -> Self {
        let k3 = kernel.pow(3);
        Conv3d {
            weight: glorot_uniform(rng, &[out_ch, in_ch, kernel, kernel, kernel], in_ch * k3, out_ch * k3),
            bias: Tensor::zeros(&[out_ch]),
            stride,
            padding: padding.resolve(kernel),
        }
    }

    fn geometry(&self, input: &[usize]) -> Result<Geometry> {
        let (out_ch, in_ch, k) = kernel_dims(&self.weight)?;
        let &[c, d, h, w] = input else {
            return Err(Error::Shape(format!("conv3d expects [C, D, H, W], got {input:?}")));
        };
        if c != in_ch {
            return Err(Error::Shape(format!("conv3d expects {in_ch} channels, got {c}")));
        }
        let wide = [d, h, w];
        let mut narrow = [0; 3];
        for a in 0..3 {
            let padded = wide[a] + 2 * self.padding;
            if k[a] > padded {
                return Err(Error::Shape(format!(
                    "kernel {:?} larger than padded input {wide:?} (pad {})",
                    k, self.padding
                )));
            }
            narrow[a] = (padded - k[a]) / self.stride + 1;
        }
        Ok(Geometry {
            wide_ch: in_ch,
            narrow_ch: out_ch,
            wide,
            narrow,
            k,
            stride: self.stride,
            pad: self.padding,
        })
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let g = self.geometry(input)?;
        Ok(vec![g.narrow_ch, g.narrow[0], g.narrow[1], g.narrow[2]])
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.geometry(x.shape())?;
        let plane = g.narrow_len();
        let mut out = vec![T::zero(); g.narrow_ch * plane];
        for (o, chunk) in out.chunks_mut(plane).enumerate() {
            chunk.fill(self.bias.data()[o]);
        }
        g.correlate(x.data(), self.weight.data(), &mut out);
        Tensor::from_vec(&[g.narrow_ch, g.narrow[0], g.narrow[1], g.narrow[2]], out)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<LayerGrads<T>> {
        let g = self.geometry(x.shape())?;
        let expect = [g.narrow_ch, g.narrow[0], g.narrow[1], g.narrow[2]];
        if grad_out.shape() != expect {
            return Err(Error::Shape(format!(
                "conv3d grad_out {:?}, expected {expect:?}",
                grad_out.shape()
            )));
        }
        let mut gin = vec![T::zero(); x.len()];
        g.scatter(grad_out.data(), self.weight.data(), &mut gin);
        let mut gw = vec![T::zero(); self.weight.len()];
        g.weight_grad(grad_out.data(), x.data(), &mut gw);
        let plane = g.narrow_len();
        let gb: Vec<T> = grad_out.data().chunks(plane).map(|c| c.iter().copied().sum()).collect();
        Ok(LayerGrads {
            input: Tensor::from_vec(x.shape(), gin)?,
            weight: Some(Tensor::from_vec(self.weight.shape(), gw)?),
            bias: Some(Tensor::vector(&gb)),
        })
    }
}

/// Transposed (fractionally strided) convolution, weights `[in_ch, out_ch, kD, kH, kW]`.
///
/// Output extent per axis is `(in - 1)·stride - 2·padding + k + output_padding`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose3d<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
    pub output_padding: usize,
}

impl<T: Scalar> ConvTranspose3d<T> {
    pub fn new(
        weight: Tensor<T>,
        bias: Tensor<T>,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Result<Self> {
        let (_, out_ch, _) = kernel_dims(&weight)?;
        if bias.shape() != [out_ch] {
            return Err(Error::Shape(format!(
                "bias {:?} does not match {out_ch} output channels",
                bias.shape()
            )));
        }
        if stride == 0 || output_padding >= stride {
            return Err(Error::Parameter(format!(
                "need stride >= 1 and output_padding < stride (stride {stride}, output_padding {output_padding})"
            )));
        }
        Ok(ConvTranspose3d { weight, bias, stride, padding, output_padding })
    }

    pub fn init(
        rng: &mut Rng,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
    ) -> Self {
        let k3 = kernel.pow(3);
        ConvTranspose3d {
            weight: glorot_uniform(rng, &[in_ch, out_ch, kernel, kernel, kernel], in_ch * k3, out_ch * k3),
            bias: Tensor::zeros(&[out_ch]),
            stride,
            padding,
            output_padding,
        }
    }

    /// Shares weights with `conv` so the two forward maps are mutually adjoint
    /// when `conv` maps `wide` onto this layer's input grid.
    pub fn adjoint_of(conv: &Conv3d<T>, wide: [usize; 3]) -> Result<Self> {
        let (_, in_ch, k) = kernel_dims(&conv.weight)?;
        let g = conv.geometry(&[in_ch, wide[0], wide[1], wide[2]])?;
        let pads: Vec<usize> = (0..3)
            .map(|a| wide[a] + 2 * g.pad - ((g.narrow[a] - 1) * g.stride + k[a]))
            .collect();
        if pads.iter().any(|&p| p != pads[0]) {
            return Err(Error::Shape(format!("anisotropic output padding {pads:?}")));
        }
        let op = pads[0];
        Ok(ConvTranspose3d {
            weight: conv.weight.clone(),
            bias: Tensor::zeros(&[in_ch]),
            stride: conv.stride,
            padding: conv.padding,
            output_padding: op,
        })
    }

    fn geometry(&self, input: &[usize]) -> Result<Geometry> {
        let (in_ch, out_ch, k) = kernel_dims(&self.weight)?;
        let &[c, d, h, w] = input else {
            return Err(Error::Shape(format!(
                "conv_transpose3d expects [C, D, H, W], got {input:?}"
            )));
        };
        if c != in_ch {
            return Err(Error::Shape(format!(
                "conv_transpose3d expects {in_ch} channels, got {c}"
            )));
        }
        let narrow = [d, h, w];
        let mut wide = [0; 3];
        for a in 0..3 {
            let full = (narrow[a] - 1) * self.stride + k[a] + self.output_padding;
            if full <= 2 * self.padding {
                return Err(Error::Shape(format!(
                    "padding {} consumes the whole output along axis {a}",
                    self.padding
                )));
            }
            wide[a] = full - 2 * self.padding;
        }
        Ok(Geometry {
            wide_ch: out_ch,
            narrow_ch: in_ch,
            wide,
            narrow,
            k,
            stride: self.stride,
            pad: self.padding,
        })
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let g = self.geometry(input)?;
        Ok(vec![g.wide_ch, g.wide[0], g.wide[1], g.wide[2]])
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.geometry(x.shape())?;
        let plane = g.wide_len();
        let mut out = vec![T::zero(); g.wide_ch * plane];
        for (c, chunk) in out.chunks_mut(plane).enumerate() {
            chunk.fill(self.bias.data()[c]);
        }
        g.scatter(x.data(), self.weight.data(), &mut out);
        Tensor::from_vec(&[g.wide_ch, g.wide[0], g.wide[1], g.wide[2]], out)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<LayerGrads<T>> {
        let g = self.geometry(x.shape())?;
        let expect = [g.wide_ch, g.wide[0], g.wide[1], g.wide[2]];
        if grad_out.shape() != expect {
            return Err(Error::Shape(format!(
                "conv_transpose3d grad_out {:?}, expected {expect:?}",
                grad_out.shape()
            )));
        }
        let mut gin = vec![T::zero(); x.len()];
        g.correlate(grad_out.data(), self.weight.data(), &mut gin);
        let mut gw = vec![T::zero(); self.weight.len()];
        g.weight_grad(x.data(), grad_out.data(), &mut gw);
        let plane = g.wide_len();
        let gb: Vec<T> = grad_out.data().chunks(plane).map(|c| c.iter().copied().sum()).collect();
        Ok(LayerGrads {
            input: Tensor::from_vec(x.shape(), gin)?,
            weight: Some(Tensor::from_vec(self.weight.shape(), gw)?),
            bias: Some(Tensor::vector(&gb)),
        })
    }
}
