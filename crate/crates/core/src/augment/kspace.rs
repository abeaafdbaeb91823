//! Artifacts defined in k-space: spikes and ghosting.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{fft3, ComplexVolume, Rng, Tensor};
use crate::volio::Volume;

fn to_kspace(v: &Volume) -> Result<ComplexVolume> {
    fft3(&ComplexVolume::from_real(v.data().cast())?, false)
}

fn real_part(k: &ComplexVolume) -> Result<Tensor<f32>> {
    Ok(fft3(k, true)?.re.cast())
}

/// One spiked k-space coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    /// Flat offset into the `[D, H, W]` spectrum; never 0 (DC).
    pub offset: usize,
    pub phase: f64,
}

/// `count` spikes at uniformly random non-DC locations (repeats allowed).
pub fn draw_spikes(rng: &mut Rng, shape: [usize; 3], count: usize) -> Vec<Spike> {
    let n: usize = shape.iter().product();
    (0..count)
        .map(|_| Spike {
            offset: 1 + rng.below(n - 1),
            phase: rng.uniform_range(0.0, 2.0 * PI),
        })
        .collect()
}

/// Spiked volume before clamping: each spike sets its coefficient to
/// `intensity · max|K| · e^{iφ}`, then the real part of the inverse is taken.
pub fn spike_field(v: &Volume, spikes: &[Spike], intensity: f64) -> Result<Tensor<f32>> {
    let mut k = to_kspace(v)?;
    let peak = (0..k.re.len()).map(|o| k.magnitude_sq(o)).fold(0.0, f64::max).sqrt();
    for s in spikes {
        if s.offset == 0 {
            return Err(Error::Parameter("spike at DC".into()));
        }
        k.re.data_mut()[s.offset] = intensity * peak * s.phase.cos();
        k.im.data_mut()[s.offset] = intensity * peak * s.phase.sin();
    }
    real_part(&k)
}

pub fn apply_spike(v: &Volume, rng: &mut Rng, count: usize, intensity: f64) -> Result<Volume> {
    if !(intensity >= 0.0) {
        return Err(Error::Parameter(format!("spike intensity must be >= 0, got {intensity}")));
    }
    let spikes = draw_spikes(rng, v.shape(), count);
    apply_spikes_at(v, &spikes, intensity)
}

pub fn apply_spikes_at(v: &Volume, spikes: &[Spike], intensity: f64) -> Result<Volume> {
    let out = spike_field(v, spikes, intensity)?;
    v.with_data(out.map(|x| x.clamp(0.0, 1.0)))
}

/// Ghosted volume before clamping: every `num_ghosts`-th k-space plane
/// perpendicular to `axis`, except the DC plane, is scaled by `1 - intensity`.
pub fn ghost_field(v: &Volume, num_ghosts: usize, axis: usize, intensity: f64) -> Result<Tensor<f32>> {
    if num_ghosts < 2 {
        return Err(Error::Parameter(format!("num_ghosts must be >= 2, got {num_ghosts}")));
    }
    if !(0.0..=1.0).contains(&intensity) {
        return Err(Error::Parameter(format!("ghost intensity {intensity} not in [0, 1]")));
    }
    if axis > 2 {
        return Err(Error::Parameter(format!("axis {axis} out of range")));
    }
    let mut k = to_kspace(v)?;
    let shape = v.shape();
    let strides = [shape[1] * shape[2], shape[2], 1];
    let factor = 1.0 - intensity;
    for o in 0..k.re.len() {
        let plane = (o / strides[axis]) % shape[axis];
        if plane != 0 && plane.is_multiple_of(num_ghosts) {
            k.re.data_mut()[o] *= factor;
            k.im.data_mut()[o] *= factor;
        }
    }
    real_part(&k)
}

pub fn apply_ghosting(v: &Volume, num_ghosts: usize, axis: usize, intensity: f64) -> Result<Volume> {
    let out = ghost_field(v, num_ghosts, axis, intensity)?;
    v.with_data(out.map(|x| x.clamp(0.0, 1.0)))
}
