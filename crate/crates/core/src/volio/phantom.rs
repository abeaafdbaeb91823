//! Synthetic brain-like phantoms with thickness-driven hearing thresholds.
//!
//! Each phantom is an ellipsoidal shell ("cortex") around a dimmer interior
//! holding a few Gaussian blobs, over a faint i.i.d. texture. The shell
//! thickness `t` alone sets the noiseless targets:
//!
//! ```text
//! pt500  = 15 + 35 · (1 − t / t_max) + η₁
//! pt4000 = 25 + 60 · (1 − t / t_max) + η₂,    η ~ N(0, target_noise_db²)
//! ```
//!
//! Draw order from the stream: geometry, texture, then the two η values.

use serde::{Deserialize, Serialize};

use super::{TargetPair, Volume};
use crate::error::{Error, Result};
use crate::tensor::{is_power_of_two, Rng, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomConfig {
    /// Cubic extent in voxels; a power of two.
    pub size: usize,
    /// Shell thickness range in voxels.
    pub t_min: f64,
    pub t_max: f64,
    /// Outer semi-axes as a fraction of `size/2 - 2`.
    pub radius_fraction: (f64, f64),
    pub blobs: usize,
    /// Logistic width, in voxels, of the shell's inner and outer edges.
    pub edge_width: f64,
    pub texture_amplitude: f64,
    pub target_noise_db: f64,
    pub spacing_mm: f32,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        PhantomConfig {
            size: 32,
            t_min: 1.5,
            t_max: 5.0,
            radius_fraction: (0.8, 0.95),
            blobs: 2,
            edge_width: 0.5,
            texture_amplitude: 0.05,
            target_noise_db: 2.0,
            spacing_mm: 1.0,
        }
    }
}

const SHELL_INTENSITY: f64 = 0.85;
const INTERIOR_INTENSITY: f64 = 0.35;

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(format!("phantom config: {m}")));
        if !is_power_of_two(self.size) || self.size < 8 {
            return bad(format!("size {} must be a power of two >= 8", self.size));
        }
        if !(self.t_min > 0.0 && self.t_min <= self.t_max) {
            return bad(format!("thickness range [{}, {}]", self.t_min, self.t_max));
        }
        let (r0, r1) = self.radius_fraction;
        if !(r0 > 0.0 && r0 <= r1 && r1 <= 1.0) {
            return bad(format!("radius fraction ({r0}, {r1})"));
        }
        let min_axis = (self.size as f64 / 2.0 - 2.0) * r0;
        if self.t_max >= min_axis {
            return bad(format!("t_max {} leaves no interior (min semi-axis {min_axis})", self.t_max));
        }
        if !(self.edge_width > 0.0) {
            return bad(format!("edge width {} must be positive", self.edge_width));
        }
        if self.texture_amplitude < 0.0 || self.target_noise_db < 0.0 {
            return bad("negative amplitude".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub center: [f64; 3],
    pub sigma: f64,
    pub amplitude: f64,
}

/// The drawn parameters a phantom is rendered from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomGeometry {
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    pub thickness: f64,
    pub blobs: Vec<Blob>,
}

pub fn draw_geometry(rng: &mut Rng, cfg: &PhantomConfig) -> PhantomGeometry {
    let n = cfg.size as f64;
    let mid = (n - 1.0) / 2.0;
    let base = n / 2.0 - 2.0;
    let center = [0; 3].map(|_| mid + rng.uniform_range(-1.0, 1.0));
    let semi_axes = [0; 3].map(|_| base * rng.uniform_range(cfg.radius_fraction.0, cfg.radius_fraction.1));
    let thickness = rng.uniform_range(cfg.t_min, cfg.t_max);
    let blobs = (0..cfg.blobs)
        .map(|_| {
            let mut c = [0.0; 3];
            for a in 0..3 {
                c[a] = center[a] + 0.5 * (semi_axes[a] - thickness) * rng.uniform_range(-1.0, 1.0);
            }
            Blob {
                center: c,
                sigma: rng.uniform_range(1.5, 2.5),
                amplitude: rng.uniform_range(0.15, 0.3),
            }
        })
        .collect();
    PhantomGeometry { center, semi_axes, thickness, blobs }
}

#[inline]
fn soft_step(d: f64, width: f64) -> f64 {
    1.0 / (1.0 + (-d / width).exp())
}

/// Renders the geometry plus texture drawn from `rng`, clamped to `[0, 1]`.
pub fn render_phantom(geom: &PhantomGeometry, cfg: &PhantomConfig, rng: &mut Rng) -> Tensor<f32> {
    let n = cfg.size;
    let outer = geom.semi_axes;
    let inner = outer.map(|a| a - geom.thickness);
    let mean_outer = outer.iter().sum::<f64>() / 3.0;
    let mean_inner = inner.iter().sum::<f64>() / 3.0;
    Tensor::from_fn(&[n, n, n], |idx| {
        let p = [(idx / (n * n)) as f64, ((idx / n) % n) as f64, (idx % n) as f64];
        let mut r_out = 0.0;
        let mut r_in = 0.0;
        for a in 0..3 {
            let d = p[a] - geom.center[a];
            r_out += (d / outer[a]).powi(2);
            r_in += (d / inner[a]).powi(2);
        }
        let inside_outer = soft_step((1.0 - r_out.sqrt()) * mean_outer, cfg.edge_width);
        let outside_inner = soft_step((r_in.sqrt() - 1.0) * mean_inner, cfg.edge_width);
        let interior = inside_outer * (1.0 - outside_inner);
        let mut v = SHELL_INTENSITY * inside_outer * outside_inner + INTERIOR_INTENSITY * interior;
        for b in &geom.blobs {
            let d2: f64 = (0..3).map(|a| (p[a] - b.center[a]).powi(2)).sum();
            v += b.amplitude * (-d2 / (2.0 * b.sigma * b.sigma)).exp() * interior;
        }
        v += cfg.texture_amplitude * rng.uniform();
        v.clamp(0.0, 1.0) as f32
    })
}

/// Noiseless targets plus additive `eta` (dB), clamped to the valid range.
pub fn phantom_targets(thickness: f64, cfg: &PhantomConfig, eta: [f64; 2]) -> Result<TargetPair> {
    let x = 1.0 - thickness / cfg.t_max;
    TargetPair::new((15.0 + 35.0 * x + eta[0]) as f32, (25.0 + 60.0 * x + eta[1]) as f32)
}

/// A rendered phantom with the geometry it came from.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub volume: Volume,
    pub targets: TargetPair,
    pub geometry: PhantomGeometry,
}

pub fn make_phantom_detailed(rng: &mut Rng, cfg: &PhantomConfig, id: &str) -> Result<Phantom> {
    cfg.validate()?;
    let geometry = draw_geometry(rng, cfg);
    let data = render_phantom(&geometry, cfg, rng);
    let eta = [rng.normal() * cfg.target_noise_db, rng.normal() * cfg.target_noise_db];
    let targets = phantom_targets(geometry.thickness, cfg, eta)?;
    let volume = Volume::new(id, data, [cfg.spacing_mm; 3])?;
    Ok(Phantom { volume, targets, geometry })
}

pub fn make_phantom(rng: &mut Rng, cfg: &PhantomConfig) -> Result<(Volume, TargetPair)> {
    let p = make_phantom_detailed(rng, cfg, "phantom")?;
    Ok((p.volume, p.targets))
}
