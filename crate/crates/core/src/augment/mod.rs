//! MRI-artifact augmentation: seven seeded `Volume -> Volume` transforms and
//! their randomized composition.
//!
//! Every transform keeps the shape and maps `[0, 1]` volumes into `[0, 1]`.

mod intensity;
mod kspace;
mod motion;

pub use intensity::{
    add_noise, adjust_gamma, apply_bias_coefficients, apply_bias_field, bias_field, gaussian_blur,
    gaussian_kernel, polynomial_terms,
};
pub use kspace::{apply_ghosting, apply_spike, apply_spikes_at, draw_spikes, ghost_field, spike_field, Spike};
pub use motion::{apply_motion, motion_average, resample_rigid, RigidTransform};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{try_map_indexed, Parallelism};
use crate::tensor::Rng;
use crate::volio::{LabeledDataset, Sample, Volume};

/// Parameter ranges for [`augment_volume`]. All ranges are inclusive `(low, high)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub noise_sigma_range: (f64, f64),
    /// Range of `ln(gamma)`.
    pub gamma_log_range: (f64, f64),
    /// Blur sigma in voxels.
    pub blur_sigma_range: (f64, f64),
    pub bias_order: u32,
    pub bias_coeff_range: (f64, f64),
    pub spike_count_range: (usize, usize),
    pub spike_intensity_range: (f64, f64),
    pub ghost_count_range: (usize, usize),
    pub ghost_intensity_range: (f64, f64),
    pub motion_rot_max_deg: f64,
    /// Voxels.
    pub motion_trans_max: f64,
    pub copies_per_volume: usize,
    /// Chance that each transform is applied to a copy.
    pub apply_probability: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            noise_sigma_range: (0.0, 0.05),
            gamma_log_range: (0.7f64.ln(), 1.5f64.ln()),
            blur_sigma_range: (0.3, 1.2),
            bias_order: 3,
            bias_coeff_range: (-0.3, 0.3),
            spike_count_range: (1, 3),
            spike_intensity_range: (1.0, 3.0),
            ghost_count_range: (2, 4),
            ghost_intensity_range: (0.2, 0.8),
            motion_rot_max_deg: 10.0,
            motion_trans_max: 3.0,
            copies_per_volume: 1,
            apply_probability: 0.5,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, (a, b): (f64, f64)| {
            if a <= b && a.is_finite() && b.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("augment.{name}: range ({a}, {b}) is not ordered")))
            }
        };
        ordered("noise_sigma_range", self.noise_sigma_range)?;
        ordered("gamma_log_range", self.gamma_log_range)?;
        ordered("blur_sigma_range", self.blur_sigma_range)?;
        ordered("bias_coeff_range", self.bias_coeff_range)?;
        ordered("spike_intensity_range", self.spike_intensity_range)?;
        ordered("ghost_intensity_range", self.ghost_intensity_range)?;
        let (s0, s1) = self.spike_count_range;
        let (g0, g1) = self.ghost_count_range;
        if s0 > s1 || g0 > g1 {
            return Err(Error::Config("augment: count ranges must be ordered".into()));
        }
        if g0 < 2 {
            return Err(Error::Config("augment.ghost_count_range must start at >= 2".into()));
        }
        let non_negative = [
            self.noise_sigma_range.0,
            self.blur_sigma_range.0,
            self.spike_intensity_range.0,
            self.ghost_intensity_range.0,
            self.motion_rot_max_deg,
            self.motion_trans_max,
        ];
        if non_negative.iter().any(|&x| x < 0.0) || self.ghost_intensity_range.1 > 1.0 {
            return Err(Error::Config("augment: intensities and limits must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.apply_probability) {
            return Err(Error::Config("augment.apply_probability must be in [0, 1]".into()));
        }
        Ok(())
    }
}

fn int_in(rng: &mut Rng, (lo, hi): (usize, usize)) -> usize {
    lo + rng.below(hi - lo + 1)
}

/// One augmented copy. Transforms run in the fixed order
/// motion, ghosting, spike, bias, blur, noise, gamma; each is applied with
/// probability `cfg.apply_probability`.
pub fn augment_copy(v: &Volume, cfg: &AugmentConfig, rng: &mut Rng) -> Result<Volume> {
    let p = cfg.apply_probability;
    let mut out = v.clone();
    if rng.coin(p) {
        out = apply_motion(&out, rng, cfg.motion_rot_max_deg, cfg.motion_trans_max)?;
    }
    if rng.coin(p) {
        let n = int_in(rng, cfg.ghost_count_range);
        let axis = rng.below(3);
        let intensity = rng.uniform_range(cfg.ghost_intensity_range.0, cfg.ghost_intensity_range.1);
        out = apply_ghosting(&out, n, axis, intensity)?;
    }
    if rng.coin(p) {
        let count = int_in(rng, cfg.spike_count_range);
        let intensity = rng.uniform_range(cfg.spike_intensity_range.0, cfg.spike_intensity_range.1);
        out = apply_spike(&out, rng, count, intensity)?;
    }
    if rng.coin(p) {
        out = apply_bias_field(&out, rng, cfg.bias_order, cfg.bias_coeff_range)?;
    }
    if rng.coin(p) {
        let sigma = rng.uniform_range(cfg.blur_sigma_range.0, cfg.blur_sigma_range.1);
        out = gaussian_blur(&out, sigma)?;
    }
    if rng.coin(p) {
        let sigma = rng.uniform_range(cfg.noise_sigma_range.0, cfg.noise_sigma_range.1);
        out = add_noise(&out, rng, sigma)?;
    }
    if rng.coin(p) {
        let gamma = rng.uniform_range(cfg.gamma_log_range.0, cfg.gamma_log_range.1).exp();
        out = adjust_gamma(&out, gamma)?;
    }
    Ok(out)
}

pub fn augmented_id(id: &str, copy: usize) -> String {
    format!("{id}_aug{copy}")
}

/// `cfg.copies_per_volume` copies; copy `c` draws from `rng.split(c)`.
pub fn augment_volume(v: &Volume, cfg: &AugmentConfig, rng: &Rng) -> Result<Vec<Volume>> {
    cfg.validate()?;
    (0..cfg.copies_per_volume)
        .map(|c| Ok(augment_copy(v, cfg, &mut rng.split(c as u64))?.with_id(augmented_id(&v.id, c))))
        .collect()
}

/// Augmented copies of every item, labels copied unchanged. Item `i` uses
/// `rng.split(i)` exactly as [`augment_volume`] would, so the output is the
/// same for serial and parallel execution.
pub fn augment_dataset(ds: &LabeledDataset, cfg: &AugmentConfig, rng: &Rng, par: Parallelism) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let copies = cfg.copies_per_volume;
    try_map_indexed(ds.len() * copies, par, |k| {
        let (i, c) = (k / copies, k % copies);
        let item = &ds.items()[i];
        let mut r = rng.split(i as u64).split(c as u64);
        let volume = augment_copy(&item.volume, cfg, &mut r)?.with_id(augmented_id(&item.volume.id, c));
        Ok::<_, Error>(Sample { volume, targets: item.targets })
    })
}
