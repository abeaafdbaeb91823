//! Rigid-motion artifact, approximated in image space as the average of the
//! original pose and one rigidly moved pose.

use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};
use crate::volio::Volume;

/// Rotation (degrees, about the z, y, x volume axes, applied x then y then z)
/// and translation (voxels, in `[z, y, x]` order) about the volume center.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidTransform {
    pub angles_deg: [f64; 3],
    pub translation: [f64; 3],
}

impl RigidTransform {
    pub fn draw(rng: &mut Rng, rot_max_deg: f64, trans_max: f64) -> Self {
        let angles_deg = [0; 3].map(|_| rng.uniform_range(-rot_max_deg, rot_max_deg));
        let translation = [0; 3].map(|_| rng.uniform_range(-trans_max, trans_max));
        RigidTransform { angles_deg, translation }
    }

    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let [a, b, c] = self.angles_deg.map(f64::to_radians);
        // rotation about axis 0 acts in the (1, 2) plane, etc.
        let r0 = [[1.0, 0.0, 0.0], [0.0, a.cos(), -a.sin()], [0.0, a.sin(), a.cos()]];
        let r1 = [[b.cos(), 0.0, b.sin()], [0.0, 1.0, 0.0], [-b.sin(), 0.0, b.cos()]];
        let r2 = [[c.cos(), -c.sin(), 0.0], [c.sin(), c.cos(), 0.0], [0.0, 0.0, 1.0]];
        matmul3(&r0, &matmul3(&r1, &r2))
    }
}

fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn trilinear(data: &[f32], shape: [usize; 3], q: [f64; 3]) -> f64 {
    let base = q.map(f64::floor);
    let frac = [q[0] - base[0], q[1] - base[1], q[2] - base[2]];
    let mut acc = 0.0;
    for corner in 0..8 {
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        let mut inside = true;
        for a in 0..3 {
            let bit = (corner >> (2 - a)) & 1;
            let t = if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            if t == 0.0 {
                w = 0.0;
                break;
            }
            w *= t;
            let i = base[a] as i64 + bit as i64;
            if i < 0 || i >= shape[a] as i64 {
                inside = false;
            } else {
                idx[a] = i as usize;
            }
        }
        if w != 0.0 && inside {
            acc += w * data[(idx[0] * shape[1] + idx[1]) * shape[2] + idx[2]] as f64;
        }
    }
    acc
}

/// Pull-back resample `out(p) = v(R·(p − c) + c + t)` with trilinear
/// interpolation and zero fill outside the grid.
pub fn resample_rigid(v: &Volume, t: &RigidTransform) -> Result<Volume> {
    let shape = v.shape();
    let center = shape.map(|n| (n as f64 - 1.0) / 2.0);
    let r = t.rotation();
    let data = v.data().data();
    let [_, h, w] = shape;
    let out = Tensor::from_fn(&shape, |idx| {
        let p = [(idx / (h * w)) as f64, ((idx / w) % h) as f64, (idx % w) as f64];
        let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
        let mut q = [0.0; 3];
        for i in 0..3 {
            q[i] = center[i] + r[i][0] * d[0] + r[i][1] * d[1] + r[i][2] * d[2] + t.translation[i];
        }
        trilinear(data, shape, q) as f32
    });
    v.with_data(out)
}

/// Average of `v` and a randomly moved copy.
pub fn apply_motion(v: &Volume, rng: &mut Rng, rot_max_deg: f64, trans_max: f64) -> Result<Volume> {
    if !(rot_max_deg >= 0.0 && trans_max >= 0.0) {
        return Err(Error::Parameter(format!(
            "motion limits must be >= 0, got rotation {rot_max_deg}, translation {trans_max}"
        )));
    }
    let t = RigidTransform::draw(rng, rot_max_deg, trans_max);
    motion_average(v, &t)
}

pub fn motion_average(v: &Volume, t: &RigidTransform) -> Result<Volume> {
    let moved = resample_rigid(v, t)?;
    let avg = v.data().zip_map(moved.data(), |a, b| (0.5 * (a + b)).clamp(0.0, 1.0))?;
    v.with_data(avg)
}
