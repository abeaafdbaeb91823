use hearvol_core::augment::*;
use hearvol_core::par::Parallelism;
use hearvol_core::tensor::{fft3, ComplexVolume, Rng, Tensor};
use hearvol_core::volio::phantom::PhantomConfig;
use hearvol_core::volio::{make_phantom, normalize_volume, synthetic_dataset, Volume};

const IDENTITY_TOL: f32 = 1e-4;

fn phantom(seed: u64) -> Volume {
    let (v, _) = make_phantom(&mut Rng::new(seed), &PhantomConfig::default()).unwrap();
    normalize_volume(&v).unwrap()
}

fn max_diff(a: &Tensor<f32>, b: &Tensor<f32>) -> f32 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

fn assert_unit_range(v: &Volume, what: &str) {
    let (lo, hi) = v.data().min_max();
    assert!(lo >= 0.0 && hi <= 1.0, "{what}: range [{lo}, {hi}]");
}

pub fn zero_parameters_are_identity() {
    let v = phantom(1);
    let mut rng = Rng::new(2);
    let outs = [
        ("noise", add_noise(&v, &mut rng, 0.0).unwrap()),
        ("gamma", adjust_gamma(&v, 1.0).unwrap()),
        ("blur", gaussian_blur(&v, 0.0).unwrap()),
        ("bias", apply_bias_field(&v, &mut rng, 3, (0.0, 0.0)).unwrap()),
        ("spike", apply_spike(&v, &mut rng, 0, 2.0).unwrap()),
        ("ghosting", apply_ghosting(&v, 3, 1, 0.0).unwrap()),
        ("motion", apply_motion(&v, &mut rng, 0.0, 0.0).unwrap()),
    ];
    for (name, out) in outs {
        assert_eq!(out.shape(), v.shape());
        let d = max_diff(out.data(), v.data());
        assert!(d < IDENTITY_TOL, "{name}: max diff {d}");
    }
}

pub fn random_parameters_preserve_shape_and_range() {
    let cfg = AugmentConfig { apply_probability: 1.0, copies_per_volume: 3, ..Default::default() };
    for seed in 0..3 {
        let v = phantom(seed);
        for c in augment_volume(&v, &cfg, &Rng::new(seed + 100)).unwrap() {
            assert_eq!(c.shape(), v.shape());
            assert_unit_range(&c, &c.id);
        }
        let mut r = Rng::new(seed);
        for (name, out) in [
            ("noise", add_noise(&v, &mut r, 0.3).unwrap()),
            ("gamma", adjust_gamma(&v, 0.4).unwrap()),
            ("blur", gaussian_blur(&v, 1.2).unwrap()),
            ("bias", apply_bias_field(&v, &mut r, 3, (-1.0, 1.0)).unwrap()),
            ("spike", apply_spike(&v, &mut r, 3, 3.0).unwrap()),
            ("ghosting", apply_ghosting(&v, 2, 2, 0.8).unwrap()),
            ("motion", apply_motion(&v, &mut r, 10.0, 3.0).unwrap()),
        ] {
            assert_eq!(out.shape(), v.shape(), "{name}");
            assert_unit_range(&out, name);
        }
    }
}

pub fn every_transform_is_deterministic() {
    let v = phantom(3);
    let run = |seed: u64| {
        let mut r = Rng::new(seed);
        vec![
            add_noise(&v, &mut r, 0.04).unwrap(),
            apply_bias_field(&v, &mut r, 3, (-0.3, 0.3)).unwrap(),
            apply_spike(&v, &mut r, 2, 1.5).unwrap(),
            apply_motion(&v, &mut r, 8.0, 2.0).unwrap(),
            adjust_gamma(&v, 1.3).unwrap(),
            gaussian_blur(&v, 0.7).unwrap(),
            apply_ghosting(&v, 2, 0, 0.5).unwrap(),
        ]
    };
    let (a, b) = (run(77), run(77));
    for (x, y) in a.iter().zip(&b) {
        let xb: Vec<u32> = x.data().data().iter().map(|f| f.to_bits()).collect();
        let yb: Vec<u32> = y.data().data().iter().map(|f| f.to_bits()).collect();
        assert_eq!(xb, yb);
    }
}

pub fn noise_statistics() {
    let v = Volume::new("c", Tensor::full(&[32, 32, 32], 0.5), [1.0; 3]).unwrap();
    let out = add_noise(&v, &mut Rng::new(2718), 0.05).unwrap();
    let d = out.data().sub(v.data()).unwrap();
    let n = d.len() as f64;
    let mean = d.data().iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = d.data().iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    assert!((sd - 0.05).abs() < 0.005, "std {sd}");
}

pub fn gamma_preserves_ordering() {
    let v = phantom(4);
    let out = adjust_gamma(&v, 1.7).unwrap();
    let (a, b) = (v.data().data(), out.data().data());
    for i in (0..a.len()).step_by(97) {
        for j in (0..a.len()).step_by(1013) {
            if a[i] < a[j] {
                assert!(b[i] <= b[j]);
            }
        }
    }
}

pub fn blur_impulse_matches_dense_convolution() {
    let n = 16;
    let mut t = Tensor::<f32>::zeros(&[n, n, n]);
    t.set(&[8, 8, 8], 1.0).unwrap();
    let v = Volume::new("imp", t, [1.0; 3]).unwrap();
    let sigma = 0.8;
    let out = gaussian_blur(&v, sigma).unwrap();

    // Direct 3D convolution with an independently built, normalized 3D
    // Gaussian (product of separately normalized 1D factors).
    let r = (3.0f64 * sigma).ceil() as i64;
    let g1: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s1: f64 = g1.iter().sum();
    for z in 0..n as i64 {
        for y in 0..n as i64 {
            for x in 0..n as i64 {
                let mut want = 0.0;
                for dz in -r..=r {
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let (sz, sy, sx) = (z - dz, y - dy, x - dx);
                            if (sz, sy, sx) == (8, 8, 8) {
                                want += g1[(dz + r) as usize] * g1[(dy + r) as usize] * g1[(dx + r) as usize]
                                    / (s1 * s1 * s1);
                            }
                        }
                    }
                }
                let got = out.data().get(&[z as usize, y as usize, x as usize]).unwrap() as f64;
                assert!((got - want).abs() < 1e-6, "({z},{y},{x}) {got} vs {want}");
            }
        }
    }
}

pub fn bias_field_keeps_zeros_and_is_positive() {
    let field = bias_field([8, 8, 8], 3, &[0.3; 20]).unwrap();
    assert!(field.data().iter().all(|&f| f > 0.0));
    let mut t = Tensor::full(&[8, 8, 8], 0.3f32);
    t.set(&[1, 2, 3], 0.0).unwrap();
    let v = Volume::new("b", t, [1.0; 3]).unwrap();
    let out = apply_bias_field(&v, &mut Rng::new(5), 3, (-0.3, 0.3)).unwrap();
    assert_eq!(out.data().get(&[1, 2, 3]).unwrap(), 0.0);
}

fn spectrum_of(t: &Tensor<f32>) -> ComplexVolume {
    fft3(&ComplexVolume::from_real(t.cast()).unwrap(), false).unwrap()
}

fn mirror(offset: usize, shape: [usize; 3]) -> usize {
    let [_, h, w] = shape;
    let (z, y, x) = (offset / (h * w), (offset / w) % h, offset % w);
    let m = |i: usize, n: usize| (n - i) % n;
    (m(z, shape[0]) * h + m(y, h)) * w + m(x, w)
}

pub fn spike_has_single_dominant_frequency() {
    let v = phantom(6);
    let spikes = draw_spikes(&mut Rng::new(8), v.shape(), 1);
    let raw = spike_field(&v, &spikes, 1.5).unwrap();
    let diff = raw.sub(v.data()).unwrap();
    let k = spectrum_of(&diff);
    let argmax = (0..k.re.len())
        .max_by(|&a, &b| k.magnitude_sq(a).partial_cmp(&k.magnitude_sq(b)).unwrap())
        .unwrap();
    let loc = spikes[0].offset;
    assert!(argmax == loc || argmax == mirror(loc, v.shape()), "argmax {argmax}, spike {loc}");
    let mean_shift = (raw.mean() - v.data().mean()).abs();
    assert!(mean_shift < 1e-3, "mean moved by {mean_shift}");
}

/// Circular cross-correlation of `a` and `b` along `axis`, with each line's
/// mean removed first, summed over all lines.
fn axis_correlation(a: &Tensor<f32>, b: &Tensor<f32>, axis: usize) -> Vec<f64> {
    let s = a.shape();
    let shape = [s[0], s[1], s[2]];
    let strides = [shape[1] * shape[2], shape[2], 1];
    let n = shape[axis];
    let others: Vec<usize> = (0..3).filter(|&x| x != axis).collect();
    let mut c = vec![0.0; n];
    for i in 0..shape[others[0]] {
        for j in 0..shape[others[1]] {
            let base = i * strides[others[0]] + j * strides[others[1]];
            let line = |t: &Tensor<f32>| {
                let v: Vec<f64> = (0..n).map(|k| t.data()[base + k * strides[axis]] as f64).collect();
                let m = v.iter().sum::<f64>() / n as f64;
                v.into_iter().map(|x| x - m).collect::<Vec<_>>()
            };
            let (la, lb) = (line(a), line(b));
            for (shift, cs) in c.iter_mut().enumerate() {
                *cs += (0..n).map(|k| la[k] * lb[(k + shift) % n]).sum::<f64>();
            }
        }
    }
    c
}

pub fn ghosting_produces_displaced_replicas() {
    let v = phantom(9);
    let n = v.shape()[0];
    for axis in 0..3 {
        let raw = ghost_field(&v, 2, axis, 0.8).unwrap();
        assert!((raw.mean() - v.data().mean()).abs() < 1e-3);
        let diff = raw.sub(v.data()).unwrap();
        let c = axis_correlation(&diff, v.data(), axis);
        let window = n / 4..=3 * n / 4;
        let peak = window
            .clone()
            .max_by(|&a, &b| c[a].abs().partial_cmp(&c[b].abs()).unwrap())
            .unwrap();
        assert_eq!(peak, n / 2, "axis {axis}: correlation {c:?}");
    }
    // four ghosts: a local peak at extent / 4
    let raw = ghost_field(&v, 4, 0, 0.8).unwrap();
    let c = axis_correlation(&raw.sub(v.data()).unwrap(), v.data(), 0);
    let q = n / 4;
    assert!(c[q].abs() > c[q - 1].abs() && c[q].abs() > c[q + 1].abs());
}

/// Standalone pull-back resampler: explicit rotation products and an
/// 8-corner trilinear sum written out per axis.
fn oracle_resample(v: &Volume, angles_deg: [f64; 3], t: [f64; 3]) -> Vec<f64> {
    let [d, h, w] = v.shape();
    let (a, b, c) = (angles_deg[0].to_radians(), angles_deg[1].to_radians(), angles_deg[2].to_radians());
    let rot = |p: [f64; 3]| {
        // x-axis (index 2) rotation first, then index 1, then index 0
        let p = [p[0] * c.cos() - p[1] * c.sin(), p[0] * c.sin() + p[1] * c.cos(), p[2]];
        let p = [p[0] * b.cos() + p[2] * b.sin(), p[1], -p[0] * b.sin() + p[2] * b.cos()];
        [p[0], p[1] * a.cos() - p[2] * a.sin(), p[1] * a.sin() + p[2] * a.cos()]
    };
    let at = |z: i64, y: i64, x: i64| -> f64 {
        if z < 0 || y < 0 || x < 0 || z >= d as i64 || y >= h as i64 || x >= w as i64 {
            0.0
        } else {
            v.data().get(&[z as usize, y as usize, x as usize]).unwrap() as f64
        }
    };
    let ctr = [(d as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0];
    let mut out = Vec::with_capacity(d * h * w);
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let r = rot([z as f64 - ctr[0], y as f64 - ctr[1], x as f64 - ctr[2]]);
                let q = [r[0] + ctr[0] + t[0], r[1] + ctr[1] + t[1], r[2] + ctr[2] + t[2]];
                let (z0, y0, x0) = (q[0].floor(), q[1].floor(), q[2].floor());
                let (fz, fy, fx) = (q[0] - z0, q[1] - y0, q[2] - x0);
                let (z0, y0, x0) = (z0 as i64, y0 as i64, x0 as i64);
                let val = (1.0 - fz) * (1.0 - fy) * (1.0 - fx) * at(z0, y0, x0)
                    + (1.0 - fz) * (1.0 - fy) * fx * at(z0, y0, x0 + 1)
                    + (1.0 - fz) * fy * (1.0 - fx) * at(z0, y0 + 1, x0)
                    + (1.0 - fz) * fy * fx * at(z0, y0 + 1, x0 + 1)
                    + fz * (1.0 - fy) * (1.0 - fx) * at(z0 + 1, y0, x0)
                    + fz * (1.0 - fy) * fx * at(z0 + 1, y0, x0 + 1)
                    + fz * fy * (1.0 - fx) * at(z0 + 1, y0 + 1, x0)
                    + fz * fy * fx * at(z0 + 1, y0 + 1, x0 + 1);
                out.push(val);
            }
        }
    }
    out
}

pub fn motion_matches_standalone_resampler() {
    let v = phantom(10);
    let t = RigidTransform::draw(&mut Rng::new(11), 10.0, 3.0);
    let out = motion_average(&v, &t).unwrap();
    let oracle = oracle_resample(&v, t.angles_deg, t.translation);
    for ((&o, &x), &r) in out.data().data().iter().zip(v.data().data()).zip(&oracle) {
        let want = (0.5 * (x as f64 + r)).clamp(0.0, 1.0);
        assert!((o as f64 - want).abs() < 1e-5);
    }
}

pub fn parallel_and_serial_augmentation_agree() {
    let cfg = PhantomConfig { size: 16, t_min: 1.0, t_max: 3.0, ..Default::default() };
    let ds = synthetic_dataset(5, &cfg, &Rng::new(0), Parallelism::Serial).unwrap();
    let acfg = AugmentConfig { copies_per_volume: 2, ..Default::default() };
    let rng = Rng::new(21);
    let a = augment_dataset(&ds, &acfg, &rng, Parallelism::Serial).unwrap();
    let b = augment_dataset(&ds, &acfg, &rng, Parallelism::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 10);
    let single = augment_volume(&ds.items()[3].volume, &acfg, &rng.split(3)).unwrap();
    assert_eq!(single[1], a[7].volume);
    assert_eq!(a[7].targets, ds.items()[3].targets);
}
