use hearvol_core::tensor::{fft3, uniform_sample, ComplexVolume, Rng, Tensor};

pub const SIZES: [usize; 4] = [4, 8, 16, 32];
const ROUND_TRIP_TOL: f64 = 1e-4;
const PARSEVAL_TOL: f64 = 1e-5;
const LEAK_TOL: f64 = 1e-4;

fn real_volume(n: usize, seed: u64) -> ComplexVolume {
    // volumes are stored as f32, so round through it first
    let t: Tensor<f32> = uniform_sample(&mut Rng::new(seed), &[n, n, n], 0.0, 1.0);
    ComplexVolume::from_real(t.cast::<f64>()).unwrap()
}

fn energy(v: &ComplexVolume) -> f64 {
    (0..v.re.len()).map(|o| v.magnitude_sq(o)).sum()
}

pub fn round_trip_is_identity() {
    for n in SIZES {
        let v = real_volume(n, n as u64);
        let back = fft3(&fft3(&v, false).unwrap(), true).unwrap();
        let err = v
            .re
            .data()
            .iter()
            .zip(back.re.data())
            .map(|(a, b)| (a - b).abs())
            .chain(back.im.data().iter().map(|b| b.abs()))
            .fold(0.0f64, f64::max);
        assert!(err < ROUND_TRIP_TOL, "{n}^3 round trip error {err}");
    }
}

pub fn parseval_holds() {
    for n in SIZES {
        let v = real_volume(n, 100 + n as u64);
        let k = fft3(&v, false).unwrap();
        let (space, freq) = (energy(&v), energy(&k) / (n * n * n) as f64);
        let rel = (space - freq).abs() / space;
        assert!(rel < PARSEVAL_TOL, "{n}^3 Parseval relative error {rel}");
    }
}

pub fn constant_has_only_dc() {
    for n in SIZES {
        let c = 0.37;
        let v = ComplexVolume::from_real(Tensor::full(&[n, n, n], c)).unwrap();
        let k = fft3(&v, false).unwrap();
        let dc = c * (n * n * n) as f64;
        assert!((k.re.data()[0] - dc).abs() < LEAK_TOL * dc && k.im.data()[0].abs() < LEAK_TOL);
        let leak = (1..k.re.len()).map(|o| k.magnitude_sq(o).sqrt()).fold(0.0f64, f64::max);
        assert!(leak < LEAK_TOL, "{n}^3 non-DC magnitude {leak}");
    }
}
