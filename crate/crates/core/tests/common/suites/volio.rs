use crate::common::nifti_writer::{self, Fixture, Payload};
use hearvol_core::error::Error;
use hearvol_core::tensor::{uniform_sample, Rng};
use hearvol_core::volio::phantom::{make_phantom_detailed, PhantomConfig};
use hearvol_core::volio::{
    self, decode_nifti, load_directory, read_labels, read_nifti, read_volume, write_labels, write_volume,
    Provenance, TargetPair, Volume,
};

fn float_fixture(magic: &[u8; 4], values: &[f32]) -> Vec<u8> {
    nifti_writer::write(&Fixture {
        dims: [4, 4, 4],
        pixdim: [0.5, 1.0, 2.0],
        slope: 0.0,
        inter: 0.0,
        magic,
        payload: Payload::F32(values),
    })
}

pub fn nifti_float32_fixture() {
    let values: Vec<f32> = (0..64).map(|i| i as f32).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan01.nii");
    std::fs::write(&path, float_fixture(b"n+1\0", &values)).unwrap();
    let v = read_nifti(&path).unwrap();
    assert_eq!(v.id, "scan01");
    assert_eq!(v.shape(), [4, 4, 4]);
    assert_eq!(v.data().data(), values.as_slice());
    // pixdim is (x, y, z); the volume axes are (z, y, x)
    assert_eq!(v.spacing, [2.0, 1.0, 0.5]);
}

pub fn nifti_int16_with_scaling() {
    let raw: Vec<i16> = (0..64).map(|i| i as i16 - 20).collect();
    let bytes = nifti_writer::write(&Fixture {
        dims: [4, 4, 4],
        pixdim: [1.0; 3],
        slope: 2.0,
        inter: 1.0,
        magic: b"n+1\0",
        payload: Payload::I16(&raw),
    });
    let v = decode_nifti(&bytes).unwrap();
    for (&r, &x) in raw.iter().zip(v.data().data()) {
        assert_eq!(x, 2.0 * r as f32 + 1.0);
    }
}

pub fn nifti_anisotropic_axis_order() {
    let values: Vec<f32> = (0..4 * 5 * 6).map(|i| i as f32).collect();
    let bytes = nifti_writer::write(&Fixture {
        dims: [6, 5, 4],
        pixdim: [1.0; 3],
        slope: 0.0,
        inter: 0.0,
        magic: b"n+1\0",
        payload: Payload::F32(&values),
    });
    let v = decode_nifti(&bytes).unwrap();
    assert_eq!(v.shape(), [4, 5, 6]);
    // voxel (x=1, y=2, z=3) sits at x + nx*(y + ny*z)
    assert_eq!(v.data().get(&[3, 2, 1]).unwrap(), (1 + 6 * (2 + 5 * 3)) as f32);
}

pub fn nifti_pair_magic_is_unsupported() {
    let bytes = float_fixture(b"ni1\0", &[0.0; 64]);
    assert!(matches!(decode_nifti(&bytes), Err(Error::Unsupported(_))));
}

pub fn nifti_bad_magic_is_format_error() {
    let bytes = float_fixture(b"xyz\0", &[0.0; 64]);
    assert!(matches!(decode_nifti(&bytes), Err(Error::Format(_))));
}

pub fn nifti_truncated_is_io_error() {
    let mut bytes = float_fixture(b"n+1\0", &[0.0; 64]);
    bytes.truncate(bytes.len() - 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.nii");
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(read_nifti(&path), Err(Error::Io { .. })));
}

pub fn nifti_unsupported_datatype_and_dim() {
    let mut bytes = float_fixture(b"n+1\0", &[0.0; 64]);
    bytes[70..72].copy_from_slice(&64i16.to_le_bytes());
    assert!(matches!(decode_nifti(&bytes), Err(Error::Unsupported(_))));
    let mut bytes = float_fixture(b"n+1\0", &[0.0; 64]);
    bytes[40..42].copy_from_slice(&4i16.to_le_bytes());
    bytes[48..50].copy_from_slice(&2i16.to_le_bytes());
    assert!(matches!(decode_nifti(&bytes), Err(Error::Unsupported(_))));
}

pub fn internal_format_round_trip_is_bit_exact() {
    let mut rng = Rng::new(12);
    let v = Volume::new("vol_a", uniform_sample(&mut rng, &[8, 8, 8], -3.0, 3.0), [0.9, 1.1, 2.5]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = write_volume(&v, dir.path()).unwrap();
    let back = read_volume(&path).unwrap();
    assert_eq!(back.id, v.id);
    assert_eq!(back.spacing, v.spacing);
    let a: Vec<u32> = v.data().data().iter().map(|x| x.to_bits()).collect();
    let b: Vec<u32> = back.data().data().iter().map(|x| x.to_bits()).collect();
    assert_eq!(a, b);
}

pub fn internal_format_detects_corruption() {
    let v = Volume::new("c", hearvol_core::Tensor::zeros(&[4, 4, 4]), [1.0; 3]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = write_volume(&v, dir.path()).unwrap();
    let payload = dir.path().join("c.f32");
    let mut bytes = std::fs::read(&payload).unwrap();
    bytes.pop();
    std::fs::write(&payload, bytes).unwrap();
    assert!(matches!(read_volume(&path), Err(Error::Corruption { .. })));
}

pub fn labels_csv_and_directory_loading() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Rng::new(4);
    for id in ["b", "a"] {
        let v = Volume::new(id, uniform_sample(&mut rng, &[4, 4, 4], 0.0, 1.0), [1.0; 3]).unwrap();
        write_volume(&v, dir.path()).unwrap();
    }
    let labels = dir.path().join("labels.csv");
    write_labels(
        &labels,
        [("a", TargetPair::new(10.0, 20.0).unwrap()), ("b", TargetPair::new(30.5, 40.25).unwrap())],
    )
    .unwrap();
    let text = std::fs::read_to_string(&labels).unwrap();
    assert!(text.starts_with("id,pt500,pt4000\n"));
    let parsed = read_labels(&labels).unwrap();
    assert_eq!(parsed["b"], TargetPair::new(30.5, 40.25).unwrap());
    let ds = load_directory(dir.path(), &labels, Provenance::External).unwrap();
    assert_eq!(ds.ids(), vec!["a", "b"]);
    assert_eq!(ds.items()[1].targets.pt4000, 40.25);
}

pub fn labels_wrong_header_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("l.csv");
    std::fs::write(&p, "name,a,b\nx,1,2\n").unwrap();
    assert!(matches!(read_labels(&p), Err(Error::Format(_))));
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn phantom_thickness_drives_pt4000() {
    let cfg = PhantomConfig::default();
    let root = Rng::new(500);
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for i in 0..500 {
        let p = make_phantom_detailed(&mut root.split(i), &cfg, "p").unwrap();
        t.push(p.geometry.thickness);
        y.push(p.targets.pt4000 as f64);
    }
    let r = pearson(&t, &y);
    assert!(r < -0.9, "pearson {r}");
}

pub fn phantoms_normalize() {
    let cfg = PhantomConfig::default();
    let p = make_phantom_detailed(&mut Rng::new(1), &cfg, "p").unwrap();
    let n = volio::normalize_volume(&p.volume).unwrap();
    let (lo, hi) = n.data().min_max();
    assert_eq!((lo, hi), (0.0, 1.0));
}
