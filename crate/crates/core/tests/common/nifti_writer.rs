//! Minimal NIfTI-1 writer used only to produce test fixtures.
//!
//! Written byte by byte from the published header layout, independent of the
//! reader under test.

pub enum Payload<'a> {
    F32(&'a [f32]),
    I16(&'a [i16]),
}

pub struct Fixture<'a> {
    pub dims: [i16; 3],
    pub pixdim: [f32; 3],
    pub slope: f32,
    pub inter: f32,
    pub magic: &'a [u8; 4],
    pub payload: Payload<'a>,
}

pub fn write(f: &Fixture) -> Vec<u8> {
    let mut h = vec![0u8; 348];
    h[0..4].copy_from_slice(&348i32.to_le_bytes());
    let dim: [i16; 8] = [3, f.dims[0], f.dims[1], f.dims[2], 1, 1, 1, 1];
    for (i, d) in dim.iter().enumerate() {
        h[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_le_bytes());
    }
    let (datatype, bitpix): (i16, i16) = match f.payload {
        Payload::F32(_) => (16, 32),
        Payload::I16(_) => (4, 16),
    };
    h[70..72].copy_from_slice(&datatype.to_le_bytes());
    h[72..74].copy_from_slice(&bitpix.to_le_bytes());
    let pixdim: [f32; 8] = [1.0, f.pixdim[0], f.pixdim[1], f.pixdim[2], 0.0, 0.0, 0.0, 0.0];
    for (i, p) in pixdim.iter().enumerate() {
        h[76 + 4 * i..80 + 4 * i].copy_from_slice(&p.to_le_bytes());
    }
    h[108..112].copy_from_slice(&352f32.to_le_bytes());
    h[112..116].copy_from_slice(&f.slope.to_le_bytes());
    h[116..120].copy_from_slice(&f.inter.to_le_bytes());
    h[344..348].copy_from_slice(f.magic);
    // 4-byte extension flag, all zero
    h.extend_from_slice(&[0, 0, 0, 0]);
    match f.payload {
        Payload::F32(v) => v.iter().for_each(|x| h.extend_from_slice(&x.to_le_bytes())),
        Payload::I16(v) => v.iter().for_each(|x| h.extend_from_slice(&x.to_le_bytes())),
    }
    h
}
