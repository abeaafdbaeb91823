//! Minimal NIfTI-1 single-file reader.
//!
//! Supported subset: little-endian `.nii` (magic `n+1\0`), uncompressed,
//! 3D, datatype FLOAT32 (16) or INT16 (4). Only `sizeof_hdr`, `dim`,
//! `datatype`, `pixdim`, `vox_offset`, `scl_slope`, `scl_inter` and `magic`
//! are honored. Anything else fails loudly.
//!
//! NIfTI stores x fastest; the returned tensor is `[nz, ny, nx]` so the
//! buffer order is unchanged, and spacing is reordered to match.

use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use super::Volume;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const HEADER_LEN: usize = 348;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

/// Parsed subset of the header.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
}

pub fn parse_header(bytes: &[u8]) -> Result<NiftiHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "truncated NIfTI header: {} of {HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    let sizeof_hdr = LittleEndian::read_i32(&bytes[0..4]);
    if sizeof_hdr != HEADER_LEN as i32 {
        if sizeof_hdr.swap_bytes() == HEADER_LEN as i32 {
            return Err(Error::Unsupported("big-endian NIfTI".into()));
        }
        return Err(Error::Format(format!("sizeof_hdr is {sizeof_hdr}, expected 348")));
    }
    match &bytes[344..348] {
        b"n+1\0" => {}
        b"ni1\0" => {
            return Err(Error::Unsupported(
                "header/image pair (.hdr/.img) NIfTI; only single-file .nii is supported".into(),
            ))
        }
        m => return Err(Error::Format(format!("bad NIfTI magic {m:?}"))),
    }
    let mut dim = [0i16; 8];
    LittleEndian::read_i16_into(&bytes[40..56], &mut dim);
    let mut pixdim = [0f32; 8];
    LittleEndian::read_f32_into(&bytes[76..108], &mut pixdim);
    Ok(NiftiHeader {
        dim,
        datatype: LittleEndian::read_i16(&bytes[70..72]),
        pixdim,
        vox_offset: LittleEndian::read_f32(&bytes[108..112]),
        scl_slope: LittleEndian::read_f32(&bytes[112..116]),
        scl_inter: LittleEndian::read_f32(&bytes[116..120]),
    })
}

/// Parses a complete `.nii` byte buffer. The volume id is left empty.
pub fn decode_nifti(bytes: &[u8]) -> Result<Volume> {
    let h = parse_header(bytes)?;
    let ndim = h.dim[0];
    let extra_axes_trivial = h.dim[4..].iter().take((ndim.max(3) - 3) as usize).all(|&d| d == 1);
    if !(3..=7).contains(&ndim) || !extra_axes_trivial {
        return Err(Error::Unsupported(format!("only 3D volumes are supported, dim = {:?}", h.dim)));
    }
    if h.dim[1..4].iter().any(|&d| d < 1) {
        return Err(Error::Format(format!("non-positive extent in dim {:?}", h.dim)));
    }
    let (nx, ny, nz) = (h.dim[1] as usize, h.dim[2] as usize, h.dim[3] as usize);
    let n = nx * ny * nz;
    let width = match h.datatype {
        DT_FLOAT32 => 4,
        DT_INT16 => 2,
        dt => return Err(Error::Unsupported(format!("NIfTI datatype {dt}"))),
    };
    let offset = if h.vox_offset >= HEADER_LEN as f32 { h.vox_offset as usize } else { 352 };
    let need = offset + n * width;
    if bytes.len() < need {
        return Err(Error::io(
            "<nifti payload>",
            std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                format!("NIfTI payload truncated: {} of {need} bytes", bytes.len()),
            ),
        ));
    }
    let raw = &bytes[offset..need];
    let mut values: Vec<f32> = match h.datatype {
        DT_FLOAT32 => {
            let mut v = vec![0f32; n];
            LittleEndian::read_f32_into(raw, &mut v);
            v
        }
        _ => {
            let mut v = vec![0i16; n];
            LittleEndian::read_i16_into(raw, &mut v);
            v.into_iter().map(f32::from).collect()
        }
    };
    if h.scl_slope != 0.0 && h.scl_slope.is_finite() {
        let (a, b) = (h.scl_slope, if h.scl_inter.is_finite() { h.scl_inter } else { 0.0 });
        values.iter_mut().for_each(|x| *x = a * *x + b);
    }
    let spacing = [h.pixdim[3], h.pixdim[2], h.pixdim[1]].map(|p| if p > 0.0 { p } else { 1.0 });
    Volume::new("", Tensor::from_vec(&[nz, ny, nx], values)?, spacing)
}

/// Reads a `.nii` file; the id is the file stem.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_name()
        .and_then(|s| s.to_str())
        .map(|s| s.trim_end_matches(".nii").to_string())
        .unwrap_or_default();
    match decode_nifti(&bytes) {
        Ok(v) => Ok(v.with_id(id)),
        Err(Error::Io { source, .. }) => Err(Error::io(path, source)),
        Err(e) => Err(e),
    }
}
