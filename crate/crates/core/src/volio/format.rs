//! Internal volume format: `<stem>.json` sidecar plus `<stem>.f32` payload.
//!
//! The sidecar holds `{"id", "shape", "spacing", "payload"}`; the payload is
//! the raw little-endian f32 buffer in `[D, H, W]` row-major order.

use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use super::Volume;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    id: String,
    shape: [usize; 3],
    spacing: [f32; 3],
    payload: String,
}

/// Writes `v` to `<dir>/<id>.json` and `<dir>/<id>.f32`, returning the sidecar path.
pub fn write_volume(v: &Volume, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let payload_name = format!("{}.f32", v.id);
    let sidecar = Sidecar {
        id: v.id.clone(),
        shape: v.shape(),
        spacing: v.spacing,
        payload: payload_name.clone(),
    };
    let mut bytes = vec![0u8; v.data().len() * 4];
    LittleEndian::write_f32_into(v.data().data(), &mut bytes);
    let payload_path = dir.join(&payload_name);
    std::fs::write(&payload_path, bytes).map_err(|e| Error::io(&payload_path, e))?;
    let json_path = dir.join(format!("{}.json", v.id));
    std::fs::write(&json_path, serde_json::to_vec_pretty(&sidecar)?).map_err(|e| Error::io(&json_path, e))?;
    Ok(json_path)
}

/// Reads a volume from its `.json` sidecar path.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let sidecar: Sidecar = serde_json::from_slice(&text)?;
    let payload_path = path.parent().unwrap_or(Path::new(".")).join(&sidecar.payload);
    let bytes = std::fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
    let n: usize = sidecar.shape.iter().product();
    if bytes.len() != n * 4 {
        return Err(Error::Corruption {
            path: payload_path,
            reason: format!("payload has {} bytes, shape {:?} needs {}", bytes.len(), sidecar.shape, n * 4),
        });
    }
    let mut values = vec![0f32; n];
    LittleEndian::read_f32_into(&bytes, &mut values);
    Volume::new(sidecar.id, Tensor::from_vec(&sidecar.shape, values)?, sidecar.spacing)
}

/// Sidecar paths in `dir`, sorted by file name.
pub fn list_volumes(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| match p.extension().and_then(|e| e.to_str()) {
            Some("json") => p.with_extension("f32").exists(),
            Some("nii") => true,
            _ => false,
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Reads either format, dispatching on the extension.
pub fn read_any(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("nii") => super::read_nifti(path),
        _ => read_volume(path),
    }
}
