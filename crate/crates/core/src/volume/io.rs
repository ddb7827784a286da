//! Raw little-endian blob plus a JSON sidecar header at `<path>.json`.
//!
//! ```json
//! {"dims":[nx,ny,nz],"dtype":"f32","order":"x-fastest","kind":"gray"}
//! ```
//!
//! Gray volumes are written as `f32`; masks as `u8` (0 or 1). Reading a
//! gray volume also accepts `u8` blobs, which covers 8-bit CT exports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BinaryMask, Dims, Volume};
use crate::error::{Error, Result};

pub const ORDER_X_FASTEST: &str = "x-fastest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub dtype: String,
    pub order: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_range: Option<[f32; 2]>,
}

pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_pair(path: &Path, header: &VolumeHeader, blob: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let hp = header_path(path);
    let mut text = serde_json::to_string_pretty(header)?;
    text.push('\n');
    fs::write(&hp, text).map_err(|e| Error::io(&hp, e))?;
    fs::write(path, blob).map_err(|e| Error::io(path, e))
}

fn read_pair(path: &Path) -> Result<(VolumeHeader, Vec<u8>)> {
    let hp = header_path(path);
    let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let header: VolumeHeader = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        path: hp.clone(),
        reason: e.to_string(),
    })?;
    if header.order != ORDER_X_FASTEST {
        return Err(Error::Format(format!(
            "unknown sample order {:?}",
            header.order
        )));
    }
    let elem = match header.dtype.as_str() {
        "f32" => 4,
        "u8" => 1,
        other => return Err(Error::Format(format!("unknown dtype {other:?}"))),
    };
    let blob = fs::read(path).map_err(|e| Error::io(path, e))?;
    let dims = Dims::new(header.dims[0], header.dims[1], header.dims[2]);
    if dims.is_empty() || blob.len() != dims.len() * elem {
        return Err(Error::Corrupt {
            path: path.to_path_buf(),
            reason: format!(
                "header dims {:?} ({}) need {} bytes, blob has {}",
                header.dims,
                header.dtype,
                dims.len() * elem,
                blob.len()
            ),
        });
    }
    Ok((header, blob))
}

pub fn write_volume(path: &Path, vol: &Volume) -> Result<()> {
    let d = vol.dims();
    let header = VolumeHeader {
        dims: d.as_array(),
        dtype: "f32".into(),
        order: ORDER_X_FASTEST.into(),
        kind: "gray".into(),
        value_range: vol.value_range().map(|(a, b)| [a, b]),
    };
    let mut blob = Vec::with_capacity(vol.len() * 4);
    for v in vol.data() {
        blob.extend_from_slice(&v.to_le_bytes());
    }
    write_pair(path, &header, &blob)
}

pub fn read_volume(path: &Path) -> Result<Volume> {
    let (header, blob) = read_pair(path)?;
    if header.kind != "gray" {
        return Err(Error::Format(format!(
            "{} holds a {:?} volume, expected gray",
            path.display(),
            header.kind
        )));
    }
    let dims = Dims::new(header.dims[0], header.dims[1], header.dims[2]);
    let data: Vec<f32> = match header.dtype.as_str() {
        "f32" => blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        _ => blob.iter().map(|&b| b as f32).collect(),
    };
    let vol = Volume::new(dims, data).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(vol.with_value_range(header.value_range.map(|[a, b]| (a, b))))
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let header = VolumeHeader {
        dims: mask.dims().as_array(),
        dtype: "u8".into(),
        order: ORDER_X_FASTEST.into(),
        kind: "mask".into(),
        value_range: None,
    };
    write_pair(path, &header, &mask.to_bytes())
}

pub fn read_mask(path: &Path) -> Result<BinaryMask> {
    let (header, blob) = read_pair(path)?;
    if header.kind != "mask" || header.dtype != "u8" {
        return Err(Error::Format(format!(
            "{} holds a {:?}/{} volume, expected mask/u8",
            path.display(),
            header.kind,
            header.dtype
        )));
    }
    let dims = Dims::new(header.dims[0], header.dims[1], header.dims[2]);
    let mut mask = BinaryMask::empty(dims);
    for (i, &b) in blob.iter().enumerate() {
        if b != 0 {
            mask.set(i, true);
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gray_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ramp.vol");
        let v = Volume::from_fn(Dims::cube(8), |x, y, z| (x + 8 * y + 64 * z) as f32);
        write_volume(&p, &v).unwrap();
        let back = read_volume(&p).unwrap();
        assert_eq!(back.data(), v.data());
        assert_eq!(back.data()[511], 511.0);
    }

    #[test]
    fn mask_round_trip_keeps_popcount() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.mask");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = BinaryMask::from_fn(Dims::cube(32), |_, _, _| rng.gen_bool(0.3));
        write_mask(&p, &m).unwrap();
        let back = read_mask(&p).unwrap();
        assert_eq!(back.count_ones(), m.count_ones());
        assert_eq!(back, m);
    }

    #[test]
    fn short_blob_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.vol");
        let h = VolumeHeader {
            dims: [2, 2, 2],
            dtype: "f32".into(),
            order: ORDER_X_FASTEST.into(),
            kind: "gray".into(),
            value_range: None,
        };
        fs::write(header_path(&p), serde_json::to_string(&h).unwrap()).unwrap();
        fs::write(&p, vec![0u8; 7 * 4]).unwrap();
        assert!(matches!(read_volume(&p), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn unknown_dtype_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.vol");
        let text = r#"{"dims":[2,2,2],"dtype":"f64","order":"x-fastest","kind":"gray"}"#;
        fs::write(header_path(&p), text).unwrap();
        fs::write(&p, vec![0u8; 64]).unwrap();
        assert!(matches!(read_volume(&p), Err(Error::Format(_))));
    }

    #[test]
    fn u8_gray_is_widened() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ct.raw");
        let text = r#"{"dims":[2,1,1],"dtype":"u8","order":"x-fastest","kind":"gray"}"#;
        fs::write(header_path(&p), text).unwrap();
        fs::write(&p, [10u8, 200]).unwrap();
        assert_eq!(read_volume(&p).unwrap().data(), &[10.0, 200.0]);
    }
}
