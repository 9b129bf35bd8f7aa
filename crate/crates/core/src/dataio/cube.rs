use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HyperCube, LabelMap};
use crate::{Error, Result};

/// JSON header of the cube container.
///
/// `data` and `labels` are paths relative to the header's directory. The data
/// payload is raw little-endian `f64`, band-interleaved by pixel, pixels
/// row-major; the label payload is raw little-endian `i32`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeHeader {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub dtype: String,
    pub order: String,
    pub data: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
}

fn sibling(header_path: &Path, rel: &str) -> PathBuf {
    header_path.parent().unwrap_or_else(|| Path::new("")).join(rel)
}

pub fn read_cube(header_path: impl AsRef<Path>) -> Result<(HyperCube, Option<LabelMap>)> {
    let header_path = header_path.as_ref();
    let text = fs::read_to_string(header_path)?;
    let header: CubeHeader =
        serde_json::from_str(&text).map_err(|e| Error::format(header_path, e.to_string()))?;
    if header.dtype != "f64le" {
        return Err(Error::format(header_path, format!("unsupported dtype {:?}", header.dtype)));
    }
    if header.order != "bip" {
        return Err(Error::format(header_path, format!("unsupported order {:?}", header.order)));
    }
    let (h, w, b) = (header.height, header.width, header.bands);
    if h == 0 || w == 0 || b == 0 {
        return Err(Error::format(header_path, "dimensions must be positive"));
    }

    let data_path = sibling(header_path, &header.data);
    let bytes = fs::read(&data_path)?;
    let expected = h * w * b;
    if bytes.len() != expected * 8 {
        return Err(Error::format(
            &data_path,
            format!(
                "header declares {h}×{w}×{b} = {expected} values, payload holds {} bytes ({} values)",
                bytes.len(),
                bytes.len() as f64 / 8.0
            ),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(&data_path, format!("non-finite value at index {i}")));
    }
    let cube = HyperCube::new(h, w, b, values)?;

    let labels = match &header.labels {
        None => None,
        Some(rel) => {
            let label_path = sibling(header_path, rel);
            let bytes = fs::read(&label_path)?;
            if bytes.len() != h * w * 4 {
                return Err(Error::format(
                    &label_path,
                    format!("expected {} labels, payload holds {} bytes", h * w, bytes.len()),
                ));
            }
            let labels = bytes
                .chunks_exact(4)
                .map(|c| i32::from_le_bytes(c.try_into().expect("4-byte chunk")))
                .map(|v| u32::try_from(v).map_err(|_| Error::format(&label_path, format!("negative label {v}"))))
                .collect::<Result<Vec<u32>>>()?;
            Some(LabelMap::new(h, w, labels)?)
        }
    };
    Ok((cube, labels))
}

/// Writes a cube container: the header at `header_path`, payloads next to it
/// as `<stem>.f64` and (when given) `<stem>.labels.i32`.
pub fn write_cube(header_path: impl AsRef<Path>, cube: &HyperCube, labels: Option<&LabelMap>) -> Result<()> {
    let header_path = header_path.as_ref();
    let stem = header_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::InvalidInput(format!("bad header path {}", header_path.display())))?;
    let data_name = format!("{stem}.f64");
    let mut payload = Vec::with_capacity(cube.values.len() * 8);
    for v in &cube.values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(sibling(header_path, &data_name), payload)?;

    let label_name = match labels {
        None => None,
        Some(map) => {
            if (map.height, map.width) != (cube.height, cube.width) {
                return Err(Error::InvalidInput("label map dimensions differ from the cube".into()));
            }
            let name = format!("{stem}.labels.i32");
            let mut payload = Vec::with_capacity(map.labels.len() * 4);
            for &l in &map.labels {
                let v = i32::try_from(l).map_err(|_| Error::InvalidInput(format!("label {l} exceeds i32")))?;
                payload.extend_from_slice(&v.to_le_bytes());
            }
            fs::write(sibling(header_path, &name), payload)?;
            Some(name)
        }
    };
    let header = CubeHeader {
        height: cube.height,
        width: cube.width,
        bands: cube.bands,
        dtype: "f64le".into(),
        order: "bip".into(),
        data: data_name,
        labels: label_name,
    };
    fs::write(header_path, serde_json::to_string_pretty(&header)?)?;
    Ok(())
}
