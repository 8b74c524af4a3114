//! Tensor files. Binary files use the safetensors layout (length-prefixed
//! JSON header of dtype/shape/offsets, then little-endian data); text files
//! hold one tensor per line as `key<TAB>dtype<TAB>shape<TAB>values`, with
//! shape written `2x3` (or `scalar`) and values space separated.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use safetensors::tensor::{Dtype, SafeTensors, TensorView};

use crate::{ParameterMap, Tensor, TensorData};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Binary(String),
    #[error("line {line}: {message}")]
    Text { line: usize, message: String },
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(String),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn to_binary(map: &ParameterMap) -> Result<Vec<u8>, FormatError> {
    let bytes: Vec<(String, Dtype, Vec<usize>, Vec<u8>)> = map
        .iter()
        .map(|(k, t)| {
            let (dtype, raw) = match &t.data {
                TensorData::F32(v) => (Dtype::F32, v.iter().flat_map(|x| x.to_le_bytes()).collect()),
                TensorData::F64(v) => (Dtype::F64, v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            };
            (k.clone(), dtype, t.shape.clone(), raw)
        })
        .collect();
    let views = bytes
        .iter()
        .map(|(k, dtype, shape, raw)| {
            TensorView::new(*dtype, shape.clone(), raw)
                .map(|v| (k.as_str(), v))
                .map_err(|e| FormatError::Binary(format!("{k}: {e:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    safetensors::serialize(views, &None::<HashMap<String, String>>).map_err(|e| FormatError::Binary(format!("{e:?}")))
}

pub fn from_binary(bytes: &[u8]) -> Result<ParameterMap, FormatError> {
    let st = SafeTensors::deserialize(bytes).map_err(|e| FormatError::Binary(format!("{e:?}")))?;
    let mut map = ParameterMap::new();
    for (name, view) in st.tensors() {
        let raw = view.data();
        let data = match view.dtype() {
            Dtype::F32 => TensorData::F32(
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
            ),
            Dtype::F64 => TensorData::F64(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
            ),
            other => return Err(FormatError::UnsupportedDtype(format!("{other:?}"))),
        };
        map.insert(
            name,
            Tensor {
                shape: view.shape().to_vec(),
                data,
            },
        );
    }
    Ok(map)
}

pub fn load_binary(path: &Path) -> Result<ParameterMap, FormatError> {
    from_binary(&std::fs::read(path).map_err(io(path))?)
}

pub fn save_binary(path: &Path, map: &ParameterMap) -> Result<(), FormatError> {
    std::fs::write(path, to_binary(map)?).map_err(io(path))
}

pub fn to_text(map: &ParameterMap) -> String {
    let mut out = String::new();
    for (k, t) in map {
        let shape = if t.shape.is_empty() {
            "scalar".to_string()
        } else {
            t.shape.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
        };
        let values = match &t.data {
            TensorData::F32(v) => v.iter().map(f32::to_string).collect::<Vec<_>>(),
            TensorData::F64(v) => v.iter().map(f64::to_string).collect::<Vec<_>>(),
        };
        let _ = writeln!(out, "{k}\t{}\t{shape}\t{}", t.data.dtype_name(), values.join(" "));
    }
    out
}

pub fn from_text(text: &str) -> Result<ParameterMap, FormatError> {
    let mut map = ParameterMap::new();
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| FormatError::Text { line: i + 1, message };
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [key, dtype, shape, values] = cols[..] else {
            return Err(err(format!("expected 4 tab-separated fields, got {}", cols.len())));
        };
        let shape: Vec<usize> = if shape == "scalar" {
            Vec::new()
        } else {
            shape
                .split('x')
                .map(|d| d.parse().map_err(|_| err(format!("bad shape '{shape}'"))))
                .collect::<Result<_, _>>()?
        };
        let words = values.split_whitespace();
        let data = match dtype {
            "f32" => TensorData::F32(
                words
                    .map(|w| w.parse().map_err(|_| err(format!("bad value '{w}'"))))
                    .collect::<Result<_, _>>()?,
            ),
            "f64" => TensorData::F64(
                words
                    .map(|w| w.parse().map_err(|_| err(format!("bad value '{w}'"))))
                    .collect::<Result<_, _>>()?,
            ),
            other => return Err(FormatError::UnsupportedDtype(other.into())),
        };
        if data.len() != shape.iter().product::<usize>() {
            return Err(err(format!("{key}: {} values for shape {shape:?}", data.len())));
        }
        if map.insert(key.to_string(), Tensor { shape, data }).is_some() {
            return Err(err(format!("duplicate key '{key}'")));
        }
    }
    Ok(map)
}

pub fn load_text(path: &Path) -> Result<ParameterMap, FormatError> {
    from_text(&std::fs::read_to_string(path).map_err(io(path))?)
}

pub fn save_text(path: &Path, map: &ParameterMap) -> Result<(), FormatError> {
    std::fs::write(path, to_text(map)).map_err(io(path))
}

fn is_text(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("txt" | "tsv"))
}

/// Picks the format from the extension: `.txt`/`.tsv` are text, anything
/// else binary.
pub fn load(path: &Path) -> Result<ParameterMap, FormatError> {
    if is_text(path) { load_text(path) } else { load_binary(path) }
}

pub fn save(path: &Path, map: &ParameterMap) -> Result<(), FormatError> {
    if is_text(path) { save_text(path, map) } else { save_binary(path, map) }
}
