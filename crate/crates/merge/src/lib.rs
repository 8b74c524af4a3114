//! Linear merging of two parameter maps:
//! `out = α·v + (1 − α)·t` on keys both maps share (and the filter accepts),
//! with `v`'s other keys copied through untouched.

pub mod format;

use std::collections::BTreeMap;

use globset::{Glob, GlobSet, GlobSetBuilder};

pub use format::{FormatError, load, load_binary, load_text, save, save_binary, save_text};

pub const DEFAULT_ALPHA: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            Self::F32(v) => v.len(),
            Self::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            Self::F32(v) => f64::from(v[i]),
            Self::F64(v) => v[i],
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    pub fn dtype_name(&self) -> &'static str {
        match self {
            Self::F32(_) => "f32",
            Self::F64(_) => "f64",
        }
    }

    fn all_finite(&self) -> bool {
        match self {
            Self::F32(v) => v.iter().all(|x| x.is_finite()),
            Self::F64(v) => v.iter().all(|x| x.is_finite()),
        }
    }

    /// Same storage type as `self`, new values.
    fn with_values(&self, values: Vec<f64>) -> Self {
        match self {
            Self::F32(_) => Self::F32(values.into_iter().map(|x| x as f32).collect()),
            Self::F64(_) => Self::F64(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl Tensor {
    /// Panics when the element count does not match the shape.
    pub fn f32(shape: Vec<usize>, data: Vec<f32>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Self {
            shape,
            data: TensorData::F32(data),
        }
    }

    pub fn f64(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Self {
            shape,
            data: TensorData::F64(data),
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self::f64(Vec::new(), vec![v])
    }
}

pub type ParameterMap = BTreeMap<String, Tensor>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MergeError {
    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("bad key filter: {0}")]
    BadFilter(String),
    #[error("shape mismatch on '{key}': {left:?} vs {right:?}")]
    ShapeMismatch {
        key: String,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("non-finite value in '{key}'")]
    NonFiniteInput { key: String },
}

#[derive(Debug, Clone)]
pub struct MergeSpec {
    alpha: f64,
    filter: Option<GlobSet>,
}

impl MergeSpec {
    pub fn new(alpha: f64) -> Result<Self, MergeError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(MergeError::InvalidAlpha(alpha));
        }
        Ok(Self { alpha, filter: None })
    }

    /// Only keys matching at least one glob are interpolated.
    pub fn with_key_filter<S: AsRef<str>>(mut self, globs: &[S]) -> Result<Self, MergeError> {
        if globs.is_empty() {
            self.filter = None;
            return Ok(self);
        }
        let mut b = GlobSetBuilder::new();
        for g in globs {
            b.add(Glob::new(g.as_ref()).map_err(|e| MergeError::BadFilter(e.to_string()))?);
        }
        self.filter = Some(b.build().map_err(|e| MergeError::BadFilter(e.to_string()))?);
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn accepts(&self, key: &str) -> bool {
        self.filter.as_ref().is_none_or(|f| f.is_match(key))
    }
}

impl Default for MergeSpec {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            filter: None,
        }
    }
}

/// One element of the merge, computed in f64 as `t + α·(v − t)` and clamped
/// to the inputs' range so rounding can never step outside it.
pub fn lerp(alpha: f64, v: f64, t: f64) -> f64 {
    if alpha == 1.0 || v == t {
        return v;
    }
    if alpha == 0.0 {
        return t;
    }
    let diff = v - t;
    let x = if diff.is_finite() {
        t + alpha * diff
    } else {
        alpha * v + (1.0 - alpha) * t
    };
    x.clamp(v.min(t), v.max(t))
}

pub fn interpolate(theta_v: &ParameterMap, theta_t: &ParameterMap, spec: &MergeSpec) -> Result<ParameterMap, MergeError> {
    let mut out = ParameterMap::new();
    for (key, v) in theta_v {
        if !v.data.all_finite() {
            return Err(MergeError::NonFiniteInput { key: key.clone() });
        }
        let shared = theta_t.get(key).filter(|_| spec.accepts(key));
        let Some(t) = shared else {
            out.insert(key.clone(), v.clone());
            continue;
        };
        if t.shape != v.shape || t.data.len() != v.data.len() {
            return Err(MergeError::ShapeMismatch {
                key: key.clone(),
                left: v.shape.clone(),
                right: t.shape.clone(),
            });
        }
        if !t.data.all_finite() {
            return Err(MergeError::NonFiniteInput { key: key.clone() });
        }
        if spec.alpha == 1.0 {
            out.insert(key.clone(), v.clone());
            continue;
        }
        let merged = (0..v.data.len())
            .map(|i| lerp(spec.alpha, v.data.get(i), t.data.get(i)))
            .collect();
        out.insert(
            key.clone(),
            Tensor {
                shape: v.shape.clone(),
                data: v.data.with_values(merged),
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_example() {
        let v = ParameterMap::from([("w".into(), Tensor::scalar(1.0))]);
        let t = ParameterMap::from([("w".into(), Tensor::scalar(2.0))]);
        let out = interpolate(&v, &t, &MergeSpec::new(0.8).unwrap()).unwrap();
        assert_eq!(out["w"].data.get(0), 1.2);
    }

    #[test]
    fn alpha_bounds() {
        assert!(MergeSpec::new(1.5).is_err());
        assert!(MergeSpec::new(f64::NAN).is_err());
        assert!(MergeSpec::new(0.0).is_ok());
    }

    #[test]
    fn filter_matching() {
        let s = MergeSpec::new(0.5).unwrap().with_key_filter(&["language_model.*"]).unwrap();
        assert!(s.accepts("language_model.layers.0.w"));
        assert!(!s.accepts("vision_tower.w"));
        assert!(MergeSpec::new(0.5).unwrap().with_key_filter(&["["]).is_err());
    }
}
