//! Versioned JSON documents for model parameters.
//!
//! Each tensor is stored as a flat array with its name and shape, so loading
//! can reject a file whose layout does not match the declared architecture.

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::ParamSet;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ParamIoError {
    #[error("expected a `{expected}` document, found `{found}`")]
    WrongKind { expected: String, found: String },
    #[error("unsupported parameter format version {0}")]
    UnsupportedVersion(u32),
    #[error("tensor {index}: expected `{expected}` {expected_shape:?}, found `{found}` {found_shape:?}")]
    ShapeMismatch {
        index: usize,
        expected: String,
        expected_shape: Vec<usize>,
        found: String,
        found_shape: Vec<usize>,
    },
    #[error("expected {expected} tensors, found {found}")]
    TensorCount { expected: usize, found: usize },
    #[error("tensor `{0}` holds data inconsistent with its shape or non-finite values")]
    BadData(String),
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDocument<C> {
    pub kind: String,
    pub version: u32,
    pub config: C,
    pub tensors: Vec<NamedTensor>,
}

/// Parameters whose tensors carry stable names and shapes.
pub trait NamedParams: ParamSet {
    type Config: Serialize + DeserializeOwned + Clone;
    const KIND: &'static str;

    /// Names and shapes, in the same order as [`ParamSet::tensors`].
    fn tensor_specs(&self) -> Vec<(String, Vec<usize>)>;
    fn config(&self) -> &Self::Config;
    /// Zero-valued parameters with the layout `config` describes.
    fn zeros_for(config: &Self::Config) -> Result<Self, String>;

    fn to_document(&self) -> ParamDocument<Self::Config> {
        let tensors = self
            .tensor_specs()
            .into_iter()
            .zip(self.tensors())
            .map(|((name, shape), data)| NamedTensor {
                name,
                shape,
                data: data.to_vec(),
            })
            .collect();
        ParamDocument {
            kind: Self::KIND.to_string(),
            version: FORMAT_VERSION,
            config: self.config().clone(),
            tensors,
        }
    }

    fn from_document(doc: ParamDocument<Self::Config>) -> Result<Self, ParamIoError> {
        if doc.kind != Self::KIND {
            return Err(ParamIoError::WrongKind {
                expected: Self::KIND.into(),
                found: doc.kind,
            });
        }
        if doc.version != FORMAT_VERSION {
            return Err(ParamIoError::UnsupportedVersion(doc.version));
        }
        let mut params = Self::zeros_for(&doc.config).map_err(ParamIoError::Architecture)?;
        let specs = params.tensor_specs();
        if specs.len() != doc.tensors.len() {
            return Err(ParamIoError::TensorCount {
                expected: specs.len(),
                found: doc.tensors.len(),
            });
        }
        for (index, ((name, shape), t)) in specs.iter().zip(&doc.tensors).enumerate() {
            if *name != t.name || *shape != t.shape {
                return Err(ParamIoError::ShapeMismatch {
                    index,
                    expected: name.clone(),
                    expected_shape: shape.clone(),
                    found: t.name.clone(),
                    found_shape: t.shape.clone(),
                });
            }
            let n: usize = shape.iter().product();
            if t.data.len() != n || t.data.iter().any(|v| !v.is_finite()) {
                return Err(ParamIoError::BadData(t.name.clone()));
            }
        }
        for (dst, t) in params.tensors_mut().into_iter().zip(&doc.tensors) {
            dst.copy_from_slice(&t.data);
        }
        Ok(params)
    }

    fn to_json(&self) -> Result<String, ParamIoError> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    fn from_json(text: &str) -> Result<Self, ParamIoError> {
        Self::from_document(serde_json::from_str(text)?)
    }
}
