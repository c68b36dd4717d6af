//! Parameter checkpoints.
//!
//! A checkpoint is one JSON document:
//!
//! ```text
//! {
//!   "format": "dialtrack-checkpoint",
//!   "version": 1,
//!   "dtype": "f64",
//!   "config_hash": "<sha256 of the canonical model config JSON>",
//!   "meta": { ... free-form, owned by the caller ... },
//!   "arrays": [ { "name": "...", "shape": [rows, cols], "data": [ ... ] }, ... ],
//!   "adam": null | { "config": {...}, "step": n, "first_moment": [[...]], "second_moment": [[...]] }
//! }
//! ```
//!
//! Floats are written in shortest round-trip form and parsed exactly, so a
//! save/load cycle reproduces every bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

use super::{AdamState, Matrix, ParamStore};

pub const CHECKPOINT_FORMAT: &str = "dialtrack-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ArrayRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    dtype: String,
    config_hash: String,
    meta: serde_json::Value,
    arrays: Vec<ArrayRecord>,
    adam: Option<AdamState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub meta: serde_json::Value,
    pub params: ParamStore,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let doc = Document {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            dtype: "f64".into(),
            config_hash: self.config_hash.clone(),
            meta: self.meta.clone(),
            arrays: self
                .params
                .iter()
                .map(|p| ArrayRecord {
                    name: p.name.clone(),
                    shape: [p.value.rows(), p.value.cols()],
                    data: p.value.as_slice().to_vec(),
                })
                .collect(),
            adam: self.adam.clone(),
        };
        serde_json::to_string(&doc).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
        if doc.format != CHECKPOINT_FORMAT || doc.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.dtype != "f64" {
            return Err(Error::Format(format!("unsupported dtype {}", doc.dtype)));
        }
        let mut params = ParamStore::new();
        for a in doc.arrays {
            let value = Matrix::from_vec(a.shape[0], a.shape[1], a.data)
                .map_err(|e| Error::Format(format!("array {}: {e}", a.name)))?;
            params.add(a.name, value);
        }
        if let Some(adam) = &doc.adam {
            let shapes_match = adam.first_moment.len() == params.len()
                && adam.second_moment.len() == params.len()
                && params.iter().zip(&adam.first_moment).zip(&adam.second_moment).all(
                    |((p, m), v)| m.len() == p.value.as_slice().len() && v.len() == m.len(),
                );
            if !shapes_match {
                return Err(Error::Format("optimizer moments do not match parameters".into()));
            }
        }
        Ok(Checkpoint {
            config_hash: doc.config_hash,
            meta: doc.meta,
            params,
            adam: doc.adam,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fsutil::read_to_string(path)?)
    }
}
