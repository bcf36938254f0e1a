// SPDX-License-Identifier: MIT OR Apache-2.0

//! Named-tensor archives in the safetensors layout: an 8-byte little-endian
//! header length, a JSON header mapping tensor names to dtype/shape/offsets,
//! then raw little-endian data.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use safetensors::tensor::{Dtype, TensorView};
use safetensors::SafeTensors;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Default, Clone)]
pub struct TensorArchive {
    tensors: BTreeMap<String, NamedTensor>,
}

/// Prefix used by `GPT2LMHeadModel` checkpoints; stripped on load.
const HF_PREFIX: &str = "transformer.";

impl TensorArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let st = SafeTensors::deserialize(bytes).map_err(|e| Error::Archive(e.to_string()))?;
        let mut tensors = BTreeMap::new();
        for (name, view) in st.tensors() {
            let data = decode(&name, &view)?;
            let key = name.strip_prefix(HF_PREFIX).unwrap_or(&name).to_string();
            tensors.insert(
                key,
                NamedTensor {
                    shape: view.shape().to_vec(),
                    data,
                },
            );
        }
        Ok(Self { tensors })
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.insert(name.into(), NamedTensor { shape, data });
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.get(name)
    }

    fn checked(&self, name: &str, shape: &[usize]) -> Result<&NamedTensor> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| Error::MissingTensor { name: name.into() })?;
        if t.shape != shape {
            return Err(Error::TensorShape {
                name: name.into(),
                expected: shape.to_vec(),
                actual: t.shape.clone(),
            });
        }
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteWeight { name: name.into() });
        }
        Ok(t)
    }

    pub fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<Array2<f32>> {
        let t = self.checked(name, &[rows, cols])?;
        Ok(Array2::from_shape_vec((rows, cols), t.data.clone()).expect("shape checked"))
    }

    pub fn vector(&self, name: &str, len: usize) -> Result<Array1<f32>> {
        let t = self.checked(name, &[len])?;
        Ok(Array1::from_vec(t.data.clone()))
    }

    /// Serialises every tensor as F32.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let raw: Vec<(String, Vec<usize>, Vec<u8>)> = self
            .tensors
            .iter()
            .map(|(k, t)| {
                let bytes = t.data.iter().flat_map(|v| v.to_le_bytes()).collect();
                (k.clone(), t.shape.clone(), bytes)
            })
            .collect();
        let mut views = Vec::with_capacity(raw.len());
        for (name, shape, bytes) in &raw {
            let view = TensorView::new(Dtype::F32, shape.clone(), bytes)
                .map_err(|e| Error::Archive(e.to_string()))?;
            views.push((name.as_str(), view));
        }
        safetensors::serialize(views, &None).map_err(|e| Error::Archive(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes()?)
    }
}

fn decode(name: &str, view: &TensorView<'_>) -> Result<Vec<f32>> {
    let data = view.data();
    match view.dtype() {
        Dtype::F32 => Ok(data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect()),
        Dtype::F64 => Ok(data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")) as f32)
            .collect()),
        other => Err(Error::UnsupportedDtype {
            name: name.into(),
            dtype: format!("{other:?}"),
        }),
    }
}
