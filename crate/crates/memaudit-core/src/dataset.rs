use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// How the flat observation vector should be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeTag {
    /// Plain feature vector; no spatial structure.
    Flat,
    /// Row-major image of `height * width * channels` values.
    Image {
        height: usize,
        width: usize,
        channels: usize,
    },
}

impl ShapeTag {
    pub fn dim(&self) -> Option<usize> {
        match self {
            ShapeTag::Flat => None,
            ShapeTag::Image {
                height,
                width,
                channels,
            } => Some(height * width * channels),
        }
    }
}

/// An ordered collection of fixed-dimension observations with stable ids.
///
/// Ids equal the row position at load time and are preserved by
/// [`Dataset::subset`], so reports keyed on ids survive subsetting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    /// Row-major `n x dim` values.
    data: Vec<f64>,
    dim: usize,
    ids: Vec<usize>,
    shape: ShapeTag,
    columns: Option<Vec<String>>,
}

impl Dataset {
    /// Build a dataset from row-major values. Ids are assigned positionally.
    pub fn from_rows(name: &str, data: Vec<f64>, dim: usize, shape: ShapeTag) -> Result<Dataset> {
        if dim == 0 {
            return Err(CoreError::InvalidDataset("dimension must be >= 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(CoreError::InvalidDataset(format!(
                "{} values do not form rows of dimension {dim}",
                data.len()
            )));
        }
        let n = data.len() / dim;
        if n < 2 {
            return Err(CoreError::InvalidDataset(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if let Some(d) = shape.dim() {
            if d != dim {
                return Err(CoreError::InvalidDataset(format!(
                    "image shape implies dimension {d}, rows have {dim}"
                )));
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::InvalidDataset("non-finite value".into()));
        }
        Ok(Dataset {
            name: name.into(),
            data,
            dim,
            ids: (0..n).collect(),
            shape,
            columns: None,
        })
    }

    pub fn with_columns(mut self, columns: Vec<String>) -> Result<Dataset> {
        if columns.len() != self.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: columns.len(),
            });
        }
        self.columns = Some(columns);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> ShapeTag {
        self.shape
    }

    pub fn columns(&self) -> Option<&[String]> {
        self.columns.as_deref()
    }

    /// Original id of the row at `pos`.
    pub fn id(&self, pos: usize) -> usize {
        self.ids[pos]
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn row(&self, pos: usize) -> &[f64] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Rows at the given positions, in ascending position order, with the
    /// original ids carried along.
    pub fn subset(&self, keep: &[usize]) -> Result<Dataset> {
        if keep.is_empty() {
            return Err(CoreError::InvalidSubset("empty index set".into()));
        }
        let mut positions: Vec<usize> = keep.to_vec();
        positions.sort_unstable();
        positions.dedup();
        if positions.len() != keep.len() {
            return Err(CoreError::InvalidSubset("duplicate index".into()));
        }
        if let Some(&bad) = positions.iter().find(|&&p| p >= self.n()) {
            return Err(CoreError::InvalidSubset(format!(
                "index {bad} out of range for {} rows",
                self.n()
            )));
        }
        let mut data = Vec::with_capacity(positions.len() * self.dim);
        let mut ids = Vec::with_capacity(positions.len());
        for &p in &positions {
            data.extend_from_slice(self.row(p));
            ids.push(self.ids[p]);
        }
        Ok(Dataset {
            name: self.name.clone(),
            data,
            dim: self.dim,
            ids,
            shape: self.shape,
            columns: self.columns.clone(),
        })
    }

    /// All rows except the ones at `drop` positions.
    pub fn without(&self, drop: &[usize]) -> Result<Dataset> {
        let mut mask = alloc::vec![true; self.n()];
        for &p in drop {
            if p >= self.n() {
                return Err(CoreError::InvalidSubset(format!("index {p} out of range")));
            }
            mask[p] = false;
        }
        let keep: Vec<usize> = (0..self.n()).filter(|&p| mask[p]).collect();
        self.subset(&keep)
    }

    /// Per-column mean over all rows.
    pub fn column_means(&self) -> Vec<f64> {
        let mut means = alloc::vec![0.0; self.dim];
        for row in self.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.n() as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    /// Per-column population variance (divides by n).
    pub fn column_variances(&self) -> Vec<f64> {
        let means = self.column_means();
        let mut vars = alloc::vec![0.0; self.dim];
        for row in self.rows() {
            for ((v, x), m) in vars.iter_mut().zip(row).zip(&means) {
                let d = x - m;
                *v += d * d;
            }
        }
        let n = self.n() as f64;
        vars.iter_mut().for_each(|v| *v /= n);
        vars
    }
}
