use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One coordinate-format entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub value: f64,
}

/// Coordinate-format three-mode tensor.
///
/// Entries are kept sorted by `(k, i, j)` and every coordinate is unique,
/// so two tensors with the same nonzeros compare equal regardless of the
/// order they were assembled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseTensor3 {
    dims: [usize; 3],
    entries: Vec<Entry>,
}

impl SparseTensor3 {
    /// Validates bounds and rejects duplicate coordinates.
    pub fn new(dims: [usize; 3], mut entries: Vec<Entry>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::dimension(format!(
                "tensor dimensions must be positive, got {dims:?}"
            )));
        }
        for e in &entries {
            if e.i >= dims[0] || e.j >= dims[1] || e.k >= dims[2] {
                return Err(Error::dimension(format!(
                    "entry ({}, {}, {}) outside {dims:?}",
                    e.i, e.j, e.k
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::Degenerate(format!(
                    "non-finite value at ({}, {}, {})",
                    e.i, e.j, e.k
                )));
            }
        }
        entries.sort_by_key(|e| (e.k, e.i, e.j));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].i, w[0].j, w[0].k) == (w[1].i, w[1].j, w[1].k))
        {
            return Err(Error::dimension(format!(
                "duplicate coordinate ({}, {}, {})",
                w[0].i, w[0].j, w[0].k
            )));
        }
        Ok(Self { dims, entries })
    }

    /// Builds a binary tensor from coordinate triples; repeated triples
    /// collapse to a single 1.0 entry.
    pub fn binary(dims: [usize; 3], mut coords: Vec<(usize, usize, usize)>) -> Result<Self> {
        coords.sort_unstable_by_key(|&(i, j, k)| (k, i, j));
        coords.dedup();
        let entries = coords
            .into_iter()
            .map(|(i, j, k)| Entry {
                i,
                j,
                k,
                value: 1.0,
            })
            .collect();
        Self::new(dims, entries)
    }

    /// Dense constructor, `values[i][j][k]`, skipping exact zeros.
    pub fn from_dense(values: &[Vec<Vec<f64>>]) -> Result<Self> {
        let i_dim = values.len();
        let j_dim = values.first().map_or(0, |v| v.len());
        let k_dim = values
            .first()
            .and_then(|v| v.first())
            .map_or(0, |v| v.len());
        let mut entries = Vec::new();
        for (i, plane) in values.iter().enumerate() {
            for (j, fibre) in plane.iter().enumerate() {
                for (k, &value) in fibre.iter().enumerate() {
                    if value != 0.0 {
                        entries.push(Entry { i, j, k, value });
                    }
                }
            }
        }
        Self::new([i_dim, j_dim, k_dim], entries)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|e| e.value * e.value).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(k, i, j), |e| (e.k, e.i, e.j))
            .map_or(0.0, |p| self.entries[p].value)
    }

    /// True when every cell of the index space holds an entry.
    pub fn is_fully_populated(&self) -> bool {
        self.entries.len() == self.dims.iter().product::<usize>()
    }
}
