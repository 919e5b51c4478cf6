//! Feature identifiers, sparse feature vectors and weight vectors.
//!
//! Feature names are interned once into a [`FeatureSpace`]; every numeric
//! routine works on compact [`FeatureId`]s. A [`WeightVector`] is stored
//! densely over ids but behaves as a sparse map: reading an id that was never
//! written yields zero.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureId(pub u32);

impl FeatureId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Bidirectional mapping between feature names and ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureSpace {
    names: Vec<String>,
    ids: HashMap<String, FeatureId>,
}

impl FeatureSpace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `name`, allocating a new one on first sight.
    pub fn intern(&mut self, name: &str) -> FeatureId {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = FeatureId(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<FeatureId> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: FeatureId) -> &str {
        &self.names[id.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = (FeatureId, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (FeatureId(i as u32), n.as_str()))
    }
}

/// Sparse vector with entries sorted by id and no duplicate ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(FeatureId, f64)>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from arbitrary pairs; duplicate ids are summed.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (FeatureId, f64)>) -> Self {
        let mut entries: Vec<(FeatureId, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|&(id, _)| id);
        let mut merged: Vec<(FeatureId, f64)> = Vec::with_capacity(entries.len());
        for (id, v) in entries {
            match merged.last_mut() {
                Some((last, acc)) if *last == id => *acc += v,
                _ => merged.push((id, v)),
            }
        }
        Self { entries: merged }
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeatureId, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn get(&self, id: FeatureId) -> f64 {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|(_, v)| v.is_finite())
    }

    /// Largest id present, if any.
    pub fn max_id(&self) -> Option<FeatureId> {
        self.entries.last().map(|&(id, _)| id)
    }

    /// `Σ coef_i · v_i`, sparse over the union of the supports.
    pub fn linear_combination<'a>(
        terms: impl IntoIterator<Item = (&'a SparseVector, f64)>,
    ) -> SparseVector {
        let mut acc: Vec<f64> = Vec::new();
        let mut touched: Vec<bool> = Vec::new();
        for (v, coef) in terms {
            if let Some(max) = v.max_id() {
                if max.index() >= acc.len() {
                    acc.resize(max.index() + 1, 0.0);
                    touched.resize(max.index() + 1, false);
                }
            }
            for (id, x) in v.iter() {
                acc[id.index()] += coef * x;
                touched[id.index()] = true;
            }
        }
        let entries = acc
            .into_iter()
            .zip(touched)
            .enumerate()
            .filter(|(_, (_, t))| *t)
            .map(|(i, (v, _))| (FeatureId(i as u32), v))
            .collect();
        SparseVector { entries }
    }
}

/// Model parameters `w`. Absent features read as zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightVector {
    values: Vec<f64>,
}

impl WeightVector {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn from_dense(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn from_sparse(v: &SparseVector) -> Self {
        let mut w = Self::zeros();
        w.add_scaled(v, 1.0);
        w
    }

    #[inline]
    pub fn get(&self, id: FeatureId) -> f64 {
        self.values.get(id.index()).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, id: FeatureId, value: f64) {
        if id.index() >= self.values.len() {
            self.values.resize(id.index() + 1, 0.0);
        }
        self.values[id.index()] = value;
    }

    /// Number of allocated coordinates (an upper bound on the support).
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn ensure_dim(&mut self, dim: usize) {
        if dim > self.values.len() {
            self.values.resize(dim, 0.0);
        }
    }

    #[inline]
    pub fn dot(&self, v: &SparseVector) -> f64 {
        v.iter().map(|(id, x)| self.get(id) * x).sum()
    }

    /// `self += scale · v`
    pub fn add_scaled(&mut self, v: &SparseVector, scale: f64) {
        if let Some(max) = v.max_id() {
            self.ensure_dim(max.index() + 1);
        }
        for (id, x) in v.iter() {
            self.values[id.index()] += scale * x;
        }
    }

    /// `self += scale · other`
    pub fn add_dense_scaled(&mut self, other: &WeightVector, scale: f64) {
        self.ensure_dim(other.dim());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Non-zero coordinates in id order.
    pub fn nonzero(&self) -> impl Iterator<Item = (FeatureId, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, &v)| (FeatureId(i as u32), v))
    }

    pub fn to_sparse(&self) -> SparseVector {
        SparseVector::from_pairs(self.nonzero())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Coordinatewise equality treating missing coordinates as zero.
    pub fn approx_eq(&self, other: &WeightVector, tol: f64) -> bool {
        let dim = self.dim().max(other.dim());
        (0..dim).all(|i| {
            let id = FeatureId(i as u32);
            (self.get(id) - other.get(id)).abs() <= tol
        })
    }

    pub(crate) fn check_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Numeric(format!("{what} contains a non-finite value")))
        }
    }
}
