//! Named, ordered parameter storage backed by autodiff variables.

use std::collections::HashMap;

use candle_core::{DType, Device, Shape, Tensor, Var};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{EditError, Result};

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub var: Var,
    pub frozen: bool,
}

/// Insertion-ordered set of named parameters. Order is stable and is the
/// order used when writing checkpoints.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    entries: Vec<ParamEntry>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor, frozen: bool) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(EditError::shape(format!("duplicate parameter '{name}'")));
        }
        let var = Var::from_tensor(&tensor)?;
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(ParamEntry { name, var, frozen });
        Ok(())
    }

    /// Value of `name` for use in a forward pass. Frozen parameters come back
    /// detached so no gradient ever reaches them.
    pub fn get(&self, name: &str) -> Result<Tensor> {
        let e = self
            .index
            .get(name)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| EditError::shape(format!("missing parameter '{name}'")))?;
        Ok(if e.frozen {
            e.var.as_tensor().detach()
        } else {
            e.var.as_tensor().clone()
        })
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.index.get(name).map(|&i| &self.entries[i].var)
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn trainable(&self) -> impl Iterator<Item = &ParamEntry> {
        self.entries.iter().filter(|e| !e.frozen)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar elements.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|e| e.var.elem_count()).sum()
    }

    /// Overwrites the value of `name`, checking shape and dtype.
    pub fn assign(&self, name: &str, value: &Tensor) -> Result<()> {
        let var = self
            .var(name)
            .ok_or_else(|| EditError::shape(format!("unknown parameter '{name}'")))?;
        if var.shape() != value.shape() {
            return Err(EditError::shape(format!(
                "parameter '{name}' has shape {:?}, got {:?}",
                var.shape(),
                value.shape()
            )));
        }
        var.set(&value.to_dtype(var.dtype())?)?;
        Ok(())
    }

    /// Deep copy with fresh variables.
    pub fn deep_clone(&self) -> Result<Self> {
        let mut out = ParamSet::new();
        for e in &self.entries {
            out.insert(e.name.clone(), e.var.as_tensor().copy()?, e.frozen)?;
        }
        Ok(out)
    }
}

/// Deterministic initializer. Every network draws its initial weights from
/// one seeded stream so runs are reproducible.
pub struct Init<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub dtype: DType,
    pub device: &'a Device,
}

impl Init<'_> {
    pub fn gaussian(&mut self, shape: impl Into<Shape>, std: f64) -> Result<Tensor> {
        let shape = shape.into();
        let data = self.gaussian_vec(shape.elem_count(), std)?;
        Ok(Tensor::from_vec(data, shape, self.device)?.to_dtype(self.dtype)?)
    }

    pub fn gaussian_vec(&mut self, n: usize, std: f64) -> Result<Vec<f64>> {
        let normal = Normal::new(0.0, std).map_err(|e| EditError::Numeric(e.to_string()))?;
        Ok((0..n).map(|_| normal.sample(self.rng)).collect())
    }

    pub fn constant(&mut self, shape: impl Into<Shape>, value: f64) -> Result<Tensor> {
        Ok(Tensor::full(value, shape, self.device)?.to_dtype(self.dtype)?)
    }
}
