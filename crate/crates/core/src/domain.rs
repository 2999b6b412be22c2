//! Domain labels and the registry that fixes label indices.

use std::fmt;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{EditError, Result};

/// A target-domain label: index into the registry plus its one-hot encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainLabel {
    index: usize,
    onehot: Vec<u8>,
    name: String,
}

impl DomainLabel {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn onehot(&self) -> &[u8] {
        &self.onehot
    }

    pub fn num_domains(&self) -> usize {
        self.onehot.len()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// One-hot rows `[batch, D]` in the requested dtype.
    pub fn to_tensor(&self, batch: usize, dtype: DType, device: &Device) -> Result<Tensor> {
        let row: Vec<f32> = self.onehot.iter().map(|&b| b as f32).collect();
        let t = Tensor::from_vec(row, (1, self.onehot.len()), device)?
            .to_dtype(dtype)?
            .repeat((batch, 1))?;
        Ok(t)
    }
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.name, self.index)
    }
}

/// Builds the one-hot label for `index` among `num_domains` domains.
pub fn make_onehot(index: usize, num_domains: usize) -> Result<DomainLabel> {
    make_named(index, num_domains, format!("domain{index}"))
}

fn make_named(index: usize, num_domains: usize, name: String) -> Result<DomainLabel> {
    if num_domains < 2 {
        return Err(EditError::domain(format!(
            "at least two domains are required, got {num_domains}"
        )));
    }
    if index >= num_domains {
        return Err(EditError::domain(format!(
            "domain index {index} out of range for {num_domains} domains"
        )));
    }
    let mut onehot = vec![0u8; num_domains];
    onehot[index] = 1;
    Ok(DomainLabel {
        index,
        onehot,
        name,
    })
}

/// Ordered list of domain names; position in the list is the label index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainRegistry {
    names: Vec<String>,
}

impl DomainRegistry {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.len() < 2 {
            return Err(EditError::domain("at least two domains are required"));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(EditError::domain("domain names must be non-empty"));
            }
            if names[..i].contains(n) {
                return Err(EditError::domain(format!("duplicate domain name '{n}'")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn label(&self, index: usize) -> Result<DomainLabel> {
        let name = self
            .names
            .get(index)
            .cloned()
            .unwrap_or_else(|| format!("domain{index}"));
        make_named(index, self.names.len(), name)
    }

    /// Resolves a domain by name. Unknown names produce a usage error listing
    /// every registered domain.
    pub fn resolve(&self, name: &str) -> Result<DomainLabel> {
        match self.names.iter().position(|n| n == name) {
            Some(i) => self.label(i),
            None => Err(EditError::Usage(format!(
                "unknown domain '{name}'; registered domains: {}",
                self.names.join(", ")
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn onehot_examples() {
        assert_eq!(make_onehot(2, 4).unwrap().onehot(), &[0, 0, 1, 0]);
        assert_eq!(make_onehot(0, 2).unwrap().onehot(), &[1, 0]);
        assert!(matches!(make_onehot(5, 4), Err(EditError::Domain(_))));
        assert!(matches!(make_onehot(0, 1), Err(EditError::Domain(_))));
    }

    #[test]
    fn onehot_has_single_hot_entry() {
        for d in 2..8 {
            for i in 0..d {
                let l = make_onehot(i, d).unwrap();
                assert_eq!(l.onehot().iter().map(|&b| b as usize).sum::<usize>(), 1);
                assert_eq!(l.onehot()[i], 1);
            }
        }
    }

    #[test]
    fn unknown_domain_lists_registry() {
        let reg = DomainRegistry::new(vec!["photo".into(), "monet".into()]).unwrap();
        let err = reg.resolve("dog").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, EditError::Usage(_)));
        assert!(msg.contains("photo") && msg.contains("monet"), "{msg}");
        assert_eq!(reg.resolve("monet").unwrap().index(), 1);
    }

    #[test]
    fn label_tensor_rows() {
        let l = make_onehot(1, 3).unwrap();
        let t = l.to_tensor(2, DType::F32, &Device::Cpu).unwrap();
        assert_eq!(
            t.to_vec2::<f32>().unwrap(),
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]]
        );
    }
}
