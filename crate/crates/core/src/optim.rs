//! Adam with bias correction; moments are keyed by parameter name so they can
//! be checkpointed.

use std::collections::BTreeMap;

use candle_core::backprop::GradStore;
use candle_core::Tensor;

use crate::error::Result;
use crate::params::ParamSet;

#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    steps: u64,
    moments: BTreeMap<String, (Tensor, Tensor)>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(0.9, 0.999, 1e-8)
    }
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            steps: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn moments(&self) -> &BTreeMap<String, (Tensor, Tensor)> {
        &self.moments
    }

    /// Restores saved state.
    pub fn restore(&mut self, steps: u64, moments: BTreeMap<String, (Tensor, Tensor)>) {
        self.steps = steps;
        self.moments = moments;
    }

    /// One update of every trainable parameter in `sets` that received a
    /// gradient. `grad_scale` multiplies gradients first (used for clipping).
    pub fn step(&mut self, sets: &[&ParamSet], grads: &GradStore, lr: f64, grad_scale: f64) -> Result<()> {
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for set in sets {
            for e in set.trainable() {
                let Some(g) = grads.get(e.var.as_tensor()) else {
                    continue;
                };
                // gradients carry the op history of the backward pass; drop it
                // so moments do not keep every past graph alive
                let g = g.detach();
                let g = if grad_scale == 1.0 { g } else { g.affine(grad_scale, 0.0)? };
                let (m, v) = match self.moments.get(&e.name) {
                    Some((m, v)) => (
                        (m.affine(self.beta1, 0.0)? + g.affine(1.0 - self.beta1, 0.0)?)?,
                        (v.affine(self.beta2, 0.0)? + g.sqr()?.affine(1.0 - self.beta2, 0.0)?)?,
                    ),
                    None => (g.affine(1.0 - self.beta1, 0.0)?, g.sqr()?.affine(1.0 - self.beta2, 0.0)?),
                };
                let denom = (v.affine(1.0 / c2, 0.0)?.sqrt()? + self.eps)?;
                let update = m.affine(lr / c1, 0.0)?.div(&denom)?;
                e.var.set(&e.var.as_tensor().sub(&update)?)?;
                self.moments.insert(e.name.clone(), (m, v));
            }
        }
        Ok(())
    }
}

/// L2 norm of all gradients reaching the trainable parameters of `sets`.
pub fn grad_norm(sets: &[&ParamSet], grads: &GradStore) -> Result<f64> {
    let mut sq = 0.0;
    for set in sets {
        for e in set.trainable() {
            if let Some(g) = grads.get(e.var.as_tensor()) {
                sq += g
                    .to_dtype(candle_core::DType::F64)?
                    .sqr()?
                    .sum_all()?
                    .to_scalar::<f64>()?;
            }
        }
    }
    Ok(sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut set = ParamSet::new();
        set.insert("w", Tensor::new(&[1.0f64, -2.0], &Device::Cpu).unwrap(), false)
            .unwrap();
        let w = set.get("w").unwrap();
        let loss = (w.sqr().unwrap().sum_all().unwrap() * 0.5).unwrap();
        let grads = loss.backward().unwrap();
        let mut adam = Adam::default();
        adam.step(&[&set], &grads, 0.1, 1.0).unwrap();
        let after = set.get("w").unwrap().to_vec1::<f64>().unwrap();
        // m̂/sqrt(v̂) = sign(g) on the first step
        assert!((after[0] - 0.9).abs() < 1e-6 && (after[1] + 1.9).abs() < 1e-6, "{after:?}");
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn frozen_parameters_are_untouched() {
        let mut set = ParamSet::new();
        set.insert("f", Tensor::new(&[3.0f64], &Device::Cpu).unwrap(), true).unwrap();
        set.insert("t", Tensor::new(&[3.0f64], &Device::Cpu).unwrap(), false).unwrap();
        let loss = (set.get("f").unwrap() * set.get("t").unwrap()).unwrap().sum_all().unwrap();
        let grads = loss.backward().unwrap();
        assert!(grads.get(set.var("f").unwrap().as_tensor()).is_none());
        Adam::default().step(&[&set], &grads, 0.5, 1.0).unwrap();
        assert_eq!(set.get("f").unwrap().to_vec1::<f64>().unwrap(), vec![3.0]);
        assert_ne!(set.get("t").unwrap().to_vec1::<f64>().unwrap(), vec![3.0]);
    }
}
