//! Domain-conditioned 70×70 patch discriminator.

use candle_core::Tensor;

use crate::domain::DomainLabel;
use crate::error::{EditError, Result};
use crate::ops;
use crate::params::{Init, ParamSet};

pub const DISC_PREFIX: &str = "discriminator";
pub const KERNEL: usize = 4;
pub const STRIDES: [usize; 5] = [2, 2, 2, 1, 1];
pub const RECEPTIVE_FIELD: usize = 70;
const LEAK: f64 = 0.2;

/// Per-patch real/fake scores before the sigmoid, `[N, 1, h', w']`.
#[derive(Debug, Clone)]
pub struct PatchLogits(pub Tensor);

/// Output side length for a square input of `size` pixels, or `None` when the
/// stack collapses to an empty grid.
pub fn patch_grid(size: usize) -> Option<usize> {
    let mut cur = size;
    for &stride in &STRIDES {
        // zero padding of 1 on each side
        cur = (cur + 2).checked_sub(KERNEL)? / stride + 1;
    }
    Some(cur)
}

/// Smallest square input with a non-empty logit grid.
pub fn min_input_size() -> usize {
    (1..).find(|&s| patch_grid(s).is_some()).expect("some size works")
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    params: ParamSet,
    num_domains: usize,
    widths: [usize; 4],
    normalize: bool,
}

fn layer_name(i: usize, t: &str) -> String {
    format!("{DISC_PREFIX}.l{i}.{t}")
}

impl Discriminator {
    /// Channel widths `W, 2W, 4W, 8W` (64-128-256-512 at full scale), kernels
    /// ~ N(0, 0.02²). Instance norm on all but the first and last layer.
    pub fn init(base_width: usize, num_domains: usize, init: &mut Init) -> Result<Self> {
        let w = base_width;
        let widths = [w, 2 * w, 4 * w, 8 * w];
        let chans = [3 + num_domains, widths[0], widths[1], widths[2], widths[3], 1];
        let mut params = ParamSet::new();
        for i in 0..5 {
            params.insert(
                layer_name(i, "weight"),
                init.gaussian((chans[i + 1], chans[i], KERNEL, KERNEL), 0.02)?,
                false,
            )?;
            params.insert(layer_name(i, "bias"), init.constant(chans[i + 1], 0.0)?, false)?;
        }
        Ok(Self {
            params,
            num_domains,
            widths,
            normalize: true,
        })
    }

    /// Same stack without normalization; every logit then depends only on
    /// its receptive field.
    pub fn without_norm(mut self) -> Self {
        self.normalize = false;
        self
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn widths(&self) -> [usize; 4] {
        self.widths
    }

    pub fn discriminate(&self, image: &Tensor, label: &DomainLabel) -> Result<PatchLogits> {
        let (n, c, h, w) = image.dims4()?;
        if c != 3 {
            return Err(EditError::shape(format!("expected 3 channels, got {c}")));
        }
        if label.num_domains() != self.num_domains {
            return Err(EditError::shape(format!(
                "label has {} domains, discriminator expects {}",
                label.num_domains(),
                self.num_domains
            )));
        }
        if patch_grid(h).is_none() || patch_grid(w).is_none() {
            return Err(EditError::shape(format!(
                "image {h}x{w} is below the minimum of {} px",
                min_input_size()
            )));
        }
        let planes = label
            .to_tensor(n, image.dtype(), image.device())?
            .reshape((n, self.num_domains, 1, 1))?
            .broadcast_as((n, self.num_domains, h, w))?;
        let mut x = Tensor::cat(&[image, &planes], 1)?;
        for (i, &stride) in STRIDES.iter().enumerate() {
            let k = self.params.get(&layer_name(i, "weight"))?;
            let b = self.params.get(&layer_name(i, "bias"))?;
            x = ops::conv_zero(&x, &k, &b, stride, 1)?;
            if i == STRIDES.len() - 1 {
                break;
            }
            if self.normalize && i > 0 {
                x = ops::instance_norm(&x)?;
            }
            x = ops::leaky_relu(&x, LEAK)?;
        }
        Ok(PatchLogits(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(patch_grid(256), Some(30));
        assert_eq!(patch_grid(64), Some(6));
        assert_eq!(patch_grid(128), Some(14));
        assert_eq!(patch_grid(32), Some(2));
        assert_eq!(patch_grid(16), None);
        assert_eq!(min_input_size(), 24);
    }
}
