//! Feature statistics shared by the style loss and the evaluation metrics.

use candle_core::Tensor;

use crate::backbone::FeatureExtractor;
use crate::error::{EditError, Result};
use crate::ops;

/// Tap points exposed by every backbone.
pub const NUM_TAPS: usize = 5;

/// Selected backbone activations, shallow to deep, each `[N, M_l, H_l, W_l]`.
#[derive(Debug, Clone)]
pub struct FeatureStack(pub Vec<Tensor>);

impl FeatureStack {
    pub fn layers(&self) -> &[Tensor] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Keeps only the listed tap indices, in the given order.
    pub fn select(taps: &[Tensor], layers: &[usize]) -> Result<Self> {
        layers
            .iter()
            .map(|&l| {
                taps.get(l).cloned().ok_or_else(|| {
                    EditError::shape(format!("tap {l} requested, backbone has {}", taps.len()))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// Runs the backbone and keeps the configured layers.
pub fn extract(image: &Tensor, backbone: &dyn FeatureExtractor, layers: &[usize]) -> Result<FeatureStack> {
    FeatureStack::select(&backbone.taps(image)?, layers)
}

/// Per layer: channel means and population standard deviations, `[N, M_l]` each.
#[derive(Debug, Clone)]
pub struct ChannelStats {
    pub means: Vec<Tensor>,
    pub stds: Vec<Tensor>,
}

impl ChannelStats {
    pub fn num_layers(&self) -> usize {
        self.means.len()
    }

    pub fn detach(&self) -> Self {
        Self {
            means: self.means.iter().map(Tensor::detach).collect(),
            stds: self.stds.iter().map(Tensor::detach).collect(),
        }
    }
}

pub fn channel_stats(features: &FeatureStack) -> Result<ChannelStats> {
    let (means, stds) = features
        .layers()
        .iter()
        .map(ops::spatial_mean_std)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(ChannelStats { means, stds })
}

/// Unnormalized Gram matrix `F Fᵀ` of one sample, `F` being `[M, H·W]`.
/// Accepts `[M, H, W]` or `[1, M, H, W]`.
pub fn gram(layer: &Tensor) -> Result<Tensor> {
    let layer = match layer.rank() {
        3 => layer.clone(),
        4 if layer.dim(0)? == 1 => layer.squeeze(0)?,
        _ => {
            return Err(EditError::shape(format!(
                "gram expects a single sample, got {:?}",
                layer.dims()
            )))
        }
    };
    let (m, h, w) = layer.dims3()?;
    let f = layer.reshape((m, h * w))?;
    Ok(f.matmul(&f.t()?)?)
}
