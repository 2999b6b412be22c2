//! Run configuration, stored as a TOML document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EditError, Result};
use crate::perceptual::NUM_TAPS;

/// Smallest square input the patch discriminator maps to a non-empty grid.
pub const MIN_IMAGE_SIZE: usize = 24;

/// Generator-side adversarial objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialMode {
    /// `-log D(fake)`.
    #[default]
    NonSaturating,
    /// `log(1 - D(fake))`, the literal min-max term.
    Minimax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub domains: Vec<String>,
    pub image_size: usize,
    pub base_width: usize,
    pub lambda_cyc: f64,
    pub eta_sty: f64,
    pub lr: f64,
    pub total_epochs: usize,
    pub decay_start_epoch: usize,
    pub buffer_capacity: usize,
    pub seed: u64,
    pub style_layers: Vec<usize>,
    pub embed_dim: usize,
    pub num_residual_blocks: usize,
    /// Number of trailing residual blocks whose weights come from the parameter network.
    pub dynamic_residual_blocks: usize,
    pub batch_size: usize,
    /// Steps per epoch; `0` means one pass over the smaller domain of each pair.
    pub steps_per_epoch: usize,
    pub content_layer: usize,
    pub adversarial_mode: AdversarialMode,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Dataset root; `None` trains on the built-in synthetic domains.
    pub data_root: Option<String>,
    pub synthetic_per_domain: usize,
    /// Ordered source/target pairs trained round-robin; empty means every pair.
    pub domain_pairs: Vec<[String; 2]>,
    pub augment: bool,
    pub sample_every: usize,
    /// Optional pretrained backbone weights in the checkpoint tensor container format.
    pub backbone_weights: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            domains: vec!["edges".into(), "photos".into()],
            image_size: 32,
            base_width: 16,
            lambda_cyc: 10.0,
            eta_sty: 0.05,
            lr: 1e-3,
            total_epochs: 200,
            decay_start_epoch: 100,
            buffer_capacity: 50,
            seed: 7,
            style_layers: (0..NUM_TAPS).collect(),
            embed_dim: 128,
            num_residual_blocks: 9,
            dynamic_residual_blocks: 0,
            batch_size: 1,
            steps_per_epoch: 0,
            content_layer: 2,
            adversarial_mode: AdversarialMode::NonSaturating,
            grad_clip: None,
            data_root: None,
            synthetic_per_domain: 64,
            domain_pairs: Vec::new(),
            augment: true,
            sample_every: 100,
            backbone_weights: None,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(EditError::Config(m));
        if self.domains.len() < 2 {
            return fail(format!("need at least 2 domains, got {}", self.domains.len()));
        }
        for (i, d) in self.domains.iter().enumerate() {
            if d.is_empty() || self.domains[..i].contains(d) {
                return fail(format!("domain names must be unique and non-empty: {d:?}"));
            }
        }
        if !self.image_size.is_multiple_of(4) || self.image_size < MIN_IMAGE_SIZE {
            return fail(format!(
                "image_size must be a multiple of 4 and at least {MIN_IMAGE_SIZE}, got {}",
                self.image_size
            ));
        }
        if self.base_width == 0 {
            return fail("base_width must be positive".into());
        }
        if !(self.lambda_cyc > 0.0 && self.lambda_cyc.is_finite()) {
            return fail(format!("lambda_cyc must be > 0, got {}", self.lambda_cyc));
        }
        if !(self.eta_sty > 0.0 && self.eta_sty.is_finite()) {
            return fail(format!("eta_sty must be > 0, got {}", self.eta_sty));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be > 0, got {}", self.lr));
        }
        if self.total_epochs == 0 {
            return fail("total_epochs must be at least 1".into());
        }
        if self.decay_start_epoch > self.total_epochs {
            return fail(format!(
                "decay_start_epoch {} exceeds total_epochs {}",
                self.decay_start_epoch, self.total_epochs
            ));
        }
        if self.buffer_capacity == 0 {
            return fail("buffer_capacity must be at least 1".into());
        }
        if self.style_layers.is_empty() {
            return fail("style_layers must not be empty".into());
        }
        if let Some(&l) = self.style_layers.iter().find(|&&l| l >= NUM_TAPS) {
            return fail(format!("style layer {l} out of range (backbone has {NUM_TAPS} taps)"));
        }
        if self.content_layer >= NUM_TAPS {
            return fail(format!("content_layer {} out of range", self.content_layer));
        }
        if self.embed_dim == 0 {
            return fail("embed_dim must be positive".into());
        }
        if self.dynamic_residual_blocks > self.num_residual_blocks {
            return fail("dynamic_residual_blocks exceeds num_residual_blocks".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0 && c.is_finite()) {
                return fail(format!("grad_clip must be > 0, got {c}"));
            }
        }
        if self.data_root.is_none() && self.synthetic_per_domain == 0 {
            return fail("synthetic_per_domain must be at least 1".into());
        }
        for [a, b] in &self.domain_pairs {
            if a == b || !self.domains.contains(a) || !self.domains.contains(b) {
                return fail(format!("invalid domain pair [{a:?}, {b:?}]"));
            }
        }
        Ok(())
    }

    /// Index pairs trained round-robin.
    pub fn pair_indices(&self) -> Vec<(usize, usize)> {
        if self.domain_pairs.is_empty() {
            let d = self.domains.len();
            return (0..d)
                .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
                .collect();
        }
        let idx = |n: &String| self.domains.iter().position(|d| d == n).unwrap_or(0);
        self.domain_pairs
            .iter()
            .map(|[a, b]| (idx(a), idx(b)))
            .collect()
    }

    /// Canonical text form; identical configs always serialize identically.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| EditError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| EditError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EditError::data(path, e))?;
        Self::from_toml(&text)
    }
}
