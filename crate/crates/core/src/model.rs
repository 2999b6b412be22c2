//! The assembled translator: generator, parameter network and discriminator
//! built from one configuration.

use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::GeneratorSpec;
use crate::backbone::{Backbone, BackboneSpec};
use crate::config::Config;
use crate::discriminator::Discriminator;
use crate::domain::{DomainLabel, DomainRegistry};
use crate::error::{EditError, Result};
use crate::generator::{DynamicParams, Generator};
use crate::param_net::{interpolate, BlendMode, ParamNet};
use crate::params::{Init, ParamSet};

/// Seed offset for the backbone's weight stream.
const BACKBONE_SEED_OFFSET: u64 = 0x5eed_bacb;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCounts {
    /// Generator weights learned directly.
    pub shared: usize,
    /// Length of the generated parameter vector.
    pub dynamic: usize,
    /// Parameter network, frozen backbone included.
    pub paramnet: usize,
    pub discriminator: usize,
}

#[derive(Debug, Clone)]
pub struct EditModel {
    config: Config,
    registry: DomainRegistry,
    generator: Generator,
    param_net: ParamNet,
    discriminator: Discriminator,
    dtype: DType,
    device: Device,
}

pub fn backbone_spec(cfg: &Config) -> BackboneSpec {
    if cfg.backbone_weights.is_some() {
        BackboneSpec::vgg16()
    } else {
        BackboneSpec::seeded_default()
    }
}

impl EditModel {
    /// Fresh model with seeded weights. Reads the backbone weight file when
    /// the config names one.
    pub fn init(cfg: &Config, dtype: DType, device: &Device) -> Result<Self> {
        cfg.validate()?;
        let backbone = match &cfg.backbone_weights {
            Some(path) => Backbone::from_file(backbone_spec(cfg), path, dtype, device)?,
            None => Backbone::seeded(
                backbone_spec(cfg),
                cfg.seed.wrapping_add(BACKBONE_SEED_OFFSET),
                dtype,
                device,
            )?,
        };
        Self::with_backbone(cfg, backbone, dtype, device)
    }

    pub fn with_backbone(cfg: &Config, backbone: Backbone, dtype: DType, device: &Device) -> Result<Self> {
        cfg.validate()?;
        let registry = DomainRegistry::new(cfg.domains.clone())?;
        let spec = GeneratorSpec::from_config(cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut init = Init {
            rng: &mut rng,
            dtype,
            device,
        };
        let generator = Generator::init(spec.clone(), &mut init)?;
        let param_net = ParamNet::init(spec, backbone, registry.len(), cfg.embed_dim, &mut init)?;
        let discriminator = Discriminator::init(cfg.base_width, registry.len(), &mut init)?;
        Ok(Self {
            config: cfg.clone(),
            registry,
            generator,
            param_net,
            discriminator,
            dtype,
            device: device.clone(),
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn registry(&self) -> &DomainRegistry {
        &self.registry
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn param_net(&self) -> &ParamNet {
        &self.param_net
    }

    pub fn backbone(&self) -> &Backbone {
        self.param_net.backbone()
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.discriminator
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Every parameter set, in checkpoint order.
    pub fn param_sets(&self) -> [&ParamSet; 4] {
        [
            self.generator.params(),
            self.param_net.backbone().params(),
            self.param_net.params(),
            self.discriminator.params(),
        ]
    }

    pub fn params_for(&self, exemplar: &Tensor, label: &DomainLabel) -> Result<DynamicParams> {
        self.param_net.generate_params(&exemplar.to_dtype(self.dtype)?, label)
    }

    pub fn translate_with(&self, input: &Tensor, theta: &DynamicParams) -> Result<Tensor> {
        self.generator.forward(&input.to_dtype(self.dtype)?, theta)
    }

    /// `G(input; G_P(exemplar, label))`.
    pub fn translate(&self, input: &Tensor, exemplar: &Tensor, label: &DomainLabel) -> Result<Tensor> {
        let theta = self.params_for(exemplar, label)?;
        self.translate_with(input, &theta)
    }

    /// Translations of `input` under `steps` parameter vectors evenly spaced
    /// from exemplar `a` (first frame) to exemplar `b` (last frame).
    pub fn interpolation_frames(
        &self,
        input: &Tensor,
        exemplar_a: &Tensor,
        exemplar_b: &Tensor,
        label: &DomainLabel,
        steps: usize,
    ) -> Result<Vec<Tensor>> {
        if steps < 2 {
            return Err(EditError::domain(format!("interpolation needs at least 2 steps, got {steps}")));
        }
        let ta = self.params_for(exemplar_a, label)?;
        let tb = self.params_for(exemplar_b, label)?;
        (0..steps)
            .map(|i| {
                let alpha = i as f64 / (steps - 1) as f64;
                self.translate_with(input, &interpolate(&ta, &tb, alpha, BlendMode::Strict)?)
            })
            .collect()
    }

    pub fn count_params(&self) -> ParamCounts {
        ParamCounts {
            shared: self.generator.params().numel(),
            dynamic: self.generator.spec().param_count(),
            paramnet: self.param_net.numel(),
            discriminator: self.discriminator.params().numel(),
        }
    }
}
