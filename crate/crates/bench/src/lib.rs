//! Shared fixtures for the benchmarks.

use candle_core::{DType, Device, Tensor};
use edit_core::data::{self, Split};
use edit_core::{Config, DomainLabel, EditModel, Result};

/// Default desk-scale configuration (32 px, W = 16, nine residual blocks).
pub fn desk_config() -> Config {
    Config::default()
}

/// A source image, an exemplar and the target label, drawn from the synthetic test split.
pub fn sample_pair(model: &EditModel) -> Result<(Tensor, Tensor, DomainLabel)> {
    let size = model.config().image_size;
    let sets = data::synthetic_domains(model.registry(), Split::Test, 1, size, 0)?;
    // no augmentation, so the rng is never drawn from
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let x = data::load_batch(&sets[0], &[0], size, false, &mut rng, model.device())?;
    let e = data::load_batch(&sets[1], &[0], size, false, &mut rng, model.device())?;
    Ok((x, e, model.registry().label(1)?))
}

pub fn desk_model() -> Result<EditModel> {
    EditModel::init(&desk_config(), DType::F32, &Device::Cpu)
}
