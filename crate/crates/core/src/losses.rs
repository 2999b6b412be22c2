//! Cycle, style and adversarial objectives and their weighted total.

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::config::AdversarialMode;
use crate::discriminator::PatchLogits;
use crate::error::{EditError, Result};
use crate::ops;
use crate::perceptual::ChannelStats;

/// Clamp applied to discriminator probabilities inside every log.
pub const LOG_EPS: f64 = 1e-7;

/// Scalar loss values of one training step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub cyc: f64,
    pub sty: f64,
    pub adv_d: f64,
    pub adv_g: f64,
    pub total: f64,
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(EditError::shape(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// `mean|x̄ − x| + mean|ȳ − y|`.
pub fn cycle_loss(x_cycled: &Tensor, x: &Tensor, y_cycled: &Tensor, y: &Tensor) -> Result<Tensor> {
    same_shape(x_cycled, x, "cycle loss (x)")?;
    same_shape(y_cycled, y, "cycle loss (y)")?;
    let a = (x_cycled - x)?.abs()?.mean_all()?;
    let b = (y_cycled - y)?.abs()?.mean_all()?;
    Ok((a + b)?)
}

/// One direction of the statistics style loss:
/// `Σ_l Σ_m [(μ_gen − μ_ref)² + (σ_gen − σ_ref)²] / (N_L · M_l)`, averaged over the batch.
pub fn style_loss(generated: &ChannelStats, reference: &ChannelStats) -> Result<Tensor> {
    let layers = generated.num_layers();
    if layers == 0 || layers != reference.num_layers() {
        return Err(EditError::shape(format!(
            "style loss over {layers} vs {} layers",
            reference.num_layers()
        )));
    }
    let mut total: Option<Tensor> = None;
    for l in 0..layers {
        let (gm, rm) = (&generated.means[l], &reference.means[l]);
        let (gs, rs) = (&generated.stds[l], &reference.stds[l]);
        if gm.dim(1)? != rm.dim(1)? {
            return Err(EditError::shape(format!(
                "layer {l}: {} vs {} channels",
                gm.dim(1)?,
                rm.dim(1)?
            )));
        }
        let channels = gm.dim(1)?;
        // per-sample sums, then the batch mean
        let term = ((gm.broadcast_sub(rm)?.sqr()? + gs.broadcast_sub(rs)?.sqr()?)?
            .sum(1)?
            .mean_all()?
            / (layers * channels) as f64)?;
        total = Some(match total {
            Some(t) => (t + term)?,
            None => term,
        });
    }
    Ok(total.expect("at least one layer"))
}

fn mean_log_real(l: &PatchLogits) -> Result<Tensor> {
    Ok(ops::log_sigmoid_clamped(&l.0, LOG_EPS)?.mean_all()?)
}

fn mean_log_fake(l: &PatchLogits) -> Result<Tensor> {
    // log(1 − σ(l)) = log σ(−l)
    Ok(ops::log_sigmoid_clamped(&l.0.neg()?, LOG_EPS)?.mean_all()?)
}

/// Discriminator objective (minimized):
/// `−[mean log D(x) + mean log(1 − D(fake_y)) + mean log D(y) + mean log(1 − D(fake_x))]`.
pub fn discriminator_loss(
    real_x: &PatchLogits,
    fake_in_y: &PatchLogits,
    real_y: &PatchLogits,
    fake_in_x: &PatchLogits,
) -> Result<Tensor> {
    let s = (((mean_log_real(real_x)? + mean_log_fake(fake_in_y)?)? + mean_log_real(real_y)?)?
        + mean_log_fake(fake_in_x)?)?;
    Ok(s.neg()?)
}

/// Generator adversarial objective (minimized) on fresh fakes.
pub fn generator_adv_loss(
    fake_in_y: &PatchLogits,
    fake_in_x: &PatchLogits,
    mode: AdversarialMode,
) -> Result<Tensor> {
    Ok(match mode {
        AdversarialMode::NonSaturating => (mean_log_real(fake_in_y)? + mean_log_real(fake_in_x)?)?.neg()?,
        AdversarialMode::Minimax => (mean_log_fake(fake_in_y)? + mean_log_fake(fake_in_x)?)?,
    })
}

/// Both adversarial objectives, `(adv_d, adv_g)`. The fake logits for the
/// discriminator term should come from replayed fakes and those for the
/// generator term from fresh ones; here both use the same inputs.
pub fn adversarial_losses(
    real_x: &PatchLogits,
    fake_in_y: &PatchLogits,
    real_y: &PatchLogits,
    fake_in_x: &PatchLogits,
    mode: AdversarialMode,
) -> Result<(Tensor, Tensor)> {
    Ok((
        discriminator_loss(real_x, fake_in_y, real_y, fake_in_x)?,
        generator_adv_loss(fake_in_y, fake_in_x, mode)?,
    ))
}

/// `adv_g + λ·cyc + η·sty`.
pub fn total_loss(adv_g: f64, cyc: f64, sty: f64, lambda: f64, eta: f64) -> f64 {
    adv_g + lambda * cyc + eta * sty
}

pub fn total_loss_tensor(adv_g: &Tensor, cyc: &Tensor, sty: &Tensor, lambda: f64, eta: f64) -> Result<Tensor> {
    Ok(((adv_g + cyc.affine(lambda, 0.0)?)? + sty.affine(eta, 0.0)?)?)
}

pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?)
}
