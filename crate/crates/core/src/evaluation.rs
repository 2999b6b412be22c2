//! Content and style error metrics, parameter counts and inference timing.

use std::fmt::Write as _;
use std::time::Instant;

use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

use crate::backbone::FeatureExtractor;
use crate::data::{self, DomainDataset};
use crate::domain::DomainLabel;
use crate::error::{EditError, Result};
use crate::model::EditModel;
use crate::perceptual::{gram, FeatureStack};

fn to_f64(t: &Tensor) -> Result<Tensor> {
    Ok(t.to_dtype(DType::F64)?)
}

fn check_single(t: &Tensor, what: &str) -> Result<()> {
    if t.rank() != 4 || t.dim(0)? != 1 {
        return Err(EditError::shape(format!("{what}: expected one [1, C, H, W] image, got {:?}", t.dims())));
    }
    Ok(())
}

/// `‖a − b‖₂` over all elements of two feature maps of equal shape.
pub fn content_error_from_features(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(EditError::shape(format!("feature shapes {:?} and {:?} differ", a.dims(), b.dims())));
    }
    Ok((to_f64(a)? - to_f64(b)?)?.sqr()?.sum_all()?.to_scalar::<f64>()?.sqrt())
}

/// L2 distance between the backbone features of `input` and `output` at tap `layer`.
pub fn content_error(input: &Tensor, output: &Tensor, backbone: &dyn FeatureExtractor, layer: usize) -> Result<f64> {
    check_single(input, "content error")?;
    check_single(output, "content error")?;
    if input.dims() != output.dims() {
        return Err(EditError::shape(format!(
            "content error needs equal sizes, got {:?} and {:?}",
            input.dims(),
            output.dims()
        )));
    }
    let fa = FeatureStack::select(&backbone.taps(input)?, &[layer])?;
    let fb = FeatureStack::select(&backbone.taps(output)?, &[layer])?;
    content_error_from_features(&fa.0[0], &fb.0[0])
}

/// `1/N_L Σ_l ‖Gram_l(a) − Gram_l(b)‖² / (4 M_l² H_l² W_l²)` over paired
/// single-sample feature maps.
pub fn style_error_from_features(a: &[Tensor], b: &[Tensor]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(EditError::shape(format!("style error over {} vs {} layers", a.len(), b.len())));
    }
    let mut total = 0.0;
    for (fa, fb) in a.iter().zip(b) {
        let (fa, fb) = (to_f64(fa)?, to_f64(fb)?);
        let dims = fa.dims().to_vec();
        let (m, h, w) = match dims.as_slice() {
            [1, m, h, w] | [m, h, w] => (*m, *h, *w),
            _ => return Err(EditError::shape(format!("style error expects single samples, got {dims:?}"))),
        };
        if fb.dims()[fb.rank() - 3..] != [m, h, w] {
            return Err(EditError::shape(format!("feature shapes {:?} and {:?} differ", fa.dims(), fb.dims())));
        }
        let diff = (gram(&fa)? - gram(&fb)?)?.sqr()?.sum_all()?.to_scalar::<f64>()?;
        let norm = 4.0 * (m * m * h * h * w * w) as f64;
        total += diff / norm;
    }
    Ok(total / a.len() as f64)
}

/// Normalized Gram distance between `output` and `exemplar` over `layers`.
pub fn style_error(
    output: &Tensor,
    exemplar: &Tensor,
    backbone: &dyn FeatureExtractor,
    layers: &[usize],
) -> Result<f64> {
    check_single(output, "style error")?;
    check_single(exemplar, "style error")?;
    let fa = FeatureStack::select(&backbone.taps(output)?, layers)?;
    let fb = FeatureStack::select(&backbone.taps(exemplar)?, layers)?;
    style_error_from_features(&fa.0, &fb.0)
}

/// Class-probability model for the inception score. None ships by default.
pub trait ClassifierHook {
    /// Class probabilities of one `[1, 3, H, W]` image.
    fn class_probs(&self, image: &Tensor) -> Result<Vec<f64>>;
}

/// `exp(mean_i KL(p(y|x_i) ‖ p(y)))`.
pub fn inception_score(hook: &dyn ClassifierHook, images: &[Tensor]) -> Result<f64> {
    if images.is_empty() {
        return Err(EditError::domain("inception score needs at least one image"));
    }
    let probs = images
        .iter()
        .map(|im| hook.class_probs(im))
        .collect::<Result<Vec<_>>>()?;
    let k = probs[0].len();
    if k == 0 || probs.iter().any(|p| p.len() != k) {
        return Err(EditError::shape("classifier returned inconsistent class counts"));
    }
    let marginal: Vec<f64> = (0..k)
        .map(|c| probs.iter().map(|p| p[c]).sum::<f64>() / probs.len() as f64)
        .collect();
    let kl: f64 = probs
        .iter()
        .map(|p| {
            p.iter()
                .zip(&marginal)
                .filter(|(pi, _)| **pi > 0.0)
                .map(|(pi, mi)| pi * (pi / mi).ln())
                .sum::<f64>()
        })
        .sum::<f64>()
        / probs.len() as f64;
    Ok(kl.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub source_domain: String,
    pub target_domain: String,
    pub num_images: usize,
    pub image_size: usize,
    pub content_error: MeanStd,
    pub style_error: MeanStd,
    pub shared_param_count: usize,
    pub dynamic_param_count: usize,
    pub paramnet_param_count: usize,
    pub ms_per_image: f64,
    pub timing_calls: usize,
    pub hardware: String,
    pub inception_score: Option<f64>,
}

/// Short description of the machine the timing was taken on.
pub fn hardware_note() -> String {
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!("cpu {} {}, {threads} threads", std::env::consts::ARCH, std::env::consts::OS)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall time in milliseconds of `calls` runs of `f`, after `warmup` unmeasured runs.
pub fn median_ms<F: FnMut() -> Result<()>>(warmup: usize, calls: usize, mut f: F) -> Result<f64> {
    for _ in 0..warmup {
        f()?;
    }
    let mut times = Vec::with_capacity(calls);
    for _ in 0..calls {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    Ok(median(times))
}

pub const MIN_TIMING_CALLS: usize = 30;

/// Translates every source image into the target domain, using target images
/// as exemplars in turn, and scores the results.
pub fn evaluate(
    model: &EditModel,
    sources: &DomainDataset,
    targets: &DomainDataset,
    target_label: &DomainLabel,
    classifier: Option<&dyn ClassifierHook>,
) -> Result<EvalReport> {
    let cfg = model.config();
    let size = cfg.image_size;
    let device = model.device();
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let load = |ds: &DomainDataset, i: usize, rng: &mut rand::rngs::mock::StepRng| {
        data::load_batch(ds, &[i], size, false, rng, device).and_then(|t| Ok(t.to_dtype(model.dtype())?))
    };
    let backbone = model.backbone();
    let mut content = Vec::with_capacity(sources.len());
    let mut style = Vec::with_capacity(sources.len());
    let mut outputs = Vec::new();
    for i in 0..sources.len() {
        let x = load(sources, i, &mut rng)?;
        let exemplar = load(targets, i % targets.len(), &mut rng)?;
        let out = model.translate(&x, &exemplar, target_label)?;
        content.push(content_error(&x, &out, backbone, cfg.content_layer)?);
        style.push(style_error(&out, &exemplar, backbone, &cfg.style_layers)?);
        if classifier.is_some() {
            outputs.push(out);
        }
    }
    let x = load(sources, 0, &mut rng)?;
    let exemplar = load(targets, 0, &mut rng)?;
    let ms = median_ms(3, MIN_TIMING_CALLS, || model.translate(&x, &exemplar, target_label).map(|_| ()))?;
    let counts = model.count_params();
    Ok(EvalReport {
        source_domain: sources.domain.name().to_string(),
        target_domain: target_label.name().to_string(),
        num_images: sources.len(),
        image_size: size,
        content_error: MeanStd::of(&content),
        style_error: MeanStd::of(&style),
        shared_param_count: counts.shared,
        dynamic_param_count: counts.dynamic,
        paramnet_param_count: counts.paramnet,
        ms_per_image: ms,
        timing_calls: MIN_TIMING_CALLS,
        hardware: hardware_note(),
        inception_score: match classifier {
            Some(c) => Some(inception_score(c, &outputs)?),
            None => None,
        },
    })
}

impl EvalReport {
    /// Human-readable table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} -> {} ({} images, {}x{})", self.source_domain, self.target_domain, self.num_images, self.image_size, self.image_size);
        let _ = writeln!(s, "{:<22} {:>14}", "metric", "value");
        let _ = writeln!(s, "{:<22} {:>14}", "content error", format!("{:.4} ± {:.4}", self.content_error.mean, self.content_error.std));
        let _ = writeln!(s, "{:<22} {:>14}", "style error", format!("{:.4e} ± {:.4e}", self.style_error.mean, self.style_error.std));
        let _ = writeln!(s, "{:<22} {:>14}", "shared params", self.shared_param_count);
        let _ = writeln!(s, "{:<22} {:>14}", "dynamic params", self.dynamic_param_count);
        let _ = writeln!(s, "{:<22} {:>14}", "param-net params", self.paramnet_param_count);
        let _ = writeln!(s, "{:<22} {:>14}", "ms per image", format!("{:.3}", self.ms_per_image));
        if let Some(is) = self.inception_score {
            let _ = writeln!(s, "{:<22} {:>14}", "inception score", format!("{is:.4}"));
        }
        let _ = writeln!(s, "timing: median of {} warm calls on {}", self.timing_calls, self.hardware);
        s
    }

    /// One `key=value` per line.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("source_domain", self.source_domain.clone());
        kv("target_domain", self.target_domain.clone());
        kv("num_images", self.num_images.to_string());
        kv("image_size", self.image_size.to_string());
        kv("content_error_mean", self.content_error.mean.to_string());
        kv("content_error_std", self.content_error.std.to_string());
        kv("style_error_mean", self.style_error.mean.to_string());
        kv("style_error_std", self.style_error.std.to_string());
        kv("shared_param_count", self.shared_param_count.to_string());
        kv("dynamic_param_count", self.dynamic_param_count.to_string());
        kv("paramnet_param_count", self.paramnet_param_count.to_string());
        kv("ms_per_image", self.ms_per_image.to_string());
        kv("timing_calls", self.timing_calls.to_string());
        kv("hardware", self.hardware.clone());
        if let Some(is) = self.inception_score {
            kv("inception_score", is.to_string());
        }
        s
    }
}
