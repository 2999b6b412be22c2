#![allow(dead_code)]

use candle_core::backprop::GradStore;
use candle_core::{DType, Device, Tensor, Var};
use edit_core::params::ParamSet;
use edit_core::{Config, EditModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod suites;

/// Conv with kernel k, `cin -> cout`, bias, and optionally norm scale and shift.
pub fn conv(k: usize, cin: usize, cout: usize, norm: bool) -> usize {
    k * k * cin * cout + cout + if norm { 2 * cout } else { 0 }
}

/// Independent count of the standard layout: (shared, dynamic).
pub fn expected_counts(w: usize, res: usize, dyn_res: usize) -> (usize, usize) {
    let resblock = 2 * conv(3, 4 * w, 4 * w, true);
    let shared = conv(7, 3, w, true)
        + conv(3, w, 2 * w, true)
        + conv(3, 2 * w, 4 * w, true)
        + (res - dyn_res) * resblock;
    let dynamic = dyn_res * resblock
        + conv(3, 4 * w, 2 * w, true)
        + conv(3, 2 * w, w, true)
        + conv(7, w, 3, false);
    (shared, dynamic)
}

/// Miniature model: W=4, one residual block, small embedding.
pub fn mini_config() -> Config {
    Config {
        base_width: 4,
        num_residual_blocks: 1,
        embed_dim: 8,
        image_size: 24,
        synthetic_per_domain: 4,
        steps_per_epoch: 4,
        total_epochs: 1000,
        decay_start_epoch: 1000,
        buffer_capacity: 3,
        ..Config::default()
    }
}

pub fn mini_model(dtype: DType) -> EditModel {
    EditModel::init(&mini_config(), dtype, &Device::Cpu).unwrap()
}

pub fn uniform(shape: &[usize], seed: u64, dtype: DType) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap().to_dtype(dtype).unwrap()
}

pub fn to_vec(t: &Tensor) -> Vec<f64> {
    t.flatten_all().unwrap().to_dtype(DType::F64).unwrap().to_vec1::<f64>().unwrap()
}

pub fn scalar(t: &Tensor) -> f64 {
    t.to_dtype(DType::F64).unwrap().to_scalar::<f64>().unwrap()
}

/// Central-difference oracle tolerance: relative 1e-4, plus an absolute floor
/// above the f64 round-off of a step-1e-6 difference (about 1e-10 per unit of loss).
pub fn grads_agree(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= 1e-4 * analytic.abs().max(numeric.abs()) + 1e-8
}

pub const FD_STEP: f64 = 1e-6;

/// A coordinate check that failed.
#[derive(Debug)]
pub struct Mismatch {
    pub what: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares analytic gradients of `f` with central differences at `samples`
/// random coordinates of each trainable tensor in `sets` whose name contains
/// one of `filters`. Returns the number of coordinates checked and any failures.
pub fn check_param_grads(
    sets: &[&ParamSet],
    filters: &[&str],
    samples: usize,
    seed: u64,
    f: &dyn Fn() -> Tensor,
) -> (usize, Vec<Mismatch>) {
    let grads = f().backward().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    let mut bad = Vec::new();
    for set in sets {
        for e in set.trainable() {
            if !filters.iter().any(|p| e.name.contains(p)) {
                continue;
            }
            let analytic = match grads.get(e.var.as_tensor()) {
                Some(g) => to_vec(g),
                None => vec![0.0; e.var.elem_count()],
            };
            let original = e.var.as_tensor().copy().unwrap();
            let base = to_vec(&original);
            for _ in 0..samples.min(base.len()) {
                let i = rng.gen_range(0..base.len());
                let eval = |delta: f64| {
                    let mut v = base.clone();
                    v[i] += delta;
                    let t = Tensor::from_vec(v, original.shape(), &Device::Cpu).unwrap();
                    set.assign(&e.name, &t).unwrap();
                    scalar(&f())
                };
                let numeric = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
                set.assign(&e.name, &original).unwrap();
                checked += 1;
                if !grads_agree(analytic[i], numeric) {
                    bad.push(Mismatch {
                        what: e.name.clone(),
                        index: i,
                        analytic: analytic[i],
                        numeric,
                    });
                }
            }
        }
    }
    (checked, bad)
}

/// Same oracle for a free input tensor.
pub fn check_input_grads(
    x: &Var,
    samples: usize,
    seed: u64,
    what: &str,
    f: &dyn Fn(&Tensor) -> Tensor,
) -> (usize, Vec<Mismatch>) {
    let grads: GradStore = f(x.as_tensor()).backward().unwrap();
    let analytic = to_vec(grads.get(x.as_tensor()).expect("input receives a gradient"));
    let base = to_vec(x.as_tensor());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    let n = samples.min(base.len());
    for _ in 0..n {
        let i = rng.gen_range(0..base.len());
        let eval = |delta: f64| {
            let mut v = base.clone();
            v[i] += delta;
            let t = Tensor::from_vec(v, x.shape(), &Device::Cpu).unwrap();
            scalar(&f(&t))
        };
        let numeric = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
        if !grads_agree(analytic[i], numeric) {
            bad.push(Mismatch {
                what: what.to_string(),
                index: i,
                analytic: analytic[i],
                numeric,
            });
        }
    }
    (n, bad)
}
