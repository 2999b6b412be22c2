//! Differentiable building blocks shared by the networks.

use candle_core::{Device, Tensor, D};

use crate::error::{EditError, Result};

pub const INSTANCE_NORM_EPS: f64 = 1e-5;

fn reflect_indices(len: usize, pad: usize, device: &Device) -> Result<Tensor> {
    let idx: Vec<u32> = (0..len + 2 * pad)
        .map(|i| {
            let j = i as i64 - pad as i64;
            let j = if j < 0 {
                -j
            } else if j >= len as i64 {
                2 * (len as i64 - 1) - j
            } else {
                j
            };
            j as u32
        })
        .collect();
    Ok(Tensor::from_vec(idx, len + 2 * pad, device)?)
}

/// Reflection padding of the two spatial dims of an `[N, C, H, W]` tensor.
pub fn reflect_pad(x: &Tensor, pad: usize) -> Result<Tensor> {
    if pad == 0 {
        return Ok(x.clone());
    }
    let (_, _, h, w) = x.dims4()?;
    if pad >= h || pad >= w {
        return Err(EditError::shape(format!(
            "reflection pad {pad} needs spatial dims > {pad}, got {h}x{w}"
        )));
    }
    let rows = reflect_indices(h, pad, x.device())?;
    let cols = reflect_indices(w, pad, x.device())?;
    Ok(x.contiguous()?.index_select(&rows, 2)?.index_select(&cols, 3)?)
}

/// Convolution with "same" reflection padding for odd kernels, plus bias.
pub fn conv_reflect(x: &Tensor, kernel: &Tensor, bias: &Tensor, stride: usize) -> Result<Tensor> {
    let k = kernel.dim(2)?;
    let padded = reflect_pad(x, k / 2)?;
    let y = padded.conv2d(kernel, 0, stride, 1, 1)?;
    add_channel_bias(&y, bias)
}

/// Zero-padded convolution plus bias.
pub fn conv_zero(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let y = x.conv2d(kernel, padding, stride, 1, 1)?;
    add_channel_bias(&y, bias)
}

fn channel_view(v: &Tensor) -> Result<Tensor> {
    let c = v.elem_count();
    Ok(v.reshape((1, c, 1, 1))?)
}

pub fn add_channel_bias(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    Ok(x.broadcast_add(&channel_view(bias)?)?)
}

/// Per-sample, per-channel standardization over the spatial dims.
pub fn instance_norm(x: &Tensor) -> Result<Tensor> {
    let mean = x.mean_keepdim(D::Minus1)?.mean_keepdim(D::Minus2)?;
    let centered = x.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(D::Minus1)?.mean_keepdim(D::Minus2)?;
    let denom = (var + INSTANCE_NORM_EPS)?.sqrt()?;
    Ok(centered.broadcast_div(&denom)?)
}

/// `x * scale + shift` with per-channel vectors.
pub fn channel_affine(x: &Tensor, scale: &Tensor, shift: &Tensor) -> Result<Tensor> {
    Ok(x
        .broadcast_mul(&channel_view(scale)?)?
        .broadcast_add(&channel_view(shift)?)?)
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok(x.maximum(&x.affine(slope, 0.0)?)?)
}

/// Square root whose value is exact but whose gradient is that of
/// `sqrt(v + eps)`, so zero-variance maps backpropagate zeros instead of NaN.
pub fn sqrt_smooth_grad(v: &Tensor, eps: f64) -> Result<Tensor> {
    let smooth = (v + eps)?.sqrt()?;
    let exact = v.sqrt()?;
    let correction = (&smooth - &exact)?.detach();
    Ok((smooth - correction)?)
}

/// Spatial mean and population standard deviation of every channel:
/// `[N, C, H, W]` → two `[N, C]` tensors.
pub fn spatial_mean_std(x: &Tensor) -> Result<(Tensor, Tensor)> {
    let (n, c, h, w) = x.dims4()?;
    let flat = x.reshape((n, c, h * w))?;
    let mean = flat.mean_keepdim(2)?;
    let var = flat.broadcast_sub(&mean)?.sqr()?.mean(2)?;
    let std = sqrt_smooth_grad(&var, 1e-12)?;
    Ok((mean.squeeze(2)?, std))
}

/// `log(clamp(sigmoid(logits), eps, 1 - eps))`, evaluated in the log domain
/// so extreme logits stay finite in value and gradient.
pub fn log_sigmoid_clamped(logits: &Tensor, eps: f64) -> Result<Tensor> {
    // log σ(l) = min(l, 0) - log(1 + exp(-|l|))
    let soft = (logits.abs()?.neg()?.exp()? + 1.0)?.log()?;
    let log_sig = (logits.minimum(0.0)? - soft)?;
    Ok(log_sig.clamp(eps.ln(), (1.0 - eps).ln())?)
}

/// True when every element is finite.
pub fn all_finite(x: &Tensor) -> Result<bool> {
    let s = x
        .flatten_all()?
        .to_dtype(candle_core::DType::F64)?
        .sqr()?
        .sum_all()?
        .to_scalar::<f64>()?;
    Ok(s.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::DType;

    #[test]
    fn reflect_pad_matches_definition() {
        let x = Tensor::arange(0f32, 4.0, &Device::Cpu)
            .unwrap()
            .reshape((1, 1, 1, 4))
            .unwrap();
        let x = x.repeat((1, 1, 2, 1)).unwrap();
        let p = reflect_pad(&x, 1).unwrap();
        let row = p.get(0).unwrap().get(0).unwrap().get(0).unwrap();
        assert_eq!(row.to_vec1::<f32>().unwrap(), vec![1.0, 0.0, 1.0, 2.0, 3.0, 2.0]);
        assert!(reflect_pad(&x, 2).is_err());
    }

    #[test]
    fn instance_norm_standardizes() {
        let x = Tensor::randn(3f64, 2.0, (2, 3, 5, 4), &Device::Cpu).unwrap();
        let y = instance_norm(&x).unwrap();
        let (mean, std) = spatial_mean_std(&y).unwrap();
        for m in mean.flatten_all().unwrap().to_vec1::<f64>().unwrap() {
            assert!(m.abs() < 1e-5, "{m}");
        }
        for s in std.flatten_all().unwrap().to_vec1::<f64>().unwrap() {
            // eps in the denominator shrinks the variance slightly
            assert!((s * s - 1.0).abs() < 1e-5, "{s}");
        }
    }

    #[test]
    fn mean_std_hand_cases() {
        let c = Tensor::full(0.7f64, (1, 1, 3, 3), &Device::Cpu).unwrap();
        let (m, s) = spatial_mean_std(&c).unwrap();
        assert!((m.to_vec2::<f64>().unwrap()[0][0] - 0.7).abs() < 1e-12);
        assert!(s.to_vec2::<f64>().unwrap()[0][0].abs() < 1e-7);

        let x = Tensor::new(&[[[[1f64, -1.0], [-1.0, 1.0]]]], &Device::Cpu).unwrap();
        let (m, s) = spatial_mean_std(&x).unwrap();
        assert_eq!(m.to_vec2::<f64>().unwrap()[0][0], 0.0);
        assert!((s.to_vec2::<f64>().unwrap()[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_map_std_gradient_is_finite() {
        let v = candle_core::Var::from_tensor(&Tensor::full(0.5f64, (1, 2, 2, 2), &Device::Cpu).unwrap())
            .unwrap();
        let (_, s) = spatial_mean_std(v.as_tensor()).unwrap();
        let g = s.sum_all().unwrap().backward().unwrap();
        let grad = g.get(v.as_tensor()).unwrap();
        assert!(all_finite(grad).unwrap());
    }

    #[test]
    fn log_sigmoid_extremes() {
        let l = Tensor::new(&[-100f32, -5.0, 0.0, 5.0, 100.0], &Device::Cpu).unwrap();
        let v = log_sigmoid_clamped(&l, 1e-7).unwrap().to_vec1::<f32>().unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
        assert!((v[0] - (1e-7f32).ln()).abs() < 1e-4);
        assert!((v[2] - 0.5f32.ln()).abs() < 1e-6);
        let l64 = l.to_dtype(DType::F64).unwrap();
        let v64 = log_sigmoid_clamped(&l64, 1e-7).unwrap().to_vec1::<f64>().unwrap();
        let direct = -(1.0 + 5f64.exp()).ln();
        assert!((v64[1] - direct).abs() < 1e-12);
    }
}
