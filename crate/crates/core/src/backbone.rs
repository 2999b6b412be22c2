//! Frozen convolutional feature extractor used by the parameter network and
//! by the perceptual statistics.

use std::path::Path;

use candle_core::{Device, DType, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::TensorFile;
use crate::error::{EditError, Result};
use crate::ops;
use crate::params::{Init, ParamSet};

pub const BACKBONE_PREFIX: &str = "param_net.backbone";

/// Anything that maps images to an ordered list of feature taps.
pub trait FeatureExtractor: Send + Sync {
    /// Activations at every tap, `[N, M_l, H_l, W_l]`, shallow to deep.
    fn taps(&self, x: &Tensor) -> Result<Vec<Tensor>>;

    /// Channel count of each tap.
    fn tap_channels(&self) -> Vec<usize>;

    fn tap_names(&self) -> Vec<String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub stride: usize,
    /// 2×2 max-pool before the convolution.
    pub pool_before: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneSpec {
    pub layers: Vec<BackboneLayer>,
    /// `(layer index, name)`; the tap is the post-ReLU output of that layer.
    pub taps: Vec<(usize, String)>,
    /// Per-channel `(mean, std)` applied to images mapped to [0, 1].
    pub input_norm: Option<([f64; 3], [f64; 3])>,
}

impl BackboneSpec {
    /// Stride-1 stem followed by four stride-2 convolutions, one tap per layer.
    pub fn seeded_default() -> Self {
        let chans = [3, 16, 32, 64, 64, 64];
        let layers = (0..5)
            .map(|i| BackboneLayer {
                in_ch: chans[i],
                out_ch: chans[i + 1],
                stride: if i == 0 { 1 } else { 2 },
                pool_before: false,
            })
            .collect();
        let taps = (0..5).map(|i| (i, format!("tap{}", i + 1))).collect();
        Self {
            layers,
            taps,
            input_norm: None,
        }
    }

    /// VGG16 convolutional trunk up to relu5_1, tapped at relu1_2, relu2_2,
    /// relu3_3, relu4_3 and relu5_1. Weights must come from a file.
    pub fn vgg16() -> Self {
        let plan: [(usize, bool); 11] = [
            (64, false),
            (64, false),
            (128, true),
            (128, false),
            (256, true),
            (256, false),
            (256, false),
            (512, true),
            (512, false),
            (512, false),
            (512, true),
        ];
        let mut in_ch = 3;
        let layers = plan
            .iter()
            .map(|&(out_ch, pool_before)| {
                let l = BackboneLayer {
                    in_ch,
                    out_ch,
                    stride: 1,
                    pool_before,
                };
                in_ch = out_ch;
                l
            })
            .collect();
        let taps = [(1, "relu1_2"), (3, "relu2_2"), (6, "relu3_3"), (9, "relu4_3"), (10, "relu5_1")]
            .into_iter()
            .map(|(i, n)| (i, n.to_string()))
            .collect();
        Self {
            layers,
            taps,
            input_norm: Some(([0.485, 0.456, 0.406], [0.229, 0.224, 0.225])),
        }
    }
}

/// Fixed-weight CNN. Weights are either drawn from a seeded He-normal stream
/// or read from a tensor file; they are never trained.
#[derive(Debug, Clone)]
pub struct Backbone {
    spec: BackboneSpec,
    params: ParamSet,
}

fn layer_name(i: usize, t: &str) -> String {
    format!("{BACKBONE_PREFIX}.l{i}.{t}")
}

impl Backbone {
    pub fn seeded(spec: BackboneSpec, seed: u64, dtype: DType, device: &Device) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = Init {
            rng: &mut rng,
            dtype,
            device,
        };
        let mut params = ParamSet::new();
        for (i, l) in spec.layers.iter().enumerate() {
            let std = (2.0 / (9 * l.in_ch) as f64).sqrt();
            params.insert(layer_name(i, "weight"), init.gaussian((l.out_ch, l.in_ch, 3, 3), std)?, true)?;
            params.insert(layer_name(i, "bias"), init.constant(l.out_ch, 0.0)?, true)?;
        }
        Ok(Self { spec, params })
    }

    /// Loads weights named `param_net.backbone.l<i>.{weight,bias}` from a
    /// tensor file.
    pub fn from_file(spec: BackboneSpec, path: impl AsRef<Path>, dtype: DType, device: &Device) -> Result<Self> {
        Self::from_tensor_file(spec, &TensorFile::read(path.as_ref())?, dtype, device)
    }

    /// Picks the backbone tensors out of an already-read container.
    pub fn from_tensor_file(spec: BackboneSpec, file: &TensorFile, dtype: DType, device: &Device) -> Result<Self> {
        let mut params = ParamSet::new();
        for (i, l) in spec.layers.iter().enumerate() {
            for (t, shape) in [("weight", vec![l.out_ch, l.in_ch, 3, 3]), ("bias", vec![l.out_ch])] {
                let name = layer_name(i, t);
                let tensor = file
                    .tensor(&name, device)?
                    .ok_or_else(|| EditError::Format(format!("backbone file lacks '{name}'")))?;
                if tensor.dims() != shape.as_slice() {
                    return Err(EditError::shape(format!(
                        "backbone tensor '{name}' has shape {:?}, expected {shape:?}",
                        tensor.dims()
                    )));
                }
                params.insert(name, tensor.to_dtype(dtype)?, true)?;
            }
        }
        Ok(Self { spec, params })
    }

    /// Rebuilds a backbone around already-loaded parameters.
    pub fn from_params(spec: BackboneSpec, params: ParamSet) -> Result<Self> {
        for (i, l) in spec.layers.iter().enumerate() {
            let w = params.get(&layer_name(i, "weight"))?;
            if w.dims() != [l.out_ch, l.in_ch, 3, 3] {
                return Err(EditError::shape(format!("backbone layer {i} has kernel {:?}", w.dims())));
            }
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Channel count of the deepest tap.
    pub fn feature_dim(&self) -> usize {
        *self.tap_channels().last().expect("backbone has taps")
    }
}

impl FeatureExtractor for Backbone {
    fn taps(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut h = match &self.spec.input_norm {
            Some((mean, std)) => {
                let dev = x.device();
                let mean = Tensor::new(mean, dev)?.to_dtype(x.dtype())?.reshape((1, 3, 1, 1))?;
                let std = Tensor::new(std, dev)?.to_dtype(x.dtype())?.reshape((1, 3, 1, 1))?;
                x.affine(0.5, 0.5)?.broadcast_sub(&mean)?.broadcast_div(&std)?
            }
            None => x.clone(),
        };
        let mut out = Vec::with_capacity(self.spec.taps.len());
        let mut taps = self.spec.taps.iter().peekable();
        for (i, l) in self.spec.layers.iter().enumerate() {
            if taps.peek().is_none() {
                break;
            }
            if l.pool_before {
                h = h.max_pool2d(2)?;
            }
            let w = self.params.get(&layer_name(i, "weight"))?;
            let b = self.params.get(&layer_name(i, "bias"))?;
            h = ops::conv_zero(&h, &w, &b, l.stride, 1)?.relu()?;
            if taps.peek().map(|(li, _)| *li) == Some(i) {
                out.push(h.clone());
                taps.next();
            }
        }
        Ok(out)
    }

    fn tap_channels(&self) -> Vec<usize> {
        self.spec
            .taps
            .iter()
            .map(|(i, _)| self.spec.layers[*i].out_ch)
            .collect()
    }

    fn tap_names(&self) -> Vec<String> {
        self.spec.taps.iter().map(|(_, n)| n.clone()).collect()
    }
}
