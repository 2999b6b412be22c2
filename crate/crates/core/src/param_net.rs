//! The exemplar-domain aware parameter network: frozen backbone, one fully
//! connected layer over `[pooled features ‖ one-hot]`, and one independent
//! linear head per dynamic generator block.

use candle_core::{Tensor, D};

use crate::arch::{GeneratorSpec, Norm};
use crate::backbone::{Backbone, FeatureExtractor};
use crate::domain::DomainLabel;
use crate::error::{EditError, Result};
use crate::generator::DynamicParams;
use crate::params::{Init, ParamSet};

pub const FC_PREFIX: &str = "param_net.fc";
pub const HEAD_PREFIX: &str = "param_net.head";

/// Standard deviation of generated conv kernels at initialization.
const KERNEL_INIT_STD: f64 = 0.02;
const HEAD_WEIGHT_STD: f64 = 1e-3;

/// Output of the shared FC layer, `[N, embed_dim]`.
#[derive(Debug, Clone)]
pub struct StyleEmbedding(pub Tensor);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlendMode {
    /// Blend factors outside [0, 1] are rejected.
    #[default]
    Strict,
    /// Blend factors outside [0, 1] extrapolate along the segment.
    Extrapolate,
}

#[derive(Debug, Clone)]
pub struct ParamNet {
    spec: GeneratorSpec,
    backbone: Backbone,
    params: ParamSet,
    num_domains: usize,
    embed_dim: usize,
}

fn head_name(block: usize, t: &str) -> String {
    format!("{HEAD_PREFIX}.b{block:02}.{t}")
}

/// Per-element initial means of a block's parameter slice: random kernels
/// around zero are drawn separately, biases 0, norm scale 1, shift 0.
fn head_bias_means(spec: &GeneratorSpec, block: usize) -> (Vec<f64>, Vec<bool>) {
    let b = &spec.blocks()[block];
    let mut means = Vec::with_capacity(b.param_len());
    let mut is_kernel = Vec::with_capacity(b.param_len());
    for ci in 0..b.num_convs() {
        let k = b.kernel * b.kernel * b.conv_in_ch(ci) * b.out_ch;
        means.extend(std::iter::repeat_n(0.0, k + b.out_ch));
        is_kernel.extend(std::iter::repeat_n(true, k));
        is_kernel.extend(std::iter::repeat_n(false, b.out_ch));
        if b.norm == Norm::Instance {
            means.extend(std::iter::repeat_n(1.0, b.out_ch));
            means.extend(std::iter::repeat_n(0.0, b.out_ch));
            is_kernel.extend(std::iter::repeat_n(false, 2 * b.out_ch));
        }
    }
    (means, is_kernel)
}

/// Heads read the embedding rescaled to L2 norm `1/sqrt(embed_dim)`, so its
/// L1 norm is at most one. An Adam step of size `lr` on a head then moves each
/// generated weight by at most `lr`, as for a directly learned weight; the
/// raw FC output would multiply that by its L1 norm.
fn head_input(emb: &Tensor) -> Result<Tensor> {
    let d = emb.dim(1)?;
    let norm = (emb.sqr()?.sum_keepdim(1)? + 1e-12)?.sqrt()?;
    Ok(emb.broadcast_div(&norm)?.affine(1.0 / (d as f64).sqrt(), 0.0)?)
}

impl ParamNet {
    pub fn init(
        spec: GeneratorSpec,
        backbone: Backbone,
        num_domains: usize,
        embed_dim: usize,
        init: &mut Init,
    ) -> Result<Self> {
        let feat = backbone.feature_dim();
        let mut params = ParamSet::new();
        let in_dim = feat + num_domains;
        params.insert(
            format!("{FC_PREFIX}.weight"),
            init.gaussian((embed_dim, in_dim), (1.0 / in_dim as f64).sqrt())?,
            false,
        )?;
        params.insert(format!("{FC_PREFIX}.bias"), init.constant(embed_dim, 0.0)?, false)?;
        for (bi, range) in spec.dynamic_layout() {
            let len = range.len();
            params.insert(head_name(bi, "weight"), init.gaussian((len, embed_dim), HEAD_WEIGHT_STD)?, false)?;
            let (means, is_kernel) = head_bias_means(&spec, bi);
            let noise = init.gaussian_vec(len, KERNEL_INIT_STD)?;
            let bias: Vec<f64> = means
                .iter()
                .zip(&is_kernel)
                .zip(&noise)
                .map(|((m, k), n)| if *k { m + n } else { *m })
                .collect();
            let bias = Tensor::from_vec(bias, len, init.device)?.to_dtype(init.dtype)?;
            params.insert(head_name(bi, "bias"), bias, false)?;
        }
        Self::from_parts(spec, backbone, params, num_domains, embed_dim)
    }

    pub fn from_parts(
        spec: GeneratorSpec,
        backbone: Backbone,
        params: ParamSet,
        num_domains: usize,
        embed_dim: usize,
    ) -> Result<Self> {
        let net = Self {
            spec,
            backbone,
            params,
            num_domains,
            embed_dim,
        };
        let total: usize = net
            .spec
            .dynamic_layout()
            .iter()
            .map(|(bi, _)| net.params.get(&head_name(*bi, "bias")).map(|b| b.elem_count()))
            .sum::<Result<usize>>()?;
        if total != net.spec.param_count() {
            return Err(EditError::shape(format!(
                "head outputs sum to {total}, spec needs {}",
                net.spec.param_count()
            )));
        }
        Ok(net)
    }

    pub fn backbone(&self) -> &Backbone {
        &self.backbone
    }

    /// FC and head parameters (the backbone is kept separately).
    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn num_domains(&self) -> usize {
        self.num_domains
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    /// Total element count including the frozen backbone.
    pub fn numel(&self) -> usize {
        self.params.numel() + self.backbone.params().numel()
    }

    fn check_label(&self, label: &DomainLabel) -> Result<()> {
        if label.num_domains() != self.num_domains {
            return Err(EditError::shape(format!(
                "label has {} domains, network was built for {}",
                label.num_domains(),
                self.num_domains
            )));
        }
        Ok(())
    }

    /// Embedding from precomputed backbone taps of the exemplar.
    pub fn embed_from_taps(&self, taps: &[Tensor], label: &DomainLabel) -> Result<StyleEmbedding> {
        self.check_label(label)?;
        let deepest = taps
            .last()
            .ok_or_else(|| EditError::shape("backbone produced no taps"))?;
        let pooled = deepest.mean(D::Minus1)?.mean(D::Minus1)?;
        let n = pooled.dim(0)?;
        let onehot = label.to_tensor(n, pooled.dtype(), pooled.device())?;
        let input = Tensor::cat(&[&pooled, &onehot], 1)?;
        let w = self.params.get(&format!("{FC_PREFIX}.weight"))?;
        let b = self.params.get(&format!("{FC_PREFIX}.bias"))?;
        Ok(StyleEmbedding(input.matmul(&w.t()?)?.broadcast_add(&b)?))
    }

    pub fn embed(&self, exemplar: &Tensor, label: &DomainLabel) -> Result<StyleEmbedding> {
        self.check_label(label)?;
        self.embed_from_taps(&self.backbone.taps(exemplar)?, label)
    }

    pub fn params_from_embedding(&self, emb: &StyleEmbedding) -> Result<DynamicParams> {
        let input = head_input(&emb.0)?;
        let heads = self
            .spec
            .dynamic_layout()
            .iter()
            .map(|(bi, _)| {
                let w = self.params.get(&head_name(*bi, "weight"))?;
                let b = self.params.get(&head_name(*bi, "bias"))?;
                Ok(input.matmul(&w.t()?)?.broadcast_add(&b)?)
            })
            .collect::<Result<Vec<_>>>()?;
        DynamicParams::new(Tensor::cat(&heads, 1)?)
    }

    /// Dynamic generator parameters for each exemplar in the batch.
    pub fn generate_params(&self, exemplar: &Tensor, label: &DomainLabel) -> Result<DynamicParams> {
        self.params_from_embedding(&self.embed(exemplar, label)?)
    }

    pub fn generate_from_taps(&self, taps: &[Tensor], label: &DomainLabel) -> Result<DynamicParams> {
        self.params_from_embedding(&self.embed_from_taps(taps, label)?)
    }
}

/// `(1 - alpha)·a + alpha·b`. Endpoints return exact copies.
pub fn interpolate(
    a: &DynamicParams,
    b: &DynamicParams,
    alpha: f64,
    mode: BlendMode,
) -> Result<DynamicParams> {
    if a.tensor().dims() != b.tensor().dims() {
        return Err(EditError::shape(format!(
            "cannot blend parameter vectors of shapes {:?} and {:?}",
            a.tensor().dims(),
            b.tensor().dims()
        )));
    }
    if !alpha.is_finite() || (mode == BlendMode::Strict && !(0.0..=1.0).contains(&alpha)) {
        return Err(EditError::domain(format!("blend factor {alpha} outside [0, 1]")));
    }
    if alpha == 0.0 {
        return Ok(a.clone());
    }
    if alpha == 1.0 {
        return Ok(b.clone());
    }
    let blended = (a.tensor().affine(1.0 - alpha, 0.0)? + b.tensor().affine(alpha, 0.0)?)?;
    DynamicParams::new(blended)
}
