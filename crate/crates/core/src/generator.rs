//! The translation network: a shared encoder/residual trunk plus blocks whose
//! weights are supplied per exemplar as a flat dynamic-parameter vector.

use candle_core::{Tensor, D};

use crate::arch::{Activation, BlockKind, BlockSpec, GeneratorSpec, Norm};
use crate::error::{EditError, Result};
use crate::ops;
use crate::params::{Init, ParamSet};

pub const SHARED_PREFIX: &str = "generator.shared";

/// Weights of one convolution inside a block.
struct ConvWeights {
    kernel: Tensor,
    bias: Tensor,
    affine: Option<(Tensor, Tensor)>,
}

/// Splits a block's flat parameter slice into per-convolution weights,
/// following the layout `[kernel, bias, scale, shift]` per convolution.
fn unpack_block(flat: &Tensor, block: &BlockSpec) -> Result<Vec<ConvWeights>> {
    let flat = flat.flatten_all()?;
    if flat.elem_count() != block.param_len() {
        return Err(EditError::shape(format!(
            "{:?} block expects {} parameters, got {}",
            block.kind,
            block.param_len(),
            flat.elem_count()
        )));
    }
    let k = block.kernel;
    let out = block.out_ch;
    let mut offset = 0;
    let mut take = |len: usize| -> Result<Tensor> {
        let t = flat.narrow(0, offset, len)?;
        offset += len;
        Ok(t)
    };
    (0..block.num_convs())
        .map(|i| {
            let cin = block.conv_in_ch(i);
            let kernel = take(k * k * cin * out)?.reshape((out, cin, k, k))?;
            let bias = take(out)?;
            let affine = match block.norm {
                Norm::Instance => Some((take(out)?, take(out)?)),
                Norm::None => None,
            };
            Ok(ConvWeights {
                kernel,
                bias,
                affine,
            })
        })
        .collect()
}

fn conv_norm(x: &Tensor, w: &ConvWeights, stride: usize) -> Result<Tensor> {
    let y = ops::conv_reflect(x, &w.kernel, &w.bias, stride)?;
    match &w.affine {
        Some((scale, shift)) => ops::channel_affine(&ops::instance_norm(&y)?, scale, shift),
        None => Ok(y),
    }
}

fn activate(x: Tensor, act: Activation) -> Result<Tensor> {
    Ok(match act {
        Activation::Relu => x.relu()?,
        Activation::Tanh => x.tanh()?,
        Activation::None => x,
    })
}

fn apply_block(x: &Tensor, block: &BlockSpec, weights: &[ConvWeights]) -> Result<Tensor> {
    match block.kind {
        BlockKind::Conv | BlockKind::Output => {
            activate(conv_norm(x, &weights[0], block.stride)?, block.activation)
        }
        BlockKind::UpConv => {
            let (_, _, h, w) = x.dims4()?;
            let up = x.upsample_nearest2d(2 * h, 2 * w)?;
            activate(conv_norm(&up, &weights[0], 1)?, block.activation)
        }
        BlockKind::ResBlock => {
            let h = conv_norm(x, &weights[0], 1)?.relu()?;
            let h = conv_norm(&h, &weights[1], 1)?;
            Ok((x + h)?)
        }
    }
}

/// Runs one block with weights taken from `flat_params`: conv, optional
/// instance norm with the supplied affine terms, then the block activation.
pub fn functional_conv_block(x: &Tensor, flat_params: &Tensor, block: &BlockSpec) -> Result<Tensor> {
    if !ops::all_finite(flat_params)? {
        return Err(EditError::Numeric("non-finite block parameters".into()));
    }
    let (_, c, _, _) = x.dims4()?;
    if c != block.in_ch {
        return Err(EditError::shape(format!(
            "block expects {} input channels, got {c}",
            block.in_ch
        )));
    }
    apply_block(x, block, &unpack_block(flat_params, block)?)
}

/// Per-exemplar generated parameters, one row per exemplar: `[rows, param_count]`.
#[derive(Debug, Clone)]
pub struct DynamicParams(Tensor);

impl DynamicParams {
    pub fn new(t: Tensor) -> Result<Self> {
        match t.rank() {
            1 => Ok(Self(t.unsqueeze(0)?)),
            2 => Ok(Self(t)),
            r => Err(EditError::shape(format!("dynamic params must be rank 1 or 2, got {r}"))),
        }
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.dims()[0]
    }

    /// Parameters per row.
    pub fn len(&self) -> usize {
        self.0.dims()[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> Result<Tensor> {
        Ok(self.0.get(i)?)
    }

    pub fn detach(&self) -> Self {
        Self(self.0.detach())
    }

    pub fn to_vec(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self.0.to_dtype(candle_core::DType::F64)?.to_vec2()?)
    }
}

/// Shared-block weights, named `generator.shared.b<block>.c<conv>.<tensor>`.
#[derive(Debug, Clone)]
pub struct SharedWeights {
    params: ParamSet,
}

fn shared_name(block: usize, conv: usize, tensor: &str) -> String {
    format!("{SHARED_PREFIX}.b{block:02}.c{conv}.{tensor}")
}

impl SharedWeights {
    /// Conv kernels ~ N(0, 0.02²), zero bias, identity affine.
    pub fn init(spec: &GeneratorSpec, init: &mut Init) -> Result<Self> {
        let mut params = ParamSet::new();
        for (bi, b) in spec.blocks().iter().enumerate().filter(|(_, b)| !b.dynamic) {
            for ci in 0..b.num_convs() {
                let k = b.kernel;
                let kernel = init.gaussian((b.out_ch, b.conv_in_ch(ci), k, k), 0.02)?;
                params.insert(shared_name(bi, ci, "weight"), kernel, false)?;
                params.insert(shared_name(bi, ci, "bias"), init.constant(b.out_ch, 0.0)?, false)?;
                if b.norm == Norm::Instance {
                    params.insert(shared_name(bi, ci, "scale"), init.constant(b.out_ch, 1.0)?, false)?;
                    params.insert(shared_name(bi, ci, "shift"), init.constant(b.out_ch, 0.0)?, false)?;
                }
            }
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    fn block_weights(&self, bi: usize, block: &BlockSpec) -> Result<Vec<ConvWeights>> {
        (0..block.num_convs())
            .map(|ci| {
                let get = |t: &str| self.params.get(&shared_name(bi, ci, t));
                let affine = match block.norm {
                    Norm::Instance => Some((get("scale")?, get("shift")?)),
                    Norm::None => None,
                };
                Ok(ConvWeights {
                    kernel: get("weight")?,
                    bias: get("bias")?,
                    affine,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Generator {
    spec: GeneratorSpec,
    shared: SharedWeights,
}

impl Generator {
    pub fn new(spec: GeneratorSpec, shared: SharedWeights) -> Result<Self> {
        let g = Self { spec, shared };
        for (bi, b) in g.spec.blocks().iter().enumerate().filter(|(_, b)| !b.dynamic) {
            for (ci, w) in g.shared.block_weights(bi, b)?.iter().enumerate() {
                let expect = [b.out_ch, b.conv_in_ch(ci), b.kernel, b.kernel];
                if w.kernel.dims() != expect {
                    return Err(EditError::shape(format!(
                        "shared block {bi} conv {ci}: kernel {:?}, expected {expect:?}",
                        w.kernel.dims()
                    )));
                }
            }
        }
        Ok(g)
    }

    pub fn init(spec: GeneratorSpec, init: &mut Init) -> Result<Self> {
        let shared = SharedWeights::init(&spec, init)?;
        Self::new(spec, shared)
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn shared(&self) -> &SharedWeights {
        &self.shared
    }

    pub fn params(&self) -> &ParamSet {
        &self.shared.params
    }

    /// Translates `x` (`[N, 3, H, W]`) with the given dynamic parameters. A
    /// single parameter row is broadcast over the batch; otherwise row `i`
    /// configures sample `i`.
    pub fn forward(&self, x: &Tensor, theta: &DynamicParams) -> Result<Tensor> {
        let (n, c, h, w) = x.dims4()?;
        if c != 3 {
            return Err(EditError::shape(format!("expected 3 input channels, got {c}")));
        }
        let m = self.spec.size_multiple();
        if h % m != 0 || w % m != 0 {
            return Err(EditError::shape(format!(
                "input {h}x{w} not divisible by {m}"
            )));
        }
        if theta.len() != self.spec.param_count() {
            return Err(EditError::shape(format!(
                "dynamic params have length {}, spec needs {}",
                theta.len(),
                self.spec.param_count()
            )));
        }
        if theta.rows() != 1 && theta.rows() != n {
            return Err(EditError::shape(format!(
                "{} dynamic parameter rows for a batch of {n}",
                theta.rows()
            )));
        }
        let layout = self.spec.dynamic_layout();
        let mut dyn_iter = layout.iter();
        let mut y = x.clone();
        for (bi, block) in self.spec.blocks().iter().enumerate() {
            y = if block.dynamic {
                let (_, range) = dyn_iter.next().expect("layout covers dynamic blocks");
                let slice = theta.tensor().narrow(1, range.start, range.len())?;
                if theta.rows() == 1 {
                    apply_block(&y, block, &unpack_block(&slice, block)?)?
                } else {
                    let outs = (0..n)
                        .map(|i| {
                            let xi = y.narrow(0, i, 1)?;
                            apply_block(&xi, block, &unpack_block(&slice.get(i)?, block)?)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Tensor::cat(&outs, 0)?
                }
            } else {
                apply_block(&y, block, &self.shared.block_weights(bi, block)?)?
            };
        }
        debug_assert_eq!(y.dim(D::Minus1)?, w);
        Ok(y)
    }
}
