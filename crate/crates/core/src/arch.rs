//! Generator architecture description and the dynamic-parameter layout it implies.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{EditError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// Plain convolution (stride 1 or 2).
    Conv,
    /// Two stride-1 convolutions with an additive skip.
    ResBlock,
    /// Nearest-neighbour ×2 resize followed by a stride-1 convolution.
    UpConv,
    /// Final convolution to image channels.
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Instance,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub kernel: usize,
    pub stride: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub dynamic: bool,
    pub norm: Norm,
    pub activation: Activation,
}

impl BlockSpec {
    pub fn conv(in_ch: usize, out_ch: usize, kernel: usize, stride: usize) -> Self {
        Self {
            kind: BlockKind::Conv,
            kernel,
            stride,
            in_ch,
            out_ch,
            dynamic: false,
            norm: Norm::Instance,
            activation: Activation::Relu,
        }
    }

    pub fn resblock(ch: usize) -> Self {
        Self {
            kind: BlockKind::ResBlock,
            kernel: 3,
            stride: 1,
            in_ch: ch,
            out_ch: ch,
            dynamic: false,
            norm: Norm::Instance,
            activation: Activation::Relu,
        }
    }

    pub fn upconv(in_ch: usize, out_ch: usize) -> Self {
        Self {
            kind: BlockKind::UpConv,
            ..Self::conv(in_ch, out_ch, 3, 1)
        }
    }

    pub fn output(in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        Self {
            kind: BlockKind::Output,
            kernel,
            stride: 1,
            in_ch,
            out_ch,
            dynamic: false,
            norm: Norm::None,
            activation: Activation::Tanh,
        }
    }

    pub fn with_dynamic(mut self, dynamic: bool) -> Self {
        self.dynamic = dynamic;
        self
    }

    /// Number of convolutions inside the block.
    pub fn num_convs(&self) -> usize {
        match self.kind {
            BlockKind::ResBlock => 2,
            _ => 1,
        }
    }

    /// Input channels of the `i`-th convolution of the block.
    pub fn conv_in_ch(&self, i: usize) -> usize {
        if i == 0 {
            self.in_ch
        } else {
            self.out_ch
        }
    }

    /// Parameters of the `i`-th convolution: kernel, bias, then norm scale and shift.
    pub fn conv_param_len(&self, i: usize) -> usize {
        let k = self.kernel;
        let norm = match self.norm {
            Norm::Instance => 2 * self.out_ch,
            Norm::None => 0,
        };
        k * k * self.conv_in_ch(i) * self.out_ch + self.out_ch + norm
    }

    pub fn param_len(&self) -> usize {
        (0..self.num_convs()).map(|i| self.conv_param_len(i)).sum()
    }

    /// Spatial size after the block for an input of size `size`.
    pub fn output_size(&self, size: usize) -> usize {
        match self.kind {
            BlockKind::UpConv => size * 2,
            _ => (size - 1) / self.stride + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    blocks: Vec<BlockSpec>,
    base_width: usize,
}

impl GeneratorSpec {
    pub fn new(blocks: Vec<BlockSpec>, base_width: usize) -> Result<Self> {
        let spec = Self { blocks, base_width };
        spec.validate()?;
        Ok(spec)
    }

    /// Encoder (7×7 stem, two stride-2 3×3 convs), `num_res` residual blocks at
    /// 4W and a decoder of two resize-convs plus a 7×7 tanh output conv. The
    /// decoder and the last `dynamic_res` residual blocks are dynamic.
    pub fn standard(base_width: usize, num_res: usize, dynamic_res: usize) -> Result<Self> {
        let w = base_width;
        let mut blocks = vec![
            BlockSpec::conv(3, w, 7, 1),
            BlockSpec::conv(w, 2 * w, 3, 2),
            BlockSpec::conv(2 * w, 4 * w, 3, 2),
        ];
        for i in 0..num_res {
            blocks.push(BlockSpec::resblock(4 * w).with_dynamic(i + dynamic_res >= num_res));
        }
        blocks.push(BlockSpec::upconv(4 * w, 2 * w).with_dynamic(true));
        blocks.push(BlockSpec::upconv(2 * w, w).with_dynamic(true));
        blocks.push(BlockSpec::output(w, 3, 7).with_dynamic(true));
        Self::new(blocks, base_width)
    }

    /// W = 4 with a single residual block; used for gradient verification.
    pub fn miniature() -> Self {
        Self::standard(4, 1, 0).expect("miniature spec is valid")
    }

    pub fn from_config(cfg: &Config) -> Result<Self> {
        Self::standard(
            cfg.base_width,
            cfg.num_residual_blocks,
            cfg.dynamic_residual_blocks,
        )
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn base_width(&self) -> usize {
        self.base_width
    }

    /// Length of the dynamic parameter vector.
    pub fn param_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.dynamic)
            .map(BlockSpec::param_len)
            .sum()
    }

    pub fn shared_param_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| !b.dynamic)
            .map(BlockSpec::param_len)
            .sum()
    }

    /// `(block index, slice of the dynamic vector)` for every dynamic block, in block order.
    pub fn dynamic_layout(&self) -> Vec<(usize, Range<usize>)> {
        let mut offset = 0;
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.dynamic)
            .map(|(i, b)| {
                let r = offset..offset + b.param_len();
                offset = r.end;
                (i, r)
            })
            .collect()
    }

    /// Spatial factor the input size must be divisible by.
    pub fn size_multiple(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.kind != BlockKind::UpConv)
            .map(|b| b.stride)
            .product()
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EditError::shape(format!("invalid generator spec: {m}")));
        let (Some(first), Some(last)) = (self.blocks.first(), self.blocks.last()) else {
            return bad("no blocks".into());
        };
        if first.in_ch != 3 || last.out_ch != 3 {
            return bad("generator must map 3 channels to 3 channels".into());
        }
        if last.activation != Activation::Tanh {
            return bad("last block must end in tanh".into());
        }
        if !self.blocks.iter().any(|b| b.dynamic) || self.blocks.iter().all(|b| b.dynamic) {
            return bad("need at least one dynamic and one shared block".into());
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.kernel == 0 || b.kernel % 2 == 0 || b.in_ch == 0 || b.out_ch == 0 {
                return bad(format!("block {i}: kernel must be odd, channels positive"));
            }
            match b.kind {
                BlockKind::Conv if b.stride == 1 || b.stride == 2 => {}
                BlockKind::ResBlock if b.stride == 1 && b.in_ch == b.out_ch => {}
                BlockKind::UpConv | BlockKind::Output if b.stride == 1 => {}
                _ => return bad(format!("block {i}: unsupported stride/channels for {:?}", b.kind)),
            }
            if let Some(next) = self.blocks.get(i + 1) {
                if b.out_ch != next.in_ch {
                    return bad(format!(
                        "block {i} emits {} channels but block {} expects {}",
                        b.out_ch,
                        i + 1,
                        next.in_ch
                    ));
                }
            }
        }
        let down = self
            .blocks
            .iter()
            .filter(|b| b.kind == BlockKind::Conv && b.stride == 2)
            .count();
        let up = self
            .blocks
            .iter()
            .filter(|b| b.kind == BlockKind::UpConv)
            .count();
        if down != up {
            return bad(format!("{down} downsampling blocks but {up} upsampling blocks"));
        }
        Ok(())
    }
}
