use super::Initializer;
use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Scalar;

/// 2x2 max pooling: halves `H` and `W`, keeps `C`.
pub fn downsample<T: Scalar>(tape: &mut Tape<T>, x: Var) -> Result<Var> {
    tape.maxpool2(x)
}

/// 2x2 stride-2 up-convolution mapping `in_channels -> out_channels` and
/// doubling `H` and `W`.
#[derive(Debug, Clone)]
pub struct Upsample {
    pub in_channels: usize,
    pub out_channels: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Upsample {
    pub fn register<T: Scalar>(
        store: &mut ParamStore<T>,
        init: &mut Initializer,
        prefix: &str,
        in_channels: usize,
        out_channels: usize,
    ) -> Result<Self> {
        let weight = init.linear_kernel(store, format!("{prefix}.w"), [in_channels, out_channels, 2, 2], in_channels)?;
        let bias = init.bias(store, format!("{prefix}.b"), out_channels)?;
        Ok(Self {
            in_channels,
            out_channels,
            weight,
            bias,
        })
    }

    pub fn param_count(in_channels: usize, out_channels: usize) -> usize {
        4 * in_channels * out_channels + out_channels
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var], x: Var) -> Result<Var> {
        let c = tape.value(x).dims4("upsample")?.1;
        if c != self.in_channels {
            return Err(Error::Dimension {
                op: "upsample",
                dim: "input channels",
                expected: self.in_channels,
                found: c,
            });
        }
        tape.conv2d_transpose(x, params[self.weight.index()], Some(params[self.bias.index()]), 2)
    }
}
