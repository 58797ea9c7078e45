use super::{Initializer, RclUnit, WeightSharing};
use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{invalid, Error, Result};
use crate::tensor::Scalar;

/// The four convolutional unit variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockVariant {
    /// Stacked plain convolutions.
    Forward,
    /// Stacked recurrent convolutional layers.
    Recurrent,
    /// Plain convolutions with an additive shortcut.
    Residual,
    /// Recurrent convolutional layers with an additive shortcut.
    RecurrentResidual,
}

impl BlockVariant {
    pub fn is_recurrent(self) -> bool {
        matches!(self, BlockVariant::Recurrent | BlockVariant::RecurrentResidual)
    }

    pub fn is_residual(self) -> bool {
        matches!(self, BlockVariant::Residual | BlockVariant::RecurrentResidual)
    }
}

/// How the residual shortcut is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shortcut {
    /// Identity only; blocks that change channel count are rejected.
    Identity,
    /// Identity when `in == out`, otherwise a 1x1 projection.
    #[default]
    IdentityWhenPossible,
    /// Always a 1x1 projection.
    Projection,
}

impl Shortcut {
    pub fn as_str(self) -> &'static str {
        match self {
            Shortcut::Identity => "identity",
            Shortcut::IdentityWhenPossible => "identity_when_possible",
            Shortcut::Projection => "one_by_one_conv",
        }
    }
}

impl std::str::FromStr for Shortcut {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(Shortcut::Identity),
            "identity_when_possible" => Ok(Shortcut::IdentityWhenPossible),
            "one_by_one_conv" | "projection" => Ok(Shortcut::Projection),
            other => Err(format!(
                "unknown shortcut `{other}` (identity|identity_when_possible|one_by_one_conv)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub variant: BlockVariant,
    pub in_channels: usize,
    pub out_channels: usize,
    pub t: usize,
    pub sharing: WeightSharing,
    pub rcl_per_block: usize,
    pub shortcut: Shortcut,
}

impl BlockSpec {
    /// Recurrence steps actually unrolled; non-recurrent variants use 0.
    pub fn effective_t(&self) -> usize {
        if self.variant.is_recurrent() {
            self.t
        } else {
            0
        }
    }

    /// Whether the shortcut is a learned 1x1 projection.
    pub fn projects(&self) -> Result<bool> {
        if !self.variant.is_residual() {
            return Ok(false);
        }
        match self.shortcut {
            Shortcut::Projection => Ok(true),
            Shortcut::IdentityWhenPossible => Ok(self.in_channels != self.out_channels),
            Shortcut::Identity if self.in_channels != self.out_channels => Err(invalid(format!(
                "identity shortcut cannot map {} to {} channels; use shortcut = identity_when_possible or one_by_one_conv",
                self.in_channels, self.out_channels
            ))),
            Shortcut::Identity => Ok(false),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rcl_per_block == 0 {
            return Err(invalid("rcl_per_block must be at least 1"));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(invalid("block channel counts must be positive"));
        }
        self.projects().map(|_| ())
    }

    pub fn param_count(&self) -> Result<usize> {
        self.validate()?;
        let t = self.effective_t();
        let mut total = RclUnit::param_count(self.in_channels, self.out_channels, t, self.sharing);
        total += (1..self.rcl_per_block)
            .map(|_| RclUnit::param_count(self.out_channels, self.out_channels, t, self.sharing))
            .sum::<usize>();
        if self.projects()? {
            total += self.in_channels * self.out_channels + self.out_channels;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// A stack of RCL sub-units, optionally wrapped in a shortcut:
/// `out = shortcut(x) + F(x)` for the residual variants, `out = F(x)` otherwise.
#[derive(Debug, Clone)]
pub struct Block {
    pub spec: BlockSpec,
    pub units: Vec<RclUnit>,
    pub projection: Option<Projection>,
}

impl Block {
    pub fn register<T: Scalar>(
        store: &mut ParamStore<T>,
        init: &mut Initializer,
        prefix: &str,
        spec: BlockSpec,
    ) -> Result<Self> {
        spec.validate()?;
        let t = spec.effective_t();
        let units = (0..spec.rcl_per_block)
            .map(|i| {
                let cin = if i == 0 { spec.in_channels } else { spec.out_channels };
                RclUnit::register(store, init, &format!("{prefix}.rcl{i}"), cin, spec.out_channels, t, spec.sharing)
            })
            .collect::<Result<_>>()?;
        let projection = if spec.projects()? {
            Some(Projection {
                weight: init.linear_kernel(
                    store,
                    format!("{prefix}.shortcut.w"),
                    [spec.out_channels, spec.in_channels, 1, 1],
                    spec.in_channels,
                )?,
                bias: init.bias(store, format!("{prefix}.shortcut.b"), spec.out_channels)?,
            })
        } else {
            None
        };
        Ok(Self { spec, units, projection })
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var], x: Var) -> Result<Var> {
        let c = tape.value(x).dims4("block")?.1;
        if c != self.spec.in_channels {
            return Err(Error::Dimension {
                op: "block",
                dim: "input channels",
                expected: self.spec.in_channels,
                found: c,
            });
        }
        let mut h = x;
        for unit in &self.units {
            h = unit.forward(tape, params, h)?;
        }
        if !self.spec.variant.is_residual() {
            return Ok(h);
        }
        let shortcut = match &self.projection {
            Some(p) => tape.conv2d(x, params[p.weight.index()], Some(params[p.bias.index()]), 1, 0)?,
            None => x,
        };
        tape.add(shortcut, h)
    }

    /// The stacked-unit branch `F(x)` without the shortcut.
    pub fn residual_branch<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var], x: Var) -> Result<Var> {
        let mut h = x;
        for unit in &self.units {
            h = unit.forward(tape, params, h)?;
        }
        Ok(h)
    }
}
