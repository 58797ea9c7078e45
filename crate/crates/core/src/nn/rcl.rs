use super::Initializer;
use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightSharing {
    /// One recurrent kernel reused at every step.
    #[default]
    Shared,
    /// A separate recurrent kernel per step.
    Unshared,
}

impl WeightSharing {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightSharing::Shared => "shared",
            WeightSharing::Unshared => "unshared",
        }
    }
}

impl std::str::FromStr for WeightSharing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shared" => Ok(WeightSharing::Shared),
            "unshared" => Ok(WeightSharing::Unshared),
            other => Err(format!("unknown weight sharing `{other}` (shared|unshared)")),
        }
    }
}

/// A recurrent convolutional layer unrolled for `t` steps.
///
/// With feed-forward kernel `w_f`, recurrent kernel `w_r` and bias `b`:
///
/// ```text
/// z(0) = w_f * x + b
/// z(s) = w_f * x + w_r * relu(z(s-1)) + b      s = 1..=t
/// out  = relu(z(t))
/// ```
///
/// `t` counts the recurrent applications after the initial feed-forward
/// pass, so `t = 2` performs three convolutions of the state in total. The
/// feed-forward term is the same at every step and is evaluated once. With
/// `t = 0` the unit is a plain `relu(conv + b)` layer.
#[derive(Debug, Clone)]
pub struct RclUnit {
    pub in_channels: usize,
    pub out_channels: usize,
    pub t: usize,
    pub sharing: WeightSharing,
    pub w_f: ParamId,
    pub bias: ParamId,
    /// Empty when `t = 0`, one kernel when shared, `t` kernels otherwise.
    pub w_r: Vec<ParamId>,
}

impl RclUnit {
    pub fn register<T: Scalar>(
        store: &mut ParamStore<T>,
        init: &mut Initializer,
        prefix: &str,
        in_channels: usize,
        out_channels: usize,
        t: usize,
        sharing: WeightSharing,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(crate::error::invalid("RCL channel counts must be positive"));
        }
        let fan_in = if t == 0 { 9 * in_channels } else { 9 * (in_channels + out_channels) };
        let w_f = init.kernel(store, format!("{prefix}.w_f"), [out_channels, in_channels, 3, 3], fan_in)?;
        let bias = init.bias(store, format!("{prefix}.b"), out_channels)?;
        let n_rec = match (t, sharing) {
            (0, _) => 0,
            (_, WeightSharing::Shared) => 1,
            (t, WeightSharing::Unshared) => t,
        };
        let w_r = (0..n_rec)
            .map(|s| {
                let name = match sharing {
                    WeightSharing::Shared => format!("{prefix}.w_r"),
                    WeightSharing::Unshared => format!("{prefix}.w_r{}", s + 1),
                };
                init.kernel(store, name, [out_channels, out_channels, 3, 3], fan_in)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            in_channels,
            out_channels,
            t,
            sharing,
            w_f,
            bias,
            w_r,
        })
    }

    pub fn param_count(in_channels: usize, out_channels: usize, t: usize, sharing: WeightSharing) -> usize {
        let kernels = match (t, sharing) {
            (0, _) => 0,
            (_, WeightSharing::Shared) => 1,
            (t, WeightSharing::Unshared) => t,
        };
        9 * in_channels * out_channels + out_channels + kernels * 9 * out_channels * out_channels
    }

    fn recurrent_kernel(&self, step: usize) -> ParamId {
        match self.sharing {
            WeightSharing::Shared => self.w_r[0],
            WeightSharing::Unshared => self.w_r[step - 1],
        }
    }

    /// `params` are the tape handles from [`Tape::bind`].
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var], x: Var) -> Result<Var> {
        let c = tape.value(x).dims4("rcl")?.1;
        if c != self.in_channels {
            return Err(Error::Dimension {
                op: "rcl",
                dim: "input channels",
                expected: self.in_channels,
                found: c,
            });
        }
        let w_f = params[self.w_f.index()];
        let b = params[self.bias.index()];
        let feed = tape.conv2d(x, w_f, Some(b), 1, 1)?;
        let mut state = tape.relu(feed)?;
        for step in 1..=self.t {
            let w_r = params[self.recurrent_kernel(step).index()];
            let rec = tape.conv2d(state, w_r, None, 1, 1)?;
            let z = tape.add(feed, rec)?;
            state = tape.relu(z)?;
        }
        Ok(state)
    }
}
