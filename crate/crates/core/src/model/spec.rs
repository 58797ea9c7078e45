use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Result};
use crate::nn::{BlockSpec, BlockVariant, Shortcut, WeightSharing};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    UNet,
    ResUNet,
    RuNet,
    R2uNet,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::UNet,
        Architecture::ResUNet,
        Architecture::RuNet,
        Architecture::R2uNet,
    ];

    pub fn block_variant(self) -> BlockVariant {
        match self {
            Architecture::UNet => BlockVariant::Forward,
            Architecture::ResUNet => BlockVariant::Residual,
            Architecture::RuNet => BlockVariant::Recurrent,
            Architecture::R2uNet => BlockVariant::RecurrentResidual,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::UNet => "unet",
            Architecture::ResUNet => "res_unet",
            Architecture::RuNet => "ru_net",
            Architecture::R2uNet => "r2u_net",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown model variant `{s}` (unet|res_unet|ru_net|r2u_net)"))
    }
}

/// Declarative description of an encoder-decoder network.
///
/// `schedule` lists the feature widths of the encoder levels down to the
/// bottleneck, e.g. `[16, 32, 64, 128]` for `1 -> 16 -> 32 -> 64 -> 128 -> 64
/// -> 32 -> 16 -> 1`. The decoder mirrors it; there are `schedule.len() - 1`
/// pooling stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub arch: Architecture,
    pub schedule: Vec<usize>,
    pub t: usize,
    pub sharing: WeightSharing,
    pub rcl_per_block: usize,
    pub shortcut: Shortcut,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            arch: Architecture::R2uNet,
            schedule: vec![16, 32, 64, 128],
            t: 2,
            sharing: WeightSharing::Shared,
            rcl_per_block: 2,
            shortcut: Shortcut::IdentityWhenPossible,
            in_channels: 1,
            out_channels: 1,
        }
    }
}

const MAX_LEVELS: usize = 16;
const MAX_WIDTH: usize = 1 << 16;
const MAX_T: usize = 64;

pub const SPEC_KEYS: [&str; 8] = [
    "model.variant",
    "model.schedule",
    "model.t",
    "model.sharing",
    "model.rcl_per_block",
    "model.shortcut",
    "model.in_channels",
    "model.out_channels",
];

impl ModelSpec {
    pub fn new(arch: Architecture, schedule: Vec<usize>, t: usize) -> Self {
        Self {
            arch,
            schedule,
            t,
            ..Self::default()
        }
    }

    /// The `1 -> 2 -> 4 -> 2 -> 1` network used for gradient checks and
    /// toy-scale training.
    pub fn tiny(arch: Architecture, t: usize) -> Self {
        Self::new(arch, vec![2, 4], t)
    }

    pub fn with_sharing(mut self, sharing: WeightSharing) -> Self {
        self.sharing = sharing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() || self.schedule.contains(&0) {
            return Err(invalid(format!("invalid channel schedule {:?}", self.schedule)));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(invalid("model in/out channels must be positive"));
        }
        if self.rcl_per_block == 0 {
            return Err(invalid("rcl_per_block must be at least 1"));
        }
        let widest = self.schedule.iter().chain([&self.in_channels, &self.out_channels]).max();
        if self.schedule.len() > MAX_LEVELS || widest > Some(&MAX_WIDTH) || self.t > MAX_T || self.rcl_per_block > MAX_T {
            return Err(invalid(format!(
                "model exceeds supported limits ({MAX_LEVELS} levels, {MAX_WIDTH} channels, t and rcl_per_block <= {MAX_T})"
            )));
        }
        for b in self.blocks() {
            b.1.projects()?;
        }
        Ok(())
    }

    pub fn poolings(&self) -> usize {
        self.schedule.len() - 1
    }

    /// Input extents must be multiples of this.
    pub fn divisor(&self) -> usize {
        1 << self.poolings()
    }

    /// Recurrence steps used by the blocks (0 for the non-recurrent variants).
    pub fn effective_t(&self) -> usize {
        if self.arch.block_variant().is_recurrent() {
            self.t
        } else {
            0
        }
    }

    fn block(&self, cin: usize, cout: usize) -> BlockSpec {
        BlockSpec {
            variant: self.arch.block_variant(),
            in_channels: cin,
            out_channels: cout,
            t: self.t,
            sharing: self.sharing,
            rcl_per_block: self.rcl_per_block,
            shortcut: self.shortcut,
        }
    }

    pub fn encoder_block(&self, level: usize) -> BlockSpec {
        let cin = if level == 0 { self.in_channels } else { self.schedule[level - 1] };
        self.block(cin, self.schedule[level])
    }

    pub fn bottleneck_block(&self) -> BlockSpec {
        self.encoder_block(self.poolings())
    }

    /// Decoder block at `level` consumes the skip concatenated with the
    /// up-sampled features: `2 * schedule[level]` channels in.
    pub fn decoder_block(&self, level: usize) -> BlockSpec {
        self.block(2 * self.schedule[level], self.schedule[level])
    }

    /// Named blocks in registration order (the up-convolutions and the head
    /// are not blocks).
    pub fn blocks(&self) -> Vec<(String, BlockSpec)> {
        let depth = self.poolings();
        let mut out: Vec<_> = (0..depth).map(|l| (format!("enc{l}"), self.encoder_block(l))).collect();
        out.push(("bottleneck".into(), self.bottleneck_block()));
        out.extend((0..depth).rev().map(|l| (format!("dec{l}"), self.decoder_block(l))));
        out
    }

    /// `1 -> 16 -> 32 -> 64 -> 128 -> 64 -> 32 -> 16 -> 1` style rendering.
    pub fn schedule_string(&self) -> String {
        let mut parts = vec![self.in_channels];
        parts.extend(&self.schedule);
        parts.extend(self.schedule.iter().rev().skip(1));
        parts.push(self.out_channels);
        parts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" -> ")
    }

    pub fn to_kv(&self) -> Vec<(String, String)> {
        let schedule = self.schedule.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        [
            self.arch.as_str().to_string(),
            schedule,
            self.t.to_string(),
            self.sharing.as_str().to_string(),
            self.rcl_per_block.to_string(),
            self.shortcut.as_str().to_string(),
            self.in_channels.to_string(),
            self.out_channels.to_string(),
        ]
        .into_iter()
        .zip(SPEC_KEYS)
        .map(|(v, k)| (k.to_string(), v))
        .collect()
    }

    /// Reads the `model.*` keys; missing keys keep their defaults, other
    /// prefixes are ignored.
    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut spec = ModelSpec::default();
        for (key, value) in map.iter().filter(|(k, _)| k.starts_with("model.")) {
            let bad = |e: String| invalid(format!("{key}: {e}"));
            match key.as_str() {
                "model.variant" => spec.arch = value.parse().map_err(bad)?,
                "model.schedule" => spec.schedule = parse_list(value).map_err(bad)?,
                "model.t" => spec.t = parse_num(value).map_err(bad)?,
                "model.sharing" => spec.sharing = value.parse().map_err(bad)?,
                "model.rcl_per_block" => spec.rcl_per_block = parse_num(value).map_err(bad)?,
                "model.shortcut" => spec.shortcut = value.parse().map_err(bad)?,
                "model.in_channels" => spec.in_channels = parse_num(value).map_err(bad)?,
                "model.out_channels" => spec.out_channels = parse_num(value).map_err(bad)?,
                _ => return Err(invalid(format!("unknown key `{key}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_num(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
}

/// Accepts `16,32,64` as well as the arrow form `16 -> 32 -> 64`.
fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    s.replace("->", ",")
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(parse_num)
        .collect()
}
