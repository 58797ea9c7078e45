use std::fmt;

use super::ModelSpec;
use crate::error::Result;
use crate::nn::{Upsample, WeightSharing};

/// Published parameter counts (millions) for the `1 -> 16 -> ... -> 1`
/// R2U-Net at `t = 2` and `t = 3`.
pub const REFERENCE_COUNTS_M: [(usize, f64); 2] = [(2, 0.845), (3, 1.037)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBreakdown {
    pub total: usize,
    /// `(component, parameter count)` in registration order.
    pub parts: Vec<(String, usize)>,
}

/// Closed-form parameter count of the network described by `spec`,
/// computed without building it.
pub fn count_parameters(spec: &ModelSpec) -> Result<ParamBreakdown> {
    spec.validate()?;
    let depth = spec.poolings();
    let mut parts = Vec::new();
    for l in 0..depth {
        parts.push((format!("enc{l}"), spec.encoder_block(l).param_count()?));
    }
    parts.push(("bottleneck".to_string(), spec.bottleneck_block().param_count()?));
    for l in (0..depth).rev() {
        parts.push((format!("up{l}"), Upsample::param_count(spec.schedule[l + 1], spec.schedule[l])));
        parts.push((format!("dec{l}"), spec.decoder_block(l).param_count()?));
    }
    parts.push(("head".to_string(), spec.schedule[0] * spec.out_channels + spec.out_channels));
    Ok(ParamBreakdown {
        total: parts.iter().map(|(_, c)| c).sum(),
        parts,
    })
}

#[derive(Debug, Clone)]
pub struct AuditRow {
    pub t: usize,
    pub sharing: WeightSharing,
    pub count: usize,
    pub reference_m: f64,
}

impl AuditRow {
    pub fn delta_m(&self) -> f64 {
        self.count as f64 / 1e6 - self.reference_m
    }
}

/// Counts for both sharing modes at every published `t`, next to the
/// published figure.
pub fn audit(base: &ModelSpec) -> Result<Vec<AuditRow>> {
    let mut rows = Vec::new();
    for (t, reference_m) in REFERENCE_COUNTS_M {
        for sharing in [WeightSharing::Shared, WeightSharing::Unshared] {
            let spec = ModelSpec {
                t,
                sharing,
                ..base.clone()
            };
            rows.push(AuditRow {
                t,
                sharing,
                count: count_parameters(&spec)?.total,
                reference_m,
            });
        }
    }
    Ok(rows)
}

pub struct AuditTable<'a>(pub &'a [AuditRow]);

impl fmt::Display for AuditTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>3}  {:<9} {:>12} {:>10} {:>13} {:>10}",
            "t", "sharing", "params", "params(M)", "reference(M)", "delta(M)"
        )?;
        for r in self.0 {
            writeln!(
                f,
                "{:>3}  {:<9} {:>12} {:>10.3} {:>13.3} {:>+10.3}",
                r.t,
                r.sharing.as_str(),
                r.count,
                r.count as f64 / 1e6,
                r.reference_m,
                r.delta_m()
            )?;
        }
        Ok(())
    }
}
