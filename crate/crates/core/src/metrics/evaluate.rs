use std::fmt::Write as _;

use super::confusion::{binarize, confusion, dice_counts, jaccard_counts, scores, ConfusionCounts, Ratio};
use super::roc::{roc_from_pairs, RocPoint};
use crate::data::Sample;
use crate::error::{invalid, Error, Result};
use crate::model::Model;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Pool counts (and scores, for AUC) over all samples.
    Micro,
    /// Mean of per-sample scores.
    Macro,
}

impl Averaging {
    pub fn as_str(self) -> &'static str {
        match self {
            Averaging::Micro => "micro",
            Averaging::Macro => "macro",
        }
    }
}

impl std::str::FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "micro" => Ok(Self::Micro),
            "macro" => Ok(Self::Macro),
            other => Err(format!("unknown averaging `{other}` (micro|macro)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inference {
    /// One forward pass per image, zero-padded to the model divisor and cropped back.
    Whole,
    /// Square tiles of this size (last row/column shifted inwards), stitched back.
    Tiled(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub threshold: f32,
    /// Restrict scoring to `fov == 1` for samples that carry an FOV.
    pub use_fov: bool,
    pub averaging: Averaging,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            use_fov: true,
            averaging: Averaging::Micro,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMetrics {
    pub id: String,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub sensitivity: Ratio,
    pub specificity: Ratio,
    pub f1: Ratio,
    pub dice: Ratio,
    pub jaccard: Ratio,
    /// `None` when the sample's scoped ground truth has a single class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub options: EvalOptions,
    /// Whether any sample was actually restricted to its FOV.
    pub fov_applied: bool,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub sensitivity: Ratio,
    pub specificity: Ratio,
    pub f1: Ratio,
    pub dice: Ratio,
    pub jaccard: Ratio,
    pub auc: Option<f64>,
    /// Pooled ROC (micro averaging only).
    pub roc: Vec<RocPoint>,
    pub samples: Vec<SampleMetrics>,
}

pub const METRICS_COLUMNS: &str = "id,tp,tn,fp,fn,ac,se,sp,f1,dc,js,auc";

fn scoped<'a>(s: &'a Sample, opts: &EvalOptions) -> Option<&'a [f32]> {
    if opts.use_fov {
        s.fov.as_ref().map(|f| f.data())
    } else {
        None
    }
}

fn pairs(prob: &[f32], gt: &[f32], fov: Option<&[f32]>) -> Vec<(f32, bool)> {
    prob.iter()
        .zip(gt)
        .enumerate()
        .filter(|(i, _)| fov.is_none_or(|f| f[*i] == 1.0))
        .map(|(_, (&p, &g))| (p, g == 1.0))
        .collect()
}

fn mean_ratio(items: impl Iterator<Item = Ratio>) -> Ratio {
    let (mut sum, mut n, mut vacuous) = (0.0, 0usize, false);
    for r in items {
        sum += r.value;
        n += 1;
        vacuous |= r.vacuous;
    }
    Ratio {
        value: sum / n as f64,
        vacuous,
    }
}

/// Scores probability maps `[1, 1, H, W]` against `samples`.
pub fn evaluate_predictions(samples: &[Sample], probs: &[Tensor<f32>], opts: &EvalOptions) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::Data("no samples to evaluate".into()));
    }
    if samples.len() != probs.len() {
        return Err(invalid(format!("{} samples but {} predictions", samples.len(), probs.len())));
    }
    let mut rows = Vec::with_capacity(samples.len());
    let mut total = ConfusionCounts::default();
    let mut pooled = Vec::new();
    for (s, p) in samples.iter().zip(probs) {
        if p.shape() != s.mask.shape() {
            return Err(Error::Dimension {
                op: "evaluate",
                dim: "prediction channels/extents",
                expected: s.mask.len(),
                found: p.len(),
            });
        }
        let fov = scoped(s, opts);
        let bin = binarize(p.data(), opts.threshold)?;
        let c = confusion(&bin, s.mask.data(), fov)?;
        let sc = scores(&c).map_err(|_| Error::Data(format!("{}: no pixels inside the FOV", s.id)))?;
        let pr = pairs(p.data(), s.mask.data(), fov);
        let auc = roc_from_pairs(pr.clone()).ok().map(|r| r.auc);
        if opts.averaging == Averaging::Micro {
            pooled.extend(pr);
        }
        total += c;
        rows.push(SampleMetrics {
            id: s.id.clone(),
            counts: c,
            accuracy: sc.accuracy,
            sensitivity: sc.sensitivity,
            specificity: sc.specificity,
            f1: sc.f1,
            dice: dice_counts(&c),
            jaccard: jaccard_counts(&c),
            auc,
        });
    }
    let fov_applied = samples.iter().any(|s| scoped(s, opts).is_some());
    let report = match opts.averaging {
        Averaging::Micro => {
            let sc = scores(&total)?;
            let roc = roc_from_pairs(pooled).ok();
            MetricsReport {
                options: *opts,
                fov_applied,
                counts: total,
                accuracy: sc.accuracy,
                sensitivity: sc.sensitivity,
                specificity: sc.specificity,
                f1: sc.f1,
                dice: dice_counts(&total),
                jaccard: jaccard_counts(&total),
                auc: roc.as_ref().map(|r| r.auc),
                roc: roc.map(|r| r.points).unwrap_or_default(),
                samples: rows,
            }
        }
        Averaging::Macro => {
            let aucs: Vec<f64> = rows.iter().filter_map(|r| r.auc).collect();
            MetricsReport {
                options: *opts,
                fov_applied,
                counts: total,
                accuracy: rows.iter().map(|r| r.accuracy).sum::<f64>() / rows.len() as f64,
                sensitivity: mean_ratio(rows.iter().map(|r| r.sensitivity)),
                specificity: mean_ratio(rows.iter().map(|r| r.specificity)),
                f1: mean_ratio(rows.iter().map(|r| r.f1)),
                dice: mean_ratio(rows.iter().map(|r| r.dice)),
                jaccard: mean_ratio(rows.iter().map(|r| r.jaccard)),
                auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
                roc: Vec::new(),
                samples: rows,
            }
        }
    };
    Ok(report)
}

/// Probability map for one `[1, C, H, W]` image.
pub fn predict_image<T: Scalar>(model: &Model<T>, image: &Tensor<f32>, inference: Inference) -> Result<Tensor<f32>> {
    let (_, c, h, w) = image.dims4("predict")?;
    let spec = model.spec();
    if c != spec.in_channels {
        return Err(Error::Dimension {
            op: "predict",
            dim: "input channels",
            expected: spec.in_channels,
            found: c,
        });
    }
    let d = spec.divisor();
    let run = |x: &Tensor<f32>| -> Result<Tensor<f32>> {
        let (_, _, th, tw) = x.dims4("predict")?;
        let (ph, pw) = (th.div_ceil(d) * d, tw.div_ceil(d) * d);
        let padded = if (ph, pw) == (th, tw) { x.clone() } else { x.pad_to(ph, pw)? };
        let out = model.predict(&padded.cast())?.cast::<f32>();
        if (ph, pw) == (th, tw) {
            Ok(out)
        } else {
            out.crop(0, 0, th, tw)
        }
    };
    match inference {
        Inference::Whole => run(image),
        Inference::Tiled(size) => {
            if size == 0 || size > h || size > w {
                return Err(invalid(format!("tile size {size} does not fit a {h}x{w} image")));
            }
            let starts = |extent: usize| {
                let mut v: Vec<usize> = (0..extent - size + 1).step_by(size).collect();
                if *v.last().expect("nonempty") + size < extent {
                    v.push(extent - size);
                }
                v
            };
            let mut out = Tensor::zeros(vec![1, spec.out_channels, h, w]);
            for &y in &starts(h) {
                for &x in &starts(w) {
                    let tile = run(&image.crop(y, x, size, size)?)?;
                    let dst = out.data_mut();
                    for ch in 0..spec.out_channels {
                        for r in 0..size {
                            let src = &tile.data()[(ch * size + r) * size..][..size];
                            dst[(ch * h + y + r) * w + x..][..size].copy_from_slice(src);
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    samples: &[Sample],
    inference: Inference,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    if samples.is_empty() {
        return Err(Error::Data("no samples to evaluate".into()));
    }
    if model.spec().out_channels != 1 {
        return Err(Error::Dimension {
            op: "evaluate",
            dim: "output channels",
            expected: 1,
            found: model.spec().out_channels,
        });
    }
    let probs = samples
        .iter()
        .map(|s| predict_image(model, &s.image, inference))
        .collect::<Result<Vec<_>>>()?;
    evaluate_predictions(samples, &probs, opts)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn row(id: &str, c: &ConfusionCounts, vals: [f64; 6], auc: Option<f64>) -> String {
    let v: Vec<String> = vals.iter().map(f64::to_string).collect();
    format!("{id},{},{},{},{},{},{}\n", c.tp, c.tn, c.fp, c.fn_, v.join(","), opt(auc))
}

impl MetricsReport {
    /// One row per sample, then `AGGREGATE`; empty `auc` where undefined.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{METRICS_COLUMNS}\n");
        for r in &self.samples {
            out += &row(
                &r.id,
                &r.counts,
                [r.accuracy, r.sensitivity.value, r.specificity.value, r.f1.value, r.dice.value, r.jaccard.value],
                r.auc,
            );
        }
        out += &row(
            "AGGREGATE",
            &self.counts,
            [
                self.accuracy,
                self.sensitivity.value,
                self.specificity.value,
                self.f1.value,
                self.dice.value,
                self.jaccard.value,
            ],
            self.auc,
        );
        out
    }

    pub fn roc_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for p in &self.roc {
            let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
        }
        out
    }

    /// `key = value` lines.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let flag = |r: &Ratio| if r.vacuous { " (vacuous)" } else { "" };
        let _ = writeln!(out, "fov = {}", if self.fov_applied { "on" } else { "off" });
        let _ = writeln!(out, "averaging = {}", self.options.averaging.as_str());
        let _ = writeln!(out, "threshold = {}", self.options.threshold);
        let _ = writeln!(out, "samples = {}", self.samples.len());
        let _ = writeln!(out, "pixels = {}", self.counts.total());
        let _ = writeln!(out, "ac = {}", self.accuracy);
        for (k, r) in [
            ("se", &self.sensitivity),
            ("sp", &self.specificity),
            ("f1", &self.f1),
            ("dc", &self.dice),
            ("js", &self.jaccard),
        ] {
            let _ = writeln!(out, "{k} = {}{}", r.value, flag(r));
        }
        let _ = writeln!(out, "auc = {}", self.auc.map_or("undefined".to_string(), |a| a.to_string()));
        out
    }
}
