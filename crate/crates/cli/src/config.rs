//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use r2unet::data::{Crop, FovOptions, NormScope, SplitPlan, SyntheticKind};
use r2unet::metrics::{EvalOptions, Inference};
use r2unet::train::{AdamConfig, TrainConfig};
use r2unet::ModelSpec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("config: {0}")]
pub struct ConfigError(pub String);

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Keys other than `model.*`, with their defaults.
const KEYS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("train.learning_rate", "0.0002"),
    ("train.beta1", "0.9"),
    ("train.beta2", "0.999"),
    ("train.epsilon", "0.00000001"),
    ("train.batch_size", "32"),
    ("train.epochs", "150"),
    ("train.validation_fraction", "0.1"),
    ("train.loss", "bce"),
    ("train.monitors", "mse,accuracy"),
    ("train.precision", "f32"),
    ("data.root", ""),
    ("data.synthetic", "none"),
    ("data.count", "64"),
    ("data.size", "32"),
    ("data.grayscale", "true"),
    ("data.crop_rows", ""),
    ("data.crop_cols", ""),
    ("data.resize", ""),
    ("data.normalize", "auto"),
    ("data.fov", "provided"),
    ("data.fov_threshold", "0.1"),
    ("data.fov_min_region", "64"),
    ("data.split", "all"),
    ("data.train_fraction", "0.7"),
    ("data.fold", "0"),
    ("data.train_ids", ""),
    ("data.test_ids", ""),
    ("data.patches", "0"),
    ("data.patch_size", "48"),
    ("eval.threshold", "0.5"),
    ("eval.fov", "on"),
    ("eval.averaging", "micro"),
    ("eval.inference", "whole"),
    ("eval.tile_size", "48"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FovMode {
    /// Ignore any fov/ directory.
    None,
    /// Use fov/ masks where present.
    Provided,
    /// Derive a mask from every image.
    Generate,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Root(PathBuf),
    Synthetic { kind: SyntheticKind, count: usize, size: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Split {
    /// Train and test on every sample.
    All,
    Plan { plan: SplitPlan, fold: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub source: Source,
    pub grayscale: bool,
    pub crop: Crop,
    pub resize: Option<(usize, usize)>,
    pub normalize: Option<NormScope>,
    pub fov: FovMode,
    pub fov_options: FovOptions,
    pub split: Split,
    /// Zero trains on whole images.
    pub patches: usize,
    pub patch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    pub seed: u64,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub precision: Precision,
    pub data: DataConfig,
    pub eval: EvalOptions,
    pub inference: Inference,
}

fn defaults() -> Vec<(String, String)> {
    ModelSpec::default()
        .to_kv()
        .into_iter()
        .chain(KEYS.iter().map(|&(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, ConfigError> {
    let v = &map[key];
    v.parse().map_err(|_| err(format!("{key}: cannot parse `{v}`")))
}

fn flag(map: &BTreeMap<String, String>, key: &str) -> Result<bool, ConfigError> {
    match map[key].as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        v => Err(err(format!("{key}: expected true or false, got `{v}`"))),
    }
}

fn ids(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn parse_extent(key: &str, v: &str) -> Result<(usize, usize), ConfigError> {
    let bad = || err(format!("{key}: expected HxW, got `{v}`"));
    let (h, w) = v.split_once(['x', 'X']).ok_or_else(bad)?;
    let h = h.trim().parse().map_err(|_| bad())?;
    let w = w.trim().parse().map_err(|_| bad())?;
    if h == 0 || w == 0 {
        return Err(err(format!("{key}: extents must be positive")));
    }
    Ok((h, w))
}

impl RunConfig {
    /// Parses config text; `#` starts a comment, unknown and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut given = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("line {}: expected `key = value`", no + 1)))?;
            let k = k.trim().to_string();
            if given.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(err(format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        Self::from_pairs(given)
    }

    pub fn from_pairs(given: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut values: BTreeMap<String, String> = defaults().into_iter().collect();
        for (k, v) in given {
            if !values.contains_key(&k) {
                return Err(err(format!("unknown key `{k}`")));
            }
            values.insert(k, v);
        }
        Self::resolve(values)
    }

    /// Replaces one key and re-validates.
    pub fn set(&self, key: &str, value: &str) -> Result<Self, ConfigError> {
        if !self.values.contains_key(key) {
            return Err(err(format!("unknown key `{key}`")));
        }
        let mut values = self.values.clone();
        values.insert(key.to_string(), value.to_string());
        Self::resolve(values)
    }

    pub fn value(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn resolve(m: BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let model = ModelSpec::from_kv(&m).map_err(|e| err(e.to_string()))?;
        let seed: u64 = num(&m, "seed")?;

        if m["train.loss"] != "bce" {
            return Err(err(format!("train.loss: only `bce` is supported, got `{}`", m["train.loss"])));
        }
        let monitors = ids(&m["train.monitors"]);
        if let Some(bad) = monitors.iter().find(|s| !matches!(s.as_str(), "mse" | "accuracy")) {
            return Err(err(format!("train.monitors: unknown monitor `{bad}` (mse|accuracy)")));
        }
        let train = TrainConfig {
            adam: AdamConfig {
                learning_rate: num(&m, "train.learning_rate")?,
                beta1: num(&m, "train.beta1")?,
                beta2: num(&m, "train.beta2")?,
                epsilon: num(&m, "train.epsilon")?,
            },
            batch_size: num(&m, "train.batch_size")?,
            epochs: num(&m, "train.epochs")?,
            validation_fraction: num(&m, "train.validation_fraction")?,
            seed,
            monitor_mse: monitors.iter().any(|s| s == "mse"),
            monitor_accuracy: monitors.iter().any(|s| s == "accuracy"),
        };
        train.validate().map_err(|e| err(format!("train: {e}")))?;
        let precision = match m["train.precision"].as_str() {
            "f32" => Precision::F32,
            "f64" => Precision::F64,
            v => return Err(err(format!("train.precision: expected f32 or f64, got `{v}`"))),
        };

        let source = match (m["data.synthetic"].as_str(), m["data.root"].as_str()) {
            ("none", "") => Source::Root(PathBuf::new()),
            ("none", root) => Source::Root(PathBuf::from(root)),
            (kind, "") => Source::Synthetic {
                kind: kind.parse().map_err(|e: String| err(format!("data.synthetic: {e}")))?,
                count: num(&m, "data.count")?,
                size: num(&m, "data.size")?,
            },
            _ => return Err(err("data.root and data.synthetic are mutually exclusive")),
        };
        let range = |key: &str| -> Result<_, ConfigError> {
            match m[key].as_str() {
                "" => Ok(None),
                v => Crop::parse_range(v).map(Some).map_err(|e| err(format!("{key}: {e}"))),
            }
        };
        let split = match m["data.split"].as_str() {
            "all" => Split::All,
            mode => {
                let plan = match mode {
                    "fixed_fraction" => SplitPlan::FixedFraction {
                        train_fraction: num(&m, "data.train_fraction")?,
                        seed,
                    },
                    "leave_one_out" => SplitPlan::LeaveOneOut,
                    "explicit" => SplitPlan::Explicit {
                        train: ids(&m["data.train_ids"]),
                        test: ids(&m["data.test_ids"]),
                    },
                    v => {
                        return Err(err(format!(
                            "data.split: unknown mode `{v}` (all|fixed_fraction|leave_one_out|explicit)"
                        )))
                    }
                };
                Split::Plan {
                    plan,
                    fold: num(&m, "data.fold")?,
                }
            }
        };
        let data = DataConfig {
            source,
            grayscale: flag(&m, "data.grayscale")?,
            crop: Crop {
                rows: range("data.crop_rows")?,
                cols: range("data.crop_cols")?,
            },
            resize: match m["data.resize"].as_str() {
                "" => None,
                v => Some(parse_extent("data.resize", v)?),
            },
            normalize: match m["data.normalize"].as_str() {
                "auto" if num::<usize>(&m, "data.patches")? > 0 => Some(NormScope::PerImage),
                "auto" => Some(NormScope::Dataset),
                "per_image" => Some(NormScope::PerImage),
                "dataset" => Some(NormScope::Dataset),
                "none" => None,
                v => return Err(err(format!("data.normalize: expected auto, per_image, dataset or none, got `{v}`"))),
            },
            fov: match m["data.fov"].as_str() {
                "none" => FovMode::None,
                "provided" => FovMode::Provided,
                "generate" => FovMode::Generate,
                v => return Err(err(format!("data.fov: expected none, provided or generate, got `{v}`"))),
            },
            fov_options: FovOptions {
                threshold: num(&m, "data.fov_threshold")?,
                min_region: num(&m, "data.fov_min_region")?,
            },
            split,
            patches: num(&m, "data.patches")?,
            patch_size: num(&m, "data.patch_size")?,
        };

        let eval = EvalOptions {
            threshold: num(&m, "eval.threshold")?,
            use_fov: flag(&m, "eval.fov")?,
            averaging: m["eval.averaging"].parse().map_err(|e: String| err(format!("eval.averaging: {e}")))?,
        };
        if !(0.0..=1.0).contains(&eval.threshold) {
            return Err(err(format!("eval.threshold: {} outside [0, 1]", eval.threshold)));
        }
        let inference = match m["eval.inference"].as_str() {
            "whole" => Inference::Whole,
            "tiled" => Inference::Tiled(num(&m, "eval.tile_size")?),
            v => return Err(err(format!("eval.inference: expected whole or tiled, got `{v}`"))),
        };

        Ok(Self {
            values: m,
            seed,
            model,
            train,
            precision,
            data,
            eval,
            inference,
        })
    }

    /// Every key with its effective value, in documentation order.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for (k, _) in defaults() {
            let _ = writeln!(out, "{k} = {}", self.values[&k]);
        }
        out
    }

    pub fn keys() -> Vec<String> {
        defaults().into_iter().map(|(k, _)| k).collect()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_pairs(BTreeMap::new()).expect("defaults are valid")
    }
}
