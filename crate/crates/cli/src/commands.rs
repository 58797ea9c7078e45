use std::fs;
use std::path::{Path, PathBuf};

use r2unet::autodiff::{gradcheck, GradcheckOptions};
use r2unet::data::{
    generate_fov, ingest, make_folds, normalize_all, read_image, resize, sample_patches, synthetic, to_grayscale,
    write_image, IngestOptions, RawImage, Sample,
};
use r2unet::metrics::{binarize, evaluate, predict_image, Inference};
use r2unet::model::{audit, count_parameters, load_checkpoint, save_checkpoint, AuditTable, TrainMeta};
use r2unet::train::{fit, AdamState, SegmentationSet};
use r2unet::{Error, Model, Scalar, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{FovMode, RunConfig, Source, Split};
use crate::error::CliError;
use crate::svg;

pub type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Test,
}

/// Loads and prepares every sample named by the `data.*` keys: ingest or
/// generate, resize, FOV handling, normalisation.
pub fn load_dataset(cfg: &RunConfig) -> CliResult<Vec<Sample>> {
    let d = &cfg.data;
    let mut samples = match &d.source {
        Source::Root(root) if root.as_os_str().is_empty() => {
            return Err(Error::Data("no dataset: set data.root or data.synthetic".into()).into())
        }
        Source::Root(root) => ingest(
            root,
            &IngestOptions {
                grayscale: d.grayscale,
                crop: d.crop.clone(),
            },
        )?,
        Source::Synthetic { kind, count, size } => synthetic(*kind, *count, *size, cfg.seed)?,
    };
    if let Some((h, w)) = d.resize {
        samples = samples.iter().map(|s| resize(s, h, w)).collect::<Result<_, _>>()?;
    }
    match d.fov {
        FovMode::None => samples.iter_mut().for_each(|s| s.fov = None),
        FovMode::Provided => {}
        FovMode::Generate => {
            samples = samples
                .iter()
                .map(|s| generate_fov(s, &d.fov_options))
                .collect::<Result<_, _>>()?
        }
    }
    if let Some(scope) = d.normalize {
        samples = normalize_all(&samples, scope);
    }
    Ok(samples)
}

/// The part of `samples` that `role` uses under `data.split`.
pub fn select(cfg: &RunConfig, samples: Vec<Sample>, role: Role) -> CliResult<Vec<Sample>> {
    let Split::Plan { plan, fold } = &cfg.data.split else {
        return Ok(samples);
    };
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let folds = make_folds(plan, &ids)?;
    let f = folds
        .get(*fold)
        .ok_or_else(|| Error::Data(format!("data.fold {fold} out of range ({} folds)", folds.len())))?;
    let wanted = match role {
        Role::Train => &f.train,
        Role::Test => &f.test,
    };
    let picked: Vec<Sample> = samples.into_iter().filter(|s| wanted.contains(&s.id)).collect();
    if picked.is_empty() {
        return Err(Error::Data("selected split is empty".into()).into());
    }
    Ok(picked)
}

fn out_dir(out: &Path, cfg: &RunConfig) -> CliResult {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.resolved"), cfg.resolved())?;
    Ok(())
}

fn training_set(cfg: &RunConfig, samples: &[Sample]) -> CliResult<SegmentationSet> {
    if cfg.data.patches > 0 {
        let set = sample_patches(samples, cfg.data.patches, cfg.data.patch_size, cfg.seed)?;
        return Ok(set.to_segmentation_set()?);
    }
    let mut set = SegmentationSet::default();
    for s in samples {
        set.push(s.image.clone(), s.mask.clone());
    }
    Ok(set)
}

fn train_as<T: Scalar>(cfg: &RunConfig, set: &SegmentationSet, out: &Path) -> CliResult {
    let mut model = Model::<T>::build(cfg.model.clone(), cfg.seed)?;
    let mut adam = AdamState::new(&model.params);
    let log = match fit(&mut model, &mut adam, set, &cfg.train) {
        Ok(log) => log,
        Err(e) => {
            if let r2unet::train::FitError::NonFinite { partial, .. } = &e {
                fs::write(out.join("runlog.csv"), partial.to_csv())?;
            }
            return Err(e.into());
        }
    };
    fs::write(out.join("runlog.csv"), log.to_csv())?;
    fs::write(out.join("curves.svg"), svg::curves(&log))?;
    let meta = TrainMeta {
        epoch: log.records.len(),
        seed: cfg.seed,
    };
    save_checkpoint(out.join("model.ckpt"), &model, &meta, Some(&adam))?;
    if let Some(r) = log.last() {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        println!(
            "epoch {} train_loss {:.6} train_acc {} val_loss {} val_acc {}",
            r.epoch,
            r.train_loss,
            fmt(r.train_acc),
            fmt(r.val_loss),
            fmt(r.val_acc)
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> CliResult {
    let samples = select(cfg, load_dataset(cfg)?, Role::Train)?;
    let set = training_set(cfg, &samples)?;
    out_dir(out, cfg)?;
    match cfg.precision {
        crate::config::Precision::F32 => train_as::<f32>(cfg, &set, out),
        crate::config::Precision::F64 => train_as::<f64>(cfg, &set, out),
    }
}

fn evaluate_as<T: Scalar>(cfg: &RunConfig, checkpoint: &Path, out: &Path) -> CliResult {
    let model = load_checkpoint::<T>(checkpoint)?.model;
    let samples = select(cfg, load_dataset(cfg)?, Role::Test)?;
    let report = evaluate(&model, &samples, cfg.inference, &cfg.eval)?;
    out_dir(out, cfg)?;
    fs::write(out.join("metrics.csv"), report.to_csv())?;
    fs::write(out.join("roc.csv"), report.roc_csv())?;
    let summary = report.summary();
    fs::write(out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: &Path, out: &Path) -> CliResult {
    match cfg.precision {
        crate::config::Precision::F32 => evaluate_as::<f32>(cfg, checkpoint, out),
        crate::config::Precision::F64 => evaluate_as::<f64>(cfg, checkpoint, out),
    }
}

#[derive(Debug, Clone)]
pub struct PredictArgs {
    pub checkpoint: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub threshold: f32,
    pub auto_pad: bool,
    /// Output extension: png, pgm.
    pub format: String,
}

fn prepare_input(cfg: &RunConfig, path: &Path) -> CliResult<Tensor<f32>> {
    let mut t = read_image(path)?.to_tensor();
    if cfg.data.grayscale {
        t = to_grayscale(&t)?;
    }
    Ok(cfg.data.crop.apply(&t)?)
}

pub fn cmd_predict(cfg: &RunConfig, args: &PredictArgs, out: &Path) -> CliResult {
    if args.inputs.is_empty() {
        return Err(CliError::Usage("predict needs at least one input image".into()));
    }
    if !matches!(args.format.as_str(), "png" | "pgm") {
        return Err(CliError::Usage(format!("--format must be png or pgm, got `{}`", args.format)));
    }
    let model = load_checkpoint::<f32>(&args.checkpoint)?.model;
    let mut images = Vec::with_capacity(args.inputs.len());
    for p in &args.inputs {
        let t = prepare_input(cfg, p)?;
        if !args.auto_pad {
            model.check_input(t.shape())?;
        }
        let blank = Tensor::zeros(vec![1, 1, t.shape()[2], t.shape()[3]]);
        images.push(Sample::new(p.display().to_string(), t, blank, None)?);
    }
    if let Some(scope) = cfg.data.normalize {
        images = normalize_all(&images, scope);
    }
    out_dir(out, cfg)?;
    for (p, s) in args.inputs.iter().zip(&images) {
        let prob = predict_image(&model, &s.image, Inference::Whole)?;
        let mask = Tensor::new(prob.shape().to_vec(), binarize(prob.data(), args.threshold)?)?;
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        let ext = &args.format;
        write_image(&out.join(format!("{stem}_prob.{ext}")), &RawImage::from_unit_plane(&prob)?)?;
        write_image(&out.join(format!("{stem}_mask.{ext}")), &RawImage::from_unit_plane(&mask)?)?;
        println!("{}: {}x{}", p.display(), s.width(), s.height());
    }
    Ok(())
}

pub fn cmd_params(cfg: &RunConfig) -> CliResult {
    let spec = &cfg.model;
    let b = count_parameters(spec)?;
    println!("variant  = {}", spec.arch.as_str());
    println!("schedule = {}", spec.schedule_string());
    println!("t = {}, sharing = {}", spec.t, spec.sharing.as_str());
    println!("total    = {} ({:.3}M)", b.total, b.total as f64 / 1e6);
    for (name, n) in &b.parts {
        println!("  {name:<24} {n}");
    }
    println!();
    println!("audit ({} schedule, reference counts are the published figures):", spec.arch.as_str());
    print!("{}", AuditTable(&audit(spec)?));
    Ok(())
}

/// Finite-difference check of the configured model on a random binary task
/// whose extents are twice the model divisor.
pub fn cmd_gradcheck(cfg: &RunConfig) -> CliResult<r2unet::autodiff::GradcheckReport> {
    let model = Model::<f64>::build(cfg.model.clone(), cfg.seed)?;
    let side = 2 * cfg.model.divisor();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    let shape = vec![1, cfg.model.in_channels, side, side];
    let input = Tensor::<f64>::randn(shape, 1.0, &mut rng);
    let target =
        Tensor::<f64>::from_fn(vec![1, cfg.model.out_channels, side, side], |_| rng.random_bool(0.5) as u8 as f64);
    let mut store = model.params.clone();
    let opts = GradcheckOptions {
        seed: cfg.seed,
        ..Default::default()
    };
    let report = gradcheck(
        &mut store,
        |tape, params| {
            let vars = tape.bind(params)?;
            let x = tape.constant(input.clone())?;
            let y = model.forward(tape, &vars, x)?;
            tape.bce_loss(y, &target)
        },
        &opts,
    )?;
    println!("{report}");
    if !report.passed() {
        return Err(CliError::Numeric(format!(
            "max relative error {:.3e} exceeds {:.1e}",
            report.max_rel_err, report.tolerance
        )));
    }
    Ok(report)
}

pub fn cmd_sample_patches(cfg: &RunConfig, count: Option<usize>, out: &Path) -> CliResult {
    let count = count.unwrap_or(cfg.data.patches);
    if count == 0 {
        return Err(CliError::Usage("set data.patches or --count to a positive number".into()));
    }
    let samples = select(cfg, load_dataset(cfg)?, Role::Train)?;
    let set = sample_patches(&samples, count, cfg.data.patch_size, cfg.seed)?;
    out_dir(out, cfg)?;
    let path = out.join("patches.bin");
    set.save(&path)?;
    println!(
        "wrote {} patches of {}x{} from {} samples to {}",
        set.len(),
        set.patch_size,
        set.patch_size,
        samples.len(),
        path.display()
    );
    Ok(())
}
