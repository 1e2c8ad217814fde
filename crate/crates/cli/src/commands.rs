use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use denc::data::export::write_embeddings;
use denc::data::{gen_synthetic, load_dataset, load_model, read_checkpoint_dtype, save_dataset, save_model, FeatureDataset};
use denc::delta::{train as fit, DeltaEncoderModel, Precision, Variant};
use denc::eval::{draw_episodes, evaluate, sweep_csv, sweep_samples, synthesize_episode, EvalConfig, Method};
use denc::nn::{Matrix, Scalar};
use serde_json::json;

use crate::config::RunConfig;
use crate::{Baseline, Common, EvalFlags, GenFlags, ModelFlags, Scorer, TrainFlags};

pub const DATASET_FILE: &str = "dataset.dencfs";
pub const MODEL_FILE: &str = "model.dencmd";

fn setup(common: &Common, command: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    cfg.command = command.to_owned();
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    fs::create_dir_all(&common.out_dir)
        .map_err(|e| denc::Error::Io {
            path: common.out_dir.clone(),
            source: e,
        })
        .context("cannot create output directory")?;
    Ok(cfg)
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn apply_model(cfg: &mut RunConfig, f: &ModelFlags) {
    set(&mut cfg.variant, f.variant);
    set(&mut cfg.arch.hidden_dim, f.hidden_dim);
    set(&mut cfg.arch.z_dim, f.z_dim);
}

fn apply_train(cfg: &mut RunConfig, f: &TrainFlags) {
    set(&mut cfg.train.learning_rate, f.learning_rate);
    set(&mut cfg.train.epochs, f.epochs);
    set(&mut cfg.train.batch_size, f.batch_size);
    set(&mut cfg.train.dropout, f.dropout);
    set(&mut cfg.train.input_dropout, f.input_dropout);
    set(&mut cfg.train.precision, f.precision);
}

fn apply_eval(cfg: &mut RunConfig, f: &EvalFlags) {
    set(&mut cfg.eval.way, f.way);
    set(&mut cfg.eval.shot, f.shot);
    set(&mut cfg.eval.episodes, f.episodes);
    set(&mut cfg.eval.samples_per_class, f.samples);
}

fn dataset(cfg: &mut RunConfig, flag: Option<PathBuf>) -> Result<FeatureDataset> {
    set(&mut cfg.dataset, flag.map(Some));
    let Some(path) = cfg.dataset.clone() else {
        return Err(denc::Error::Config("no dataset given (--data or `dataset` in the config file)".into()).into());
    };
    Ok(load_dataset(&path)?)
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| denc::Error::Io { path, source: e })?;
    Ok(())
}

fn dataset_summary(ds: &FeatureDataset) -> serde_json::Value {
    json!({
        "samples": ds.len(),
        "dim": ds.dim(),
        "classes": ds.num_classes(),
        "seen_classes": ds.seen_classes().len(),
        "unseen_classes": ds.unseen_classes().len(),
        "attribute_dim": ds.attribute_dim(),
    })
}

pub fn gen(common: &Common, flags: &GenFlags) -> Result<()> {
    let mut cfg = setup(common, "gen")?;
    let spec = &mut cfg.gen;
    set(&mut spec.num_classes, flags.classes);
    set(&mut spec.unseen_classes, flags.unseen);
    set(&mut spec.samples_per_class, flags.samples_per_class);
    set(&mut spec.feature_dim, flags.dim);
    set(&mut spec.basis_dim, flags.basis_dim);
    set(&mut spec.center_dim, flags.center_dim);
    set(&mut spec.deformation_scale, flags.scale);
    set(&mut spec.class_mode_scale, flags.class_mode_scale);
    set(&mut spec.separation, flags.separation);
    set(&mut spec.attribute_dim, flags.attribute_dim);
    if flags.linear {
        spec.nonlinear = false;
    }
    spec.seed = cfg.seed;
    let ds = gen_synthetic(spec)?;
    let path = common.out_dir.join(DATASET_FILE);
    save_dataset(&ds, &path)?;
    println!(
        "wrote {} ({} samples, {} classes, {} unseen, d={})",
        path.display(),
        ds.len(),
        ds.num_classes(),
        ds.unseen_classes().len(),
        ds.dim()
    );
    Ok(())
}

fn train_typed<T: Scalar>(cfg: &RunConfig, ds: &FeatureDataset, out_dir: &Path) -> Result<()> {
    let arch = cfg.arch(ds.dim(), ds.attribute_dim());
    let mut model = DeltaEncoderModel::<T>::build(arch, cfg.seed)?;
    let started = Instant::now();
    let history = if arch.variant.is_closed_form() {
        Vec::new()
    } else {
        fit(&mut model, ds, &cfg.train_config(arch.variant))?
    };
    save_model(&model, out_dir.join(MODEL_FILE))?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in history.iter().enumerate() {
        csv.push_str(&format!("{i},{l}\n"));
    }
    write(out_dir, "loss.csv", csv)?;
    match (history.first(), history.last()) {
        (Some(a), Some(b)) => println!("{} epochs, loss {a:.4} -> {b:.4}", history.len()),
        _ => println!("no training epochs"),
    }
    eprintln!("train time {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}

pub fn train(common: &Common, data: Option<PathBuf>, model: &ModelFlags, flags: &TrainFlags) -> Result<()> {
    let mut cfg = setup(common, "train")?;
    apply_model(&mut cfg, model);
    apply_train(&mut cfg, flags);
    let ds = dataset(&mut cfg, data)?;
    match cfg.train.precision {
        Precision::F32 => train_typed::<f32>(&cfg, &ds, &common.out_dir),
        Precision::F64 => train_typed::<f64>(&cfg, &ds, &common.out_dir),
    }
}

/// What an `eval` or `sweep` run scores, resolved to a concrete type.
enum Loaded<T> {
    Model(DeltaEncoderModel<T>),
    Nn,
}

impl<T: Scalar> Loaded<T> {
    fn method(&self) -> Method<'_, T> {
        match self {
            Loaded::Model(m) => Method::Synthesis(m),
            Loaded::Nn => Method::NearestNeighbor,
        }
    }

    fn describe(&self) -> serde_json::Value {
        match self {
            Loaded::Model(m) => json!({
                "arch": m.arch,
                "dtype": T::DTYPE,
                "fingerprint": m.fingerprint,
            }),
            Loaded::Nn => json!("nearest_neighbor"),
        }
    }
}

fn resolve_scorer(cfg: &mut RunConfig, scorer: &Scorer) -> Result<Precision> {
    if let Some(path) = &scorer.model {
        cfg.model = Some(path.clone());
        cfg.baseline = None;
    }
    if let Some(b) = scorer.baseline {
        cfg.baseline = Some(
            match b {
                Baseline::Nn => "nn",
                Baseline::LinearOffset => "linear-offset",
            }
            .to_owned(),
        );
        cfg.model = None;
    }
    set(&mut cfg.train.precision, scorer.precision);
    match &cfg.model {
        Some(path) => {
            let dtype = read_checkpoint_dtype(path)?;
            Ok(dtype.parse()?)
        }
        None => Ok(cfg.train.precision),
    }
}

fn load_scorer<T: Scalar>(cfg: &RunConfig, ds: &FeatureDataset) -> Result<Loaded<T>> {
    if let Some(path) = &cfg.model {
        let model = load_model::<T>(path)?;
        if !model.is_trained() {
            return Err(denc::Error::State(format!("checkpoint {} holds an untrained model", path.display())).into());
        }
        return Ok(Loaded::Model(model));
    }
    match cfg.baseline.as_deref() {
        Some("nn") => Ok(Loaded::Nn),
        Some("linear-offset") => {
            let mut arch = cfg.arch(ds.dim(), 0);
            arch.variant = Variant::LinearOffset;
            Ok(Loaded::Model(DeltaEncoderModel::build(arch, cfg.seed)?))
        }
        Some(other) => bail!(denc::Error::Config(format!("unknown baseline {other:?}"))),
        None => bail!(denc::Error::Config("give --model or --baseline".into())),
    }
}

fn eval_typed<T: Scalar>(cfg: &RunConfig, ds: &FeatureDataset, common: &Common) -> Result<()> {
    let scorer = load_scorer::<T>(cfg, ds)?;
    let started = Instant::now();
    let mut report = evaluate(scorer.method(), ds, &cfg.eval_config(common.jobs))?;
    report.run = Some(json!({
        "config": cfg.fingerprint(),
        "scorer": scorer.describe(),
        "dataset": dataset_summary(ds),
    }));
    write(&common.out_dir, "report.json", report.to_json() + "\n")?;
    write(&common.out_dir, "report.csv", report.to_csv()?)?;
    println!(
        "{} {}-way {}-shot over {} episodes: mean {:.4} std {:.4}",
        report.method, report.way, report.shot, report.episodes, report.mean, report.std
    );
    eprintln!("eval time {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}

pub fn eval(common: &Common, data: Option<PathBuf>, scorer: &Scorer, flags: &EvalFlags) -> Result<()> {
    let mut cfg = setup(common, "eval")?;
    apply_eval(&mut cfg, flags);
    let ds = dataset(&mut cfg, data)?;
    match resolve_scorer(&mut cfg, scorer)? {
        Precision::F32 => eval_typed::<f32>(&cfg, &ds, common),
        Precision::F64 => eval_typed::<f64>(&cfg, &ds, common),
    }
}

fn sweep_typed<T: Scalar>(cfg: &RunConfig, ds: &FeatureDataset, common: &Common) -> Result<()> {
    let scorer = load_scorer::<T>(cfg, ds)?;
    let reports = sweep_samples(scorer.method(), ds, &cfg.eval_config(common.jobs), &cfg.eval.counts)?;
    write(&common.out_dir, "sweep.csv", sweep_csv(&reports)?)?;
    for r in &reports {
        println!("{:>6} samples: mean {:.4} std {:.4}", r.samples_per_class, r.mean, r.std);
    }
    Ok(())
}

pub fn sweep(
    common: &Common,
    data: Option<PathBuf>,
    scorer: &Scorer,
    flags: &EvalFlags,
    counts: Option<Vec<usize>>,
) -> Result<()> {
    let mut cfg = setup(common, "sweep")?;
    apply_eval(&mut cfg, flags);
    set(&mut cfg.eval.counts, counts);
    if cfg.eval.counts.is_empty() {
        bail!(denc::Error::Argument("sweep needs at least one sample count".into()));
    }
    if cfg.eval.counts.contains(&0) {
        bail!(denc::Error::Argument("sample counts must be positive".into()));
    }
    let ds = dataset(&mut cfg, data)?;
    match resolve_scorer(&mut cfg, scorer)? {
        Precision::F32 => sweep_typed::<f32>(&cfg, &ds, common),
        Precision::F64 => sweep_typed::<f64>(&cfg, &ds, common),
    }
}

fn ablate_typed<T: Scalar>(cfg: &RunConfig, ds: &FeatureDataset, variants: &[Variant], common: &Common) -> Result<()> {
    let mut csv = String::from("variant,mean,std\n");
    let mut reports = Vec::new();
    for &variant in variants {
        if variant.uses_attributes() && ds.attributes().is_none() {
            csv.push_str(&format!("{variant},skipped,skipped\n"));
            println!("{variant:>18}: skipped (dataset has no class attributes)");
            continue;
        }
        let mut arch = cfg.arch(ds.dim(), ds.attribute_dim());
        arch.variant = variant;
        let mut model = DeltaEncoderModel::<T>::build(arch, cfg.seed)?;
        if !variant.is_closed_form() {
            fit(&mut model, ds, &cfg.train_config(variant))?;
        }
        let report = evaluate(Method::Synthesis(&model), ds, &cfg.eval_config(common.jobs))?;
        csv.push_str(&format!("{variant},{},{}\n", report.mean, report.std));
        println!("{variant:>18}: mean {:.4} std {:.4}", report.mean, report.std);
        reports.push(report);
    }
    write(&common.out_dir, "ablation.csv", csv)?;
    let doc = json!({ "config": cfg.fingerprint(), "dataset": dataset_summary(ds), "reports": reports });
    write(
        &common.out_dir,
        "ablation.json",
        serde_json::to_string_pretty(&doc).expect("json") + "\n",
    )?;
    Ok(())
}

pub fn ablate(
    common: &Common,
    data: Option<PathBuf>,
    variants: &[Variant],
    model: &ModelFlags,
    train: &TrainFlags,
    eval: &EvalFlags,
) -> Result<()> {
    let mut cfg = setup(common, "ablate")?;
    apply_model(&mut cfg, model);
    apply_train(&mut cfg, train);
    apply_eval(&mut cfg, eval);
    let ds = dataset(&mut cfg, data)?;
    let variants = if variants.is_empty() { Variant::ALL.to_vec() } else { variants.to_vec() };
    match cfg.train.precision {
        Precision::F32 => ablate_typed::<f32>(&cfg, &ds, &variants, common),
        Precision::F64 => ablate_typed::<f64>(&cfg, &ds, &variants, common),
    }
}

fn export_typed<T: Scalar>(cfg: &RunConfig, ds: &FeatureDataset, common: &Common, include_real: bool) -> Result<()> {
    let path = cfg.model.as_ref().expect("model path set");
    let model = load_model::<T>(path)?;
    let eval = cfg.eval_config(common.jobs);
    let episode = draw_episodes(ds, &EvalConfig { episodes: 1, ..eval })?.remove(0);
    let (synthetic, synth_labels) = synthesize_episode(&model, ds, &episode, eval.samples_per_class, episode.seed)?;

    let mut rows = Matrix::<T>::zeros(0, ds.dim());
    let mut labels = Vec::new();
    let mut kinds = Vec::new();
    let name = |label: usize| ds.class_name(episode.classes[label]).to_owned();
    for (label, anchors) in episode.support.iter().enumerate() {
        let m = Matrix::from_rows(ds.dim(), episode.support_features::<T>(ds, label))?;
        rows.vstack(&m)?;
        labels.extend(std::iter::repeat_n(name(label), anchors.len()));
        kinds.extend(std::iter::repeat_n("anchor".to_owned(), anchors.len()));
    }
    rows.vstack(&synthetic)?;
    labels.extend(synth_labels.iter().map(|&l| name(l)));
    kinds.extend(std::iter::repeat_n("synthetic".to_owned(), synth_labels.len()));
    if include_real {
        rows.vstack(&episode.query_features::<T>(ds))?;
        labels.extend(episode.query_labels.iter().map(|&l| name(l)));
        kinds.extend(std::iter::repeat_n("real".to_owned(), episode.query.len()));
    }
    let mut buf = Vec::new();
    write_embeddings(&mut buf, &rows, &labels, &kinds)?;
    write(&common.out_dir, "embeddings.csv", buf)?;
    println!("wrote {} rows for {} classes", rows.rows(), episode.way);
    Ok(())
}

pub fn export_embeddings(
    common: &Common,
    data: Option<PathBuf>,
    model: PathBuf,
    flags: &EvalFlags,
    include_real: bool,
) -> Result<()> {
    let mut cfg = setup(common, "export-embeddings")?;
    apply_eval(&mut cfg, flags);
    let ds = dataset(&mut cfg, data)?;
    let dtype: Precision = read_checkpoint_dtype(&model)?.parse()?;
    cfg.model = Some(model);
    match dtype {
        Precision::F32 => export_typed::<f32>(&cfg, &ds, common, include_real),
        Precision::F64 => export_typed::<f64>(&cfg, &ds, common, include_real),
    }
}
