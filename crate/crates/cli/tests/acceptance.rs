//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Benchmark criteria share one run per seed: the default synthetic dataset
//! (15 seen, 5 unseen classes, d=64), models with h=256 and z=8 trained for
//! 300 epochs at lr 1e-3, and ten 5-way episodes per seed.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use denc::data::synthetic::{gen_synthetic, SyntheticSpec};
use denc::data::format::{decode_dataset, encode_dataset};
use denc::data::{encode_model, load_dataset, load_model, save_dataset, save_model, FeatureDataset};
use denc::delta::{sample_z, synthesize, train, ArchConfig, DeltaEncoderModel, TrainConfig, Variant};
use denc::eval::{
    draw_episodes, evaluate, sweep_samples, synthesize_episode, EvalConfig, LinearClassifier, Method,
};
use denc::nn::loss::{batch_weights, weighted_l1_with_weights};
use denc::nn::{finite_difference_check, weighted_l1_loss, Matrix, Parameterized};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(30);
const SEED_BUDGET: Duration = Duration::from_secs(300);

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail }
}

/// Deterministic inputs in [-1.5, 1.5] without an RNG dependency.
fn wave(rows: usize, cols: usize, phase: f64) -> Matrix<f64> {
    let data = (0..rows * cols)
        .map(|i| 1.5 * ((i as f64 + 1.0) * 1.618 + phase).sin())
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn gradient_correctness() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (variant, attribute_dim) in [
        (Variant::Full, 0),
        (Variant::AeNonparam, 0),
        (Variant::DaeNonparam, 0),
        (Variant::DaeRandZ, 0),
        (Variant::DaeAttrZeroshot, 5),
    ] {
        let arch = ArchConfig {
            feature_dim: 8,
            hidden_dim: 12,
            z_dim: 4,
            attribute_dim,
            variant,
        };
        let model = DeltaEncoderModel::<f64>::build(arch, 3).unwrap();
        let x = wave(5, 8, 0.0);
        let y = wave(5, 8, 2.0);
        let condition = if attribute_dim > 0 { wave(5, attribute_dim, 4.0) } else { y.clone() };
        let (_, analytic) = model.reconstruction_gradient(&x, &y, &condition).unwrap();
        // adaptive weights are constants under backpropagation
        let weights = batch_weights(&x, &model.reconstruct(&x, &y, &condition).unwrap());
        let report = finite_difference_check(
            &model,
            &analytic,
            |m| weighted_l1_with_weights(&x, &m.reconstruct(&x, &y, &condition).unwrap(), &weights).unwrap(),
            GRAD_TOLERANCE,
        );
        worst = worst.max(report.max_rel_error);
        if !report.passed {
            failures.push(variant.to_string());
        }
    }

    let x = wave(16, 6, 1.0);
    let labels: Vec<usize> = (0..16).map(|i| i % 4).collect();
    let mut clf = LinearClassifier::<f64>::zeros(6, 4);
    let init = wave(1, clf.param_count(), 3.0).into_vec();
    clf.set_flat_params(&init.iter().map(|v| v / 3.0).collect::<Vec<_>>());
    let (_, grads) = clf.loss_and_gradient(&x, &labels).unwrap();
    let report = finite_difference_check(
        &clf,
        &grads.concat(),
        |c| c.loss_and_gradient(&x, &labels).unwrap().0,
        GRAD_TOLERANCE,
    );
    worst = worst.max(report.max_rel_error);
    if !report.passed {
        failures.push("linear classifier".into());
    }

    let elapsed = started.elapsed();
    outcome(
        "gradient correctness",
        failures.is_empty() && elapsed < GRAD_BUDGET,
        format!(
            "max rel error {worst:.2e} (< {GRAD_TOLERANCE:.0e}), {:.2}s (< 30s){}",
            elapsed.as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!(", failed: {}", failures.join(", ")) }
        ),
    )
}

fn loss_oracle() -> Outcome {
    let x = Matrix::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
    let zero = Matrix::<f64>::zeros(1, 2);
    let (loss, _) = weighted_l1_loss(&x, &zero).unwrap();
    // w = r^2 / ||r||_2: 3 * 9/5 + 4 * 16/5
    let oracle = 91.0 / 5.0;
    let (same, grad) = weighted_l1_loss(&x, &x).unwrap();
    let pass = loss == oracle && loss == 18.2 && same == 0.0 && grad.as_slice().iter().all(|&g| g == 0.0);
    outcome(
        "loss oracle",
        pass,
        format!(
            "[3,4] vs [0,0] = {loss} (want 18.2); zero residual = {same}, gradient {:?}",
            grad.as_slice()
        ),
    )
}

/// Everything measured on one benchmark seed.
struct SeedRun {
    seed: u64,
    full: f64,
    full_16: f64,
    ae: f64,
    linear_offset: f64,
    nn: f64,
    nn_5shot: f64,
    displaced: usize,
    anchors: usize,
    elapsed: Duration,
}

fn benchmark_arch(variant: Variant) -> ArchConfig {
    ArchConfig {
        feature_dim: 64,
        hidden_dim: 256,
        z_dim: 8,
        attribute_dim: 0,
        variant,
    }
}

fn trained(variant: Variant, ds: &FeatureDataset, seed: u64) -> DeltaEncoderModel<f32> {
    let mut model = DeltaEncoderModel::<f32>::build(benchmark_arch(variant), seed).unwrap();
    if !variant.is_closed_form() {
        let config = TrainConfig {
            learning_rate: 1e-3,
            epochs: 300,
            seed,
            ..TrainConfig::for_variant(variant)
        };
        train(&mut model, ds, &config).unwrap();
    }
    model
}

/// RMS distance of a class's real samples to their mean.
fn intra_class_std(ds: &FeatureDataset, class: usize) -> f64 {
    let rows = ds.class_rows(class);
    let mean = column_mean(rows.iter().map(|&r| ds.feature(r)), ds.dim());
    let ss: f64 = rows
        .iter()
        .map(|&r| ds.feature(r).iter().zip(&mean).map(|(&v, m)| (v as f64 - m).powi(2)).sum::<f64>())
        .sum();
    (ss / rows.len() as f64).sqrt()
}

fn column_mean<'a>(rows: impl Iterator<Item = &'a [f32]>, dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for row in rows {
        sum.iter_mut().zip(row).for_each(|(s, &v)| *s += v as f64);
        n += 1;
    }
    sum.into_iter().map(|s| s / n as f64).collect()
}

fn run_seed(seed: u64) -> SeedRun {
    let started = Instant::now();
    let ds = gen_synthetic(&SyntheticSpec { seed, ..SyntheticSpec::default() }).unwrap();
    let cfg = EvalConfig { seed, ..EvalConfig::default() };

    let full = trained(Variant::Full, &ds, seed);
    let sweep = sweep_samples(Method::Synthesis(&full), &ds, &cfg, &[16, 1024]).unwrap();
    let ae = trained(Variant::AeNonparam, &ds, seed);
    let ae = evaluate(Method::Synthesis(&ae), &ds, &cfg).unwrap();
    let lo = trained(Variant::LinearOffset, &ds, seed);
    let lo = evaluate(Method::Synthesis(&lo), &ds, &cfg).unwrap();
    let nn = evaluate::<f32>(Method::NearestNeighbor, &ds, &cfg).unwrap();
    let nn5 = evaluate::<f32>(Method::NearestNeighbor, &ds, &EvalConfig { shot: 5, ..cfg }).unwrap();

    // synthesized-sample means of the evaluated episodes against their anchors
    let (mut displaced, mut anchors) = (0, 0);
    for ep in draw_episodes(&ds, &cfg).unwrap() {
        let (samples, labels) = synthesize_episode(&full, &ds, &ep, cfg.samples_per_class, ep.seed).unwrap();
        for (label, support) in ep.support.iter().enumerate() {
            let anchor = ds.feature(support[0]);
            let rows = labels.iter().enumerate().filter(|(_, &l)| l == label).map(|(i, _)| samples.row(i));
            let mean = column_mean(rows, ds.dim());
            let shift = mean.iter().zip(anchor).map(|(m, &a)| (m - a as f64).powi(2)).sum::<f64>().sqrt();
            anchors += 1;
            if shift > 0.1 * intra_class_std(&ds, ep.classes[label]) {
                displaced += 1;
            }
        }
    }

    SeedRun {
        seed,
        full: sweep[1].mean,
        full_16: sweep[0].mean,
        ae: ae.mean,
        linear_offset: lo.mean,
        nn: nn.mean,
        nn_5shot: nn5.mean,
        displaced,
        anchors,
        elapsed: started.elapsed(),
    }
}

fn mean(runs: &[SeedRun], f: impl Fn(&SeedRun) -> f64) -> f64 {
    runs.iter().map(f).sum::<f64>() / runs.len() as f64
}

fn benchmark_ordering(runs: &[SeedRun]) -> Outcome {
    let full = mean(runs, |r| r.full);
    let lo = mean(runs, |r| r.linear_offset);
    let nn = mean(runs, |r| r.nn);
    let slowest = runs.iter().map(|r| r.elapsed).max().unwrap();
    outcome(
        "benchmark ordering",
        full >= lo + 0.03 && lo + 0.03 >= nn && slowest < SEED_BUDGET,
        format!(
            "full {full:.4} >= linear_offset {lo:.4} + 0.03 >= nearest_neighbor {nn:.4}; slowest seed {:.1}s (< 300s)",
            slowest.as_secs_f64()
        ),
    )
}

fn per_seed(runs: &[SeedRun], f: impl Fn(&SeedRun) -> bool) -> (usize, String) {
    let hits: Vec<u64> = runs.iter().filter(|r| f(r)).map(|r| r.seed).collect();
    (hits.len(), format!("{hits:?}"))
}

fn sample_count_trend(runs: &[SeedRun]) -> Outcome {
    let (hits, which) = per_seed(runs, |r| r.full >= r.full_16);
    outcome(
        "sample-count trend",
        hits >= 4,
        format!(
            "1024 >= 16 samples on {hits}/5 seeds {which}; means {:.4} vs {:.4}",
            mean(runs, |r| r.full),
            mean(runs, |r| r.full_16)
        ),
    )
}

fn synthesis_vs_real(runs: &[SeedRun]) -> Outcome {
    let (hits, which) = per_seed(runs, |r| r.full >= r.nn_5shot);
    outcome(
        "1-shot synthesis vs 5-shot nearest neighbor",
        hits >= 4,
        format!(
            "full 1-shot >= nn 5-shot on {hits}/5 seeds {which}; means {:.4} vs {:.4}",
            mean(runs, |r| r.full),
            mean(runs, |r| r.nn_5shot)
        ),
    )
}

fn ablation_ladder(runs: &[SeedRun]) -> Outcome {
    let full = mean(runs, |r| r.full);
    let ae = mean(runs, |r| r.ae);
    outcome("ablation ladder", full >= ae, format!("full {full:.4} >= ae_nonparam {ae:.4}"))
}

fn non_centering(runs: &[SeedRun]) -> Outcome {
    let displaced: usize = runs.iter().map(|r| r.displaced).sum();
    let anchors: usize = runs.iter().map(|r| r.anchors).sum();
    let share = displaced as f64 / anchors as f64;
    outcome(
        "non-centering",
        share >= 0.8,
        format!("{displaced}/{anchors} anchors displaced by > 0.1 intra-class std ({:.1}%, >= 80%)", 100.0 * share),
    )
}

fn denc(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_denc"))
        .args(args)
        .env_remove("DENC_SEED")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let root = dir.path();
    let preset: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", "benchmark.toml"].iter().collect();
    let data = root.join("dataset.dencfs");
    let model = root.join("model.dencmd");
    let mut ok = denc(&["gen", "--out-dir", s(root), "--seed", "1"])
        && denc(&["train", "--config", s(&preset), "--data", s(&data), "--out-dir", s(root), "--seed", "1"]);
    let mut reports = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "4")] {
        let out = root.join(name);
        ok &= denc(&[
            "eval", "--config", s(&preset), "--data", s(&data), "--model", s(&model), "--out-dir", s(&out),
            "--seed", "1", "--jobs", jobs,
        ]);
        reports.push(std::fs::read(out.join("report.json")).unwrap_or_default());
    }
    let repeat = ok && !reports[0].is_empty() && reports[0] == reports[1];
    let parallel = ok && reports[0] == reports[2];
    outcome(
        "determinism",
        repeat && parallel,
        format!("repeated eval identical: {repeat}; --jobs 4 identical to serial: {parallel}"),
    )
}

fn format_round_trips() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let ds = gen_synthetic(&SyntheticSpec { attribute_dim: 6, seed: 2, ..SyntheticSpec::default() }).unwrap();
    let path = dir.path().join("a.dencfs");
    save_dataset(&ds, &path).unwrap();
    let loaded = load_dataset(&path).unwrap();
    let file = std::fs::read(&path).unwrap();
    let dataset_ok = loaded == ds
        && encode_dataset(&loaded) == file
        && decode_dataset(&file).unwrap() == ds
        && loaded.features().as_slice().iter().zip(ds.features().as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());

    let mut model_ok = true;
    let small = SyntheticSpec { seed: 2, ..SyntheticSpec::default() };
    let data = gen_synthetic(&small).unwrap();
    for variant in [Variant::Full, Variant::DaeRandZ, Variant::LinearOffset] {
        let arch = ArchConfig { hidden_dim: 32, z_dim: 4, ..benchmark_arch(variant) };
        let mut model = DeltaEncoderModel::<f32>::build(arch, 5).unwrap();
        if !variant.is_closed_form() {
            let config = TrainConfig { epochs: 3, learning_rate: 1e-3, ..TrainConfig::for_variant(variant) };
            train(&mut model, &data, &config).unwrap();
        }
        let path = dir.path().join(format!("{variant}.dencmd"));
        save_model(&model, &path).unwrap();
        let back = load_model::<f32>(&path).unwrap();
        let codes = sample_z(&model, &data, 64, 9).unwrap();
        let anchor = data.feature(data.class_rows(data.unseen_classes()[0])[0]);
        let probe = synthesize(&model, &codes, anchor).unwrap();
        let again = synthesize(&back, &codes, anchor).unwrap();
        model_ok &= probe == again
            && back.flat_params() == model.flat_params()
            && encode_model(&back) == std::fs::read(&path).unwrap();
    }
    outcome(
        "format round-trips",
        dataset_ok && model_ok,
        format!("dataset bit-exact: {dataset_ok}; model output-equivalent and bit-exact: {model_ok}"),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut results = vec![gradient_correctness(), loss_oracle()];

    let runs: Vec<SeedRun> = SEEDS.iter().map(|&s| run_seed(s)).collect();
    for r in &runs {
        println!(
            "  seed {}: full {:.4} (16 samples {:.4}) ae_nonparam {:.4} linear_offset {:.4} nn {:.4} nn 5-shot {:.4} [{:.1}s]",
            r.seed,
            r.full,
            r.full_16,
            r.ae,
            r.linear_offset,
            r.nn,
            r.nn_5shot,
            r.elapsed.as_secs_f64()
        );
    }
    results.push(benchmark_ordering(&runs));
    results.push(sample_count_trend(&runs));
    results.push(synthesis_vs_real(&runs));
    results.push(ablation_ladder(&runs));
    results.push(non_centering(&runs));
    results.push(determinism());
    results.push(format_round_trips());

    for r in &results {
        println!("{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
