//! Exit criteria for the toolkit. Each test prints one `PASS`/`FAIL` line
//! with the measured quantity next to its threshold; run with
//! `cargo test -p memlstm --test acceptance -- --nocapture --test-threads 1`
//! to see them in order.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use memlstm::pipeline::{cmd_evaluate, cmd_plotdata, cmd_quantize, cmd_train, Experiment};
use memlstm::{program_file, weights, RunConfig};
use memlstm_core::crossbar::quantize_weight;
use memlstm_core::init::{uniform_output, uniform_params};
use memlstm_core::training::compare_with_finite_differences;
use memlstm_core::{
    bptt_gradients, build_level_set, crossbar_forward, crossbar_predict, forward_sequence, predict,
    program_crossbar, reconstruct_weights, rmse, train, CrossbarConfig, Dims, LstmState, Sample,
    Spacing, TrainConfig, WindowedSeries,
};

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!(
        "[{}] criterion {id}: {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn criterion_1_gradient_correctness() {
    const STEP: f64 = 1e-5;
    const TOL: f64 = 1e-5;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut all_pass = true;
    for _ in 0..20 {
        let dims = Dims::new(1, 4).unwrap();
        let params = uniform_params(&mut rng, dims, 1.0);
        let out = uniform_output(&mut rng, 4, 1.0);
        let len = rng.random_range(1..=3);
        let samples: Vec<Sample> = (0..3)
            .map(|_| Sample {
                window: (0..len).map(|_| rng.random_range(0.0..1.0)).collect(),
                target: rng.random_range(0.0..1.0),
            })
            .collect();
        let batch = WindowedSeries::from_samples(samples, len).unwrap();
        let (analytic, _) = bptt_gradients(&params, &out, &batch).unwrap();
        let report = compare_with_finite_differences(&analytic, &params, &out, &batch, STEP, TOL).unwrap();
        worst = worst.max(report.max_rel_error());
        all_pass &= report.passed;
    }
    let elapsed = start.elapsed();
    let pass = all_pass && worst < TOL && elapsed < Duration::from_secs(10);
    verdict(
        1,
        "BPTT vs central differences",
        pass,
        format!("max rel err {worst:.3e} (< {TOL:e}), {:.2?} (< 10 s)", elapsed),
    );
    assert!(pass);
}

#[test]
fn criterion_2_crossbar_oracle_equivalence() {
    const TOL: f64 = 1e-9;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let spacing = if case % 2 == 0 {
            Spacing::UniformConductance
        } else {
            Spacing::UniformResistance
        };
        let n_hidden = rng.random_range(1..=8);
        let dims = Dims::new(1, n_hidden).unwrap();
        let params = uniform_params(&mut rng, dims, 1.0);
        let out = uniform_output(&mut rng, n_hidden, 1.0);
        let len = rng.random_range(1..=20);
        let xs: Vec<[f64; 1]> = (0..len).map(|_| [rng.random_range(0.0..1.0)]).collect();

        let cfg = CrossbarConfig::ideal(spacing);
        let program = program_crossbar(&params, &cfg).unwrap();
        let hw = crossbar_forward(&program, &out, &xs, &cfg).unwrap();
        let (sw, _) = forward_sequence(
            &reconstruct_weights(&program),
            &out,
            &xs,
            &LstmState::zeros(n_hidden),
        )
        .unwrap();
        assert_eq!(hw.len(), sw.len());
        for (a, b) in hw.iter().zip(&sw) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= TOL && elapsed < Duration::from_secs(5);
    verdict(
        2,
        "crossbar_forward == forward_sequence(reconstructed)",
        pass,
        format!("max |diff| {worst:.3e} (<= {TOL:e}) over 100 cases, {elapsed:.2?} (< 5 s)"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_quantizer_bound() {
    let start = Instant::now();
    let levels = build_level_set(Spacing::UniformConductance);
    let bound = 1.0 / 30.0 + 1e-12;
    let mut max_err = 0.0f64;
    let mut monotone = true;
    let mut idempotent = true;
    let mut prev = f64::NEG_INFINITY;
    for k in -1000..=1000 {
        let w = k as f64 * 1e-3;
        let q = quantize_weight(w, &levels);
        max_err = max_err.max((q - w).abs());
        monotone &= q >= prev;
        idempotent &= quantize_weight(q, &levels) == q;
        prev = q;
    }
    let elapsed = start.elapsed();
    let pass = max_err <= bound && monotone && idempotent && elapsed < Duration::from_secs(1);
    verdict(
        3,
        "quantizer bound",
        pass,
        format!(
            "max |q(w) - w| {max_err:.6} (<= 1/30 + 1e-12), monotone {monotone}, idempotent {idempotent}, {elapsed:.2?}"
        ),
    );
    assert!(pass);
}

struct SeedRun {
    float_train: f64,
    float_test: f64,
    quant_train: f64,
    quant_test: f64,
}

fn airline_runs() -> (Vec<SeedRun>, Duration) {
    let start = Instant::now();
    let cfg = RunConfig::default();
    let exp = Experiment::prepare(&cfg).unwrap();
    assert_eq!(exp.series.len(), 144);
    assert_eq!((exp.train.len(), exp.test.len()), (95, 48));
    let xb = CrossbarConfig::ideal(Spacing::UniformConductance);
    let runs = (0..5u64)
        .map(|seed| {
            let tc = TrainConfig {
                seed,
                ..TrainConfig::default()
            };
            let o = train(Dims::new(1, 4).unwrap(), &exp.train, &tc).unwrap();
            let program = program_crossbar(&o.params, &xb).unwrap();
            let score = |p: &[f64], w: &WindowedSeries| rmse(p, &w.targets(), Some(&exp.normalizer)).unwrap();
            SeedRun {
                float_train: score(&predict(&o.params, &o.out, &exp.train).unwrap(), &exp.train),
                float_test: score(&predict(&o.params, &o.out, &exp.test).unwrap(), &exp.test),
                quant_train: score(&crossbar_predict(&program, &o.out, &exp.train, &xb).unwrap(), &exp.train),
                quant_test: score(&crossbar_predict(&program, &o.out, &exp.test, &xb).unwrap(), &exp.test),
            }
        })
        .collect();
    (runs, start.elapsed())
}

#[test]
fn criterion_4_experiment_reproduction() {
    let (runs, elapsed) = airline_runs();
    let train_med = median(runs.iter().map(|r| r.float_train).collect());
    let test_med = median(runs.iter().map(|r| r.float_test).collect());
    let pass = (15.0..=40.0).contains(&train_med)
        && (35.0..=70.0).contains(&test_med)
        && elapsed < Duration::from_secs(120);
    verdict(
        4,
        "airline experiment, median of 5 seeds",
        pass,
        format!(
            "train RMSE {train_med:.2} in [15, 40], test RMSE {test_med:.2} in [35, 70] passengers, {elapsed:.2?} (< 2 min)"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_quantization_impact() {
    let (runs, _) = airline_runs();
    let mut pass = true;
    for (seed, r) in runs.iter().enumerate() {
        let d_train = r.quant_train - r.float_train;
        let d_test = r.quant_test - r.float_test;
        let ok = d_train.abs() <= 15.0 && d_test.abs() <= 15.0;
        pass &= ok;
        let dir = |d: f64| if d > 0.0 { "degraded" } else if d < 0.0 { "improved" } else { "unchanged" };
        println!(
            "    seed {seed}: float {:.2}/{:.2}, quantized {:.2}/{:.2}, delta {d_train:+.3} ({}) / {d_test:+.3} ({})",
            r.float_train,
            r.float_test,
            r.quant_train,
            r.quant_test,
            dir(d_train),
            dir(d_test)
        );
    }
    verdict(
        5,
        "16-level quantization impact",
        pass,
        "|quantized - float| <= 15 passengers on both splits for all 5 seeds".into(),
    );
    assert!(pass);
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn run_all_commands(dir: &Path) {
    let mut cfg = RunConfig {
        out_dir: dir.to_path_buf(),
        ..RunConfig::default()
    };
    cfg.train.epochs = 40;
    cfg.train.shuffle = true;
    cmd_train(&cfg).unwrap();
    cmd_quantize(&cfg).unwrap();
    cfg.crossbar.read_noise_sigma = 0.02;
    cfg.crossbar.level_variation_sigma = 0.01;
    cfg.noise_seeds = 4;
    cmd_evaluate(&cfg).unwrap();
    cmd_plotdata(&cfg).unwrap();
}

#[test]
fn criterion_6_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_all_commands(a.path());
    run_all_commands(b.path());
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let names: Vec<&str> = sa.iter().map(|(n, _)| n.as_str()).collect();
    let pass = sa == sb && sa.len() == 9;
    verdict(
        6,
        "byte-identical outputs for identical config and seed",
        pass,
        format!("{} files compared: {}", sa.len(), names.join(", ")),
    );
    assert!(pass);
}

#[test]
fn criterion_7_format_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut failures = 0;
    for case in 0..50 {
        let n_hidden = rng.random_range(1..=6);
        let n_inputs = rng.random_range(1..=2);
        let dims = Dims::new(n_inputs, n_hidden).unwrap();
        let params = uniform_params(&mut rng, dims, 1.0);
        let out = uniform_output(&mut rng, n_hidden, 1.0);

        let w1 = weights::to_string(&params, &out);
        let (p2, o2) = weights::parse(&w1, "case").unwrap();
        let w2 = weights::to_string(&p2, &o2);

        let mut cfg = CrossbarConfig::ideal(if case % 2 == 0 {
            Spacing::UniformConductance
        } else {
            Spacing::UniformResistance
        });
        if case % 3 == 0 {
            cfg.level_variation_sigma = 0.05;
            cfg.seed = case;
        }
        let program = program_crossbar(&params, &cfg).unwrap();
        let g1 = program_file::to_string(&program);
        let g2 = program_file::to_string(&program_file::parse(&g1, "case").unwrap());

        if w1 != w2 || p2 != params || o2 != out || g1 != g2 {
            failures += 1;
        }
    }
    let pass = failures == 0;
    verdict(
        7,
        "weight and program files export -> import -> export",
        pass,
        format!("{failures} of 50 random models differ"),
    );
    assert!(pass);
}
