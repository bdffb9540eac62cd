use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use memlstm::pipeline::{
    LOSS_FILE, PLOT_LOSS_FILE, PLOT_PREDICTIONS_FILE, PREDICTIONS_FILE, PROGRAM_FILE,
    QUANTIZATION_REPORT_FILE, QUANTIZED_WEIGHTS_FILE, WEIGHTS_FILE,
};
use memlstm::{program_file, weights};
use memlstm_core::{Dims, LstmParams, OutputLayer};

fn memlstm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memlstm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = memlstm(args);
    assert!(
        out.status.success(),
        "memlstm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn dir_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_writes_packed_gate_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_str(tmp.path());
    ok(&["train", "--out-dir", d, "--epochs", "5"]);
    let text = fs::read_to_string(tmp.path().join(WEIGHTS_FILE)).unwrap();
    let headers: Vec<&str> = text
        .lines()
        .filter(|l| l.split_whitespace().count() == 3 && !l.starts_with('#') && !l.starts_with('-'))
        .filter(|l| l.split_whitespace().nth(1).unwrap().parse::<usize>().is_ok())
        .collect();
    assert_eq!(headers, ["W 1 16", "U 4 16", "b 1 16", "w_out 4 1", "b_out 1 1"]);
    let loss = fs::read_to_string(tmp.path().join(LOSS_FILE)).unwrap();
    assert_eq!(loss.lines().count(), 6);
}

#[test]
fn same_seed_same_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["train", "--out-dir", dir_str(d.path()), "--epochs", "10", "--seed", "3"]);
    }
    for f in [WEIGHTS_FILE, LOSS_FILE] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn failures_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_str(tmp.path());
    let out = memlstm(&["train", "--out-dir", d, "--dataset", "/definitely/not/here.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("here.csv"));

    assert!(!memlstm(&["train", "--out-dir", d, "--split", "1.5"]).status.success());
    assert!(!memlstm(&["quantize", "--out-dir", d]).status.success());
    assert!(!memlstm(&["plot-data", "--out-dir", d]).status.success());

    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "epochs = many\n").unwrap();
    assert!(!memlstm(&["train", "--config", conf.to_str().unwrap()]).status.success());

    fs::write(tmp.path().join(WEIGHTS_FILE), "W 1 16\n1 2 3\n").unwrap();
    assert!(!memlstm(&["quantize", "--out-dir", d]).status.success());
}

#[test]
fn config_file_and_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("run.conf");
    let out_dir = tmp.path().join("run");
    fs::write(
        &conf,
        format!("epochs = 50\nseed = 11\nout-dir = {}\n", out_dir.display()),
    )
    .unwrap();
    ok(&["train", "--config", conf.to_str().unwrap(), "--epochs", "4"]);
    let loss = fs::read_to_string(out_dir.join(LOSS_FILE)).unwrap();
    assert_eq!(loss.lines().count(), 5);
}

#[test]
fn quantize_zero_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_str(tmp.path());
    let dims = Dims::new(1, 4).unwrap();
    weights::save(
        &tmp.path().join(WEIGHTS_FILE),
        &LstmParams::zeros(dims),
        &OutputLayer::zeros(4),
    )
    .unwrap();
    ok(&["quantize", "--out-dir", d]);
    let prog = program_file::load(&tmp.path().join(PROGRAM_FILE)).unwrap();
    assert!(prog.cells().iter().all(|p| p.plus == 0 && p.minus == 0));
    let report = fs::read_to_string(tmp.path().join(QUANTIZATION_REPORT_FILE)).unwrap();
    assert!(report.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn quantize_bound_and_idempotence() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_str(tmp.path());
    ok(&["train", "--out-dir", d, "--epochs", "20"]);
    let report = ok(&["quantize", "--out-dir", d, "--format", "delimited"]);
    let max: f64 = report
        .lines()
        .find(|l| l.starts_with("quant_error_max,"))
        .and_then(|l| l.rsplit(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(max <= 0.0334, "max quantization error {max}");

    let q1 = fs::read(tmp.path().join(QUANTIZED_WEIGHTS_FILE)).unwrap();
    let p1 = fs::read(tmp.path().join(PROGRAM_FILE)).unwrap();
    let again = tmp.path().join("again");
    ok(&[
        "quantize",
        "--weights",
        tmp.path().join(QUANTIZED_WEIGHTS_FILE).to_str().unwrap(),
        "--out-dir",
        dir_str(&again),
    ]);
    assert_eq!(fs::read(again.join(QUANTIZED_WEIGHTS_FILE)).unwrap(), q1);
    assert_eq!(fs::read(again.join(PROGRAM_FILE)).unwrap(), p1);
}

#[test]
fn out_of_range_weights_are_clamped_with_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let dims = Dims::new(1, 4).unwrap();
    let mut p = LstmParams::zeros(dims);
    p.gate_mut(memlstm_core::Gate::Cell).w.set(0, 2, 1.8);
    weights::save(&tmp.path().join(WEIGHTS_FILE), &p, &OutputLayer::zeros(4)).unwrap();
    let out = memlstm(&["quantize", "--out-dir", dir_str(tmp.path())]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("clamped"));
}

#[test]
fn evaluate_with_program_and_plot_data() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_str(tmp.path());
    ok(&["train", "--out-dir", d, "--epochs", "30"]);
    ok(&["quantize", "--out-dir", d]);
    let program = tmp.path().join(PROGRAM_FILE);
    let with_file = ok(&["evaluate", "--out-dir", d, "--program", program.to_str().unwrap()]);
    let preds_file = fs::read_to_string(tmp.path().join(PREDICTIONS_FILE)).unwrap();
    let without_file = ok(&["evaluate", "--out-dir", d]);
    assert_eq!(with_file, without_file);
    assert_eq!(fs::read_to_string(tmp.path().join(PREDICTIONS_FILE)).unwrap(), preds_file);

    ok(&["plot-data", "--out-dir", d]);
    let plot = fs::read_to_string(tmp.path().join(PLOT_PREDICTIONS_FILE)).unwrap();
    let mut lines = plot.lines();
    assert_eq!(lines.next().unwrap(), "t,label,actual,float,quantized");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 144);

    // Every predicted row must match evaluate's predictions bit-for-bit.
    for line in preds_file.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let t: usize = f[0].parse().unwrap();
        let row = &rows[t];
        assert_eq!(row[0], f[0]);
        assert_eq!(row[2], f[3]);
        assert_eq!(row[3], f[4]);
        assert_eq!(row[4], f[5]);
        let a: f64 = row[3].parse().unwrap();
        let b: f64 = f[4].parse().unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(rows[0][3], "");

    let loss = fs::read_to_string(tmp.path().join(PLOT_LOSS_FILE)).unwrap();
    assert_eq!(loss.lines().next().unwrap(), "epoch,loss");
    assert_eq!(loss.lines().count(), 31);
}

#[test]
fn evaluate_rejects_mismatched_dims() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_str(tmp.path());
    ok(&["train", "--out-dir", d, "--epochs", "2", "--hidden", "3"]);
    let out = memlstm(&["evaluate", "--out-dir", d]);
    assert!(!out.status.success());
}

#[test]
fn zero_noise_over_seeds_has_zero_spread() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_str(tmp.path());
    ok(&["train", "--out-dir", d, "--epochs", "10"]);
    // A vanishing sigma still enables the multi-seed path.
    let report = ok(&[
        "evaluate", "--out-dir", d, "--read-noise", "0", "--level-variation", "1e-300",
        "--noise-seeds", "5", "--format", "delimited",
    ]);
    let stds: Vec<f64> = report
        .lines()
        .filter(|l| l.starts_with("rmse_noisy_std,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(stds.len(), 4);
    assert!(stds.iter().all(|&s| s == 0.0), "{report}");
}
