//! The four commands. Each one reads its inputs, writes its files under the
//! configured output directory and returns a printable report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use memlstm_core::crossbar::{quantize_output, ClampedEntry};
use memlstm_core::training::ParamGroup;
use memlstm_core::{
    crossbar_predict, make_windows, predict, program_crossbar, reconstruct_weights, rmse, split,
    CrossbarConfig, CrossbarProgram, Dims, LstmParams, Normalizer, OutputLayer, TimeSeries,
    WindowedSeries,
};

use crate::config::{ReportFormat, RunConfig};
use crate::error::{Error, Result};
use crate::{dataset, program_file, weights};

pub const WEIGHTS_FILE: &str = "weights.txt";
pub const LOSS_FILE: &str = "loss.csv";
pub const PROGRAM_FILE: &str = "program.txt";
pub const QUANTIZED_WEIGHTS_FILE: &str = "weights_quantized.txt";
pub const QUANTIZATION_REPORT_FILE: &str = "quantization_errors.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const EVALUATION_FILE: &str = "evaluation.txt";
pub const PLOT_PREDICTIONS_FILE: &str = "plot_predictions.csv";
pub const PLOT_LOSS_FILE: &str = "plot_loss.csv";

/// Normalized series and its chronological train/test windows.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub series: TimeSeries,
    pub normalizer: Normalizer,
    pub windows: WindowedSeries,
    pub train: WindowedSeries,
    pub test: WindowedSeries,
}

impl Experiment {
    pub fn prepare(cfg: &RunConfig) -> Result<Self> {
        let series = match &cfg.dataset {
            Some(path) => dataset::load_series(path)?,
            None => dataset::airline(),
        };
        Self::from_series(series, cfg.look_back, cfg.split)
    }

    pub fn from_series(series: TimeSeries, look_back: usize, fraction: f64) -> Result<Self> {
        let normalizer = Normalizer::fit(&series)?;
        let windows = make_windows(&normalizer.normalize(&series), look_back)?;
        let (train, test) = split(fraction, &windows)?;
        Ok(Experiment {
            series,
            normalizer,
            windows,
            train,
            test,
        })
    }

    pub fn dims(&self, hidden: usize) -> Result<Dims> {
        Ok(Dims::new(1, hidden)?)
    }
}

/// RMSE on both splits in normalized and passenger units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub train_norm: f64,
    pub test_norm: f64,
    pub train: f64,
    pub test: f64,
}

impl Scores {
    fn compute(exp: &Experiment, train_pred: &[f64], test_pred: &[f64]) -> Result<Self> {
        let (tt, te) = (exp.train.targets(), exp.test.targets());
        Ok(Scores {
            train_norm: rmse(train_pred, &tt, None)?,
            test_norm: rmse(test_pred, &te, None)?,
            train: rmse(train_pred, &tt, Some(&exp.normalizer))?,
            test: rmse(test_pred, &te, Some(&exp.normalizer))?,
        })
    }
}

/// Rows of `(metric, split, units, value)` rendered as an aligned table or CSV.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Report {
    pub notes: Vec<String>,
    pub rows: Vec<(String, String, String, String)>,
}

impl Report {
    fn metric(&mut self, metric: &str, split: &str, units: &str, value: impl Into<String>) {
        self.rows
            .push((metric.into(), split.into(), units.into(), value.into()));
    }

    fn scores(&mut self, metric: &str, s: &Scores) {
        self.metric(metric, "train", "normalized", format!("{:.6}", s.train_norm));
        self.metric(metric, "test", "normalized", format!("{:.6}", s.test_norm));
        self.metric(metric, "train", "passengers", format!("{:.4}", s.train));
        self.metric(metric, "test", "passengers", format!("{:.4}", s.test));
    }

    pub fn value(&self, metric: &str, split: &str, units: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.0 == metric && r.1 == split && r.2 == units)
            .and_then(|r| r.3.split_whitespace().next()?.parse().ok())
    }

    pub fn render(&self, format: ReportFormat) -> String {
        let mut s = String::new();
        match format {
            ReportFormat::Delimited => {
                for n in &self.notes {
                    writeln!(s, "# {n}").unwrap();
                }
                s.push_str("metric,split,units,value\n");
                for (m, sp, u, v) in &self.rows {
                    writeln!(s, "{m},{sp},{u},{v}").unwrap();
                }
            }
            ReportFormat::Table => {
                for n in &self.notes {
                    writeln!(s, "{n}").unwrap();
                }
                if self.rows.is_empty() {
                    return s;
                }
                let w0 = self.rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(6);
                writeln!(s, "{:<w0$}  {:<5}  {:<10}  value", "metric", "split", "units").unwrap();
                for (m, sp, u, v) in &self.rows {
                    writeln!(s, "{m:<w0$}  {sp:<5}  {u:<10}  {v}").unwrap();
                }
            }
        }
        s
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn check_dims(params: &LstmParams, cfg: &RunConfig) -> Result<()> {
    let d = params.dims();
    if d.n_inputs != 1 || d.n_hidden != cfg.hidden {
        return Err(Error::Config(format!(
            "weights are {}×{} but the run expects 1 input and {} hidden units",
            d.n_inputs, d.n_hidden, cfg.hidden
        )));
    }
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let exp = Experiment::prepare(cfg)?;
    let outcome = memlstm_core::train(exp.dims(cfg.hidden)?, &exp.train, &cfg.train)?;

    ensure_dir(&cfg.out_dir)?;
    weights::save(&cfg.out_dir.join(WEIGHTS_FILE), &outcome.params, &outcome.out)?;
    let mut loss = String::from("epoch,loss\n");
    for (k, l) in outcome.loss_history.iter().enumerate() {
        writeln!(loss, "{},{l}", k + 1).unwrap();
    }
    write(cfg.out_dir.join(LOSS_FILE), &loss)?;

    let scores = Scores::compute(
        &exp,
        &predict(&outcome.params, &outcome.out, &exp.train)?,
        &predict(&outcome.params, &outcome.out, &exp.test)?,
    )?;
    let mut report = Report::default();
    report.notes.push(format!(
        "trained {} epochs on {} windows (test {}), seed {}",
        cfg.train.epochs,
        exp.train.len(),
        exp.test.len(),
        cfg.train.seed
    ));
    let first = outcome.loss_history.first().copied().unwrap_or(f64::NAN);
    let last = outcome.loss_history.last().copied().unwrap_or(f64::NAN);
    report.metric("loss_first_epoch", "train", "mse", format!("{first:.8}"));
    report.metric("loss_last_epoch", "train", "mse", format!("{last:.8}"));
    report.scores("rmse_float", &scores);
    Ok(report)
}

/// Quantization error of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryError {
    pub name: &'static str,
    pub index: usize,
    pub original: f64,
    pub quantized: f64,
}

impl EntryError {
    pub fn abs_error(&self) -> f64 {
        (self.quantized - self.original).abs()
    }
}

fn entry_errors(
    params: &LstmParams,
    out: &OutputLayer,
    q_params: &LstmParams,
    q_out: &OutputLayer,
) -> Vec<EntryError> {
    let a = memlstm_core::GradientSet {
        lstm: params.clone(),
        out: out.clone(),
    };
    let b = memlstm_core::GradientSet {
        lstm: q_params.clone(),
        out: q_out.clone(),
    };
    let mut v = Vec::new();
    for group in ParamGroup::all() {
        for (k, (&o, &q)) in a.group(group).iter().zip(b.group(group)).enumerate() {
            v.push(EntryError {
                name: group.name(),
                index: k,
                original: o,
                quantized: q,
            });
        }
    }
    v
}

fn clamp_warnings(clamped: &[ClampedEntry], report: &mut Report) {
    for c in clamped {
        let msg = format!(
            "warning: weight {} at row {} column {} outside [-1, 1], clamped",
            c.value, c.row, c.column
        );
        eprintln!("{msg}");
        report.notes.push(msg);
    }
}

pub fn cmd_quantize(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let (params, out) = weights::load(&cfg.weights_path())?;
    let program = program_crossbar(&params, &cfg.crossbar)?;
    let q_params = reconstruct_weights(&program);
    let q_out = if cfg.crossbar.quantize_output_layer {
        quantize_output(&out, &cfg.crossbar.levels)
    } else {
        out.clone()
    };

    ensure_dir(&cfg.out_dir)?;
    program_file::save(&cfg.out_dir.join(PROGRAM_FILE), &program)?;
    weights::save(&cfg.out_dir.join(QUANTIZED_WEIGHTS_FILE), &q_params, &q_out)?;

    let errors = entry_errors(&params, &out, &q_params, &q_out);
    let mut csv = String::from("name,index,original,quantized,abs_error\n");
    for e in &errors {
        writeln!(
            csv,
            "{},{},{},{},{}",
            e.name,
            e.index,
            e.original,
            e.quantized,
            e.abs_error()
        )
        .unwrap();
    }
    write(cfg.out_dir.join(QUANTIZATION_REPORT_FILE), &csv)?;

    let mut report = Report::default();
    clamp_warnings(program.clamped(), &mut report);
    report.notes.push(format!(
        "programmed {} rows × {} physical columns on {} levels",
        program.rows(),
        program.physical_columns(),
        cfg.crossbar.levels.spacing().name()
    ));
    let lstm_errors: Vec<f64> = errors
        .iter()
        .filter(|e| !matches!(e.name, "w_out" | "b_out"))
        .map(EntryError::abs_error)
        .collect();
    let max = lstm_errors.iter().copied().fold(0.0, f64::max);
    let mean = lstm_errors.iter().sum::<f64>() / lstm_errors.len() as f64;
    report.metric("quant_error_max", "all", "weight", format!("{max:.6}"));
    report.metric("quant_error_mean", "all", "weight", format!("{mean:.6}"));
    report.metric(
        "quant_error_bound",
        "all",
        "weight",
        format!("{:.6}", cfg.crossbar.levels.half_step()),
    );
    Ok(report)
}

/// Float and crossbar predictions for every window, in window order.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub float: Vec<f64>,
    pub quantized: Vec<f64>,
}

fn load_program(cfg: &RunConfig, params: &LstmParams) -> Result<Option<CrossbarProgram>> {
    let Some(path) = &cfg.program else {
        return Ok(None);
    };
    let program = program_file::load(path)?;
    if program.dims() != params.dims() {
        return Err(Error::Config(format!(
            "program {} is for {:?} but weights are {:?}",
            path.display(),
            program.dims(),
            params.dims()
        )));
    }
    Ok(Some(program))
}

fn ideal_crossbar(cfg: &RunConfig) -> CrossbarConfig {
    CrossbarConfig {
        read_noise_sigma: 0.0,
        level_variation_sigma: 0.0,
        ..cfg.crossbar.clone()
    }
}

fn compute_predictions(
    cfg: &RunConfig,
    exp: &Experiment,
    params: &LstmParams,
    out: &OutputLayer,
    program: &CrossbarProgram,
) -> Result<Predictions> {
    Ok(Predictions {
        float: predict(params, out, &exp.windows)?,
        quantized: crossbar_predict(program, out, &exp.windows, &ideal_crossbar(cfg))?,
    })
}

struct Loaded {
    exp: Experiment,
    params: LstmParams,
    out: OutputLayer,
    program: CrossbarProgram,
    file_program: bool,
}

fn load_run(cfg: &RunConfig) -> Result<Loaded> {
    cfg.validate()?;
    let exp = Experiment::prepare(cfg)?;
    let (params, out) = weights::load(&cfg.weights_path())?;
    check_dims(&params, cfg)?;
    let (program, file_program) = match load_program(cfg, &params)? {
        Some(p) => (p, true),
        None => (program_crossbar(&params, &ideal_crossbar(cfg))?, false),
    };
    Ok(Loaded {
        exp,
        params,
        out,
        program,
        file_program,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn predictions_csv(exp: &Experiment, preds: &Predictions) -> String {
    let n_train = exp.train.len();
    let labels = exp.series.labels();
    let lb = exp.windows.look_back();
    let mut s = String::from("index,label,split,actual,float,quantized\n");
    for k in 0..exp.windows.len() {
        let t = k + lb;
        let label = labels.map(|l| l[t].as_str()).unwrap_or("");
        let split = if k < n_train { "train" } else { "test" };
        writeln!(
            s,
            "{t},{label},{split},{},{},{}",
            exp.series.values()[t],
            exp.normalizer.invert(preds.float[k]),
            exp.normalizer.invert(preds.quantized[k]),
        )
        .unwrap();
    }
    s
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Report> {
    let run = load_run(cfg)?;
    let exp = &run.exp;
    let preds = compute_predictions(cfg, exp, &run.params, &run.out, &run.program)?;
    let n_train = exp.train.len();
    let float = Scores::compute(exp, &preds.float[..n_train], &preds.float[n_train..])?;
    let quant = Scores::compute(exp, &preds.quantized[..n_train], &preds.quantized[n_train..])?;

    let mut report = Report::default();
    clamp_warnings(run.program.clamped(), &mut report);
    report.notes.push(format!(
        "crossbar: {} levels, output layer {}",
        cfg.crossbar.levels.spacing().name(),
        if cfg.crossbar.quantize_output_layer {
            "quantized"
        } else {
            "full precision"
        }
    ));
    report.scores("rmse_float", &float);
    report.scores("rmse_quantized", &quant);
    let delta = Scores {
        train_norm: quant.train_norm - float.train_norm,
        test_norm: quant.test_norm - float.test_norm,
        train: quant.train - float.train,
        test: quant.test - float.test,
    };
    report.scores("rmse_delta", &delta);

    if cfg.noisy() {
        let seeds: Vec<u64> = (0..cfg.noise_seeds as u64)
            .map(|k| cfg.crossbar.seed.wrapping_add(k))
            .collect();
        let runs: Vec<Scores> = seeds
            .par_iter()
            .map(|&seed| {
                let xb = CrossbarConfig {
                    seed,
                    ..cfg.crossbar.clone()
                };
                let program = if run.file_program {
                    run.program.clone()
                } else {
                    program_crossbar(&run.params, &xb)?
                };
                let tr = crossbar_predict(&program, &run.out, &exp.train, &xb)?;
                let te = crossbar_predict(&program, &run.out, &exp.test, &xb)?;
                Scores::compute(exp, &tr, &te)
            })
            .collect::<Result<_>>()?;
        report.notes.push(format!(
            "noise: read sigma {}, level variation sigma {}, {} seeds from {}",
            cfg.crossbar.read_noise_sigma,
            cfg.crossbar.level_variation_sigma,
            seeds.len(),
            cfg.crossbar.seed
        ));
        let pick: [(&str, &str, fn(&Scores) -> f64); 4] = [
            ("train", "normalized", |s| s.train_norm),
            ("test", "normalized", |s| s.test_norm),
            ("train", "passengers", |s| s.train),
            ("test", "passengers", |s| s.test),
        ];
        for (split, units, f) in pick {
            let v: Vec<f64> = runs.iter().map(f).collect();
            let (m, sd) = mean_std(&v);
            report.metric("rmse_noisy_mean", split, units, format!("{m:.6}"));
            report.metric("rmse_noisy_std", split, units, format!("{sd:.6}"));
        }
    }

    ensure_dir(&cfg.out_dir)?;
    write(cfg.out_dir.join(PREDICTIONS_FILE), &predictions_csv(exp, &preds))?;
    write(cfg.out_dir.join(EVALUATION_FILE), &report.render(cfg.format))?;
    Ok(report)
}

pub fn cmd_plotdata(cfg: &RunConfig) -> Result<Report> {
    let loss_path = cfg.out_dir.join(LOSS_FILE);
    let loss_text = fs::read_to_string(&loss_path).map_err(|e| Error::io(&loss_path, e))?;
    let run = load_run(cfg)?;
    let exp = &run.exp;
    let preds = compute_predictions(cfg, exp, &run.params, &run.out, &run.program)?;

    let lb = exp.windows.look_back();
    let labels = exp.series.labels();
    let mut s = String::from("t,label,actual,float,quantized\n");
    for (t, &actual) in exp.series.values().iter().enumerate() {
        let label = labels.map(|l| l[t].as_str()).unwrap_or("");
        if t < lb {
            writeln!(s, "{t},{label},{actual},,").unwrap();
        } else {
            let k = t - lb;
            writeln!(
                s,
                "{t},{label},{actual},{},{}",
                exp.normalizer.invert(preds.float[k]),
                exp.normalizer.invert(preds.quantized[k])
            )
            .unwrap();
        }
    }

    let mut loss = String::from("epoch,loss\n");
    for (k, line) in loss_text.lines().enumerate().skip(1) {
        let parsed = line
            .split_once(',')
            .and_then(|(e, l)| Some((e.parse::<usize>().ok()?, l.parse::<f64>().ok()?)));
        let (epoch, value) =
            parsed.ok_or_else(|| Error::parse(loss_path.display().to_string(), k + 1, "expected `epoch,loss`"))?;
        writeln!(loss, "{epoch},{value}").unwrap();
    }

    ensure_dir(&cfg.out_dir)?;
    write(cfg.out_dir.join(PLOT_PREDICTIONS_FILE), &s)?;
    write(cfg.out_dir.join(PLOT_LOSS_FILE), &loss)?;
    let mut report = Report::default();
    report.notes.push(format!(
        "wrote {} and {}",
        cfg.out_dir.join(PLOT_PREDICTIONS_FILE).display(),
        cfg.out_dir.join(PLOT_LOSS_FILE).display()
    ));
    Ok(report)
}
