//! Run configuration.
//!
//! Config files are flat `key = value` lines; `#` starts a comment. Every key
//! is also a command-line flag of the same name (`--read-noise 0.02`), and
//! flags win over the file. Keys:
//!
//! | key               | default               | meaning                                    |
//! |-------------------|-----------------------|--------------------------------------------|
//! | `dataset`         | bundled airline CSV   | series CSV path                            |
//! | `hidden`          | 4                     | LSTM units                                 |
//! | `look-back`       | 1                     | window length                              |
//! | `split`           | 0.67                  | chronological train fraction               |
//! | `epochs`          | 100                   |                                            |
//! | `learning-rate`   | 0.01                  |                                            |
//! | `optimizer`       | adam                  | `adam` or `sgd`                            |
//! | `beta1`, `beta2`, `epsilon` | 0.9, 0.999, 1e-8 | Adam moments                          |
//! | `clamp-low`, `clamp-high` | -1, 1           | weight constraint after every update       |
//! | `seed`            | 7                     | training seed                              |
//! | `shuffle`         | false                 | shuffle sample order each epoch            |
//! | `spacing`         | uniform_conductance   | or `uniform_resistance`                    |
//! | `read-noise`      | 0                     | relative column-read noise sigma           |
//! | `level-variation` | 0                     | relative programming variation sigma       |
//! | `crossbar-seed`   | 0                     | first seed for crossbar randomness         |
//! | `noise-seeds`     | 10                    | seeds averaged when noise is enabled       |
//! | `quantize-output` | false                 | also map the readout layer onto levels     |
//! | `out-dir`         | out                   | where commands write their files           |
//! | `weights`         | `<out-dir>/weights.txt` | weight file read by quantize/evaluate    |
//! | `program`         | none                  | program file used by evaluate              |
//! | `format`          | table                 | report style: `table` or `delimited`       |

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use memlstm_core::{build_level_set, CrossbarConfig, Optimizer, Spacing, TrainConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Delimited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub hidden: usize,
    pub look_back: usize,
    pub split: f64,
    pub train: TrainConfig,
    pub crossbar: CrossbarConfig,
    pub noise_seeds: usize,
    pub out_dir: PathBuf,
    pub weights: Option<PathBuf>,
    pub program: Option<PathBuf>,
    pub format: ReportFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            hidden: 4,
            look_back: 1,
            split: 0.67,
            train: TrainConfig::default(),
            crossbar: CrossbarConfig::ideal(Spacing::UniformConductance),
            noise_seeds: 10,
            out_dir: PathBuf::from("out"),
            weights: None,
            program: None,
            format: ReportFormat::Table,
        }
    }
}

fn parse_val<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for `{key}`"))),
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.merge_file(path)?;
        Ok(cfg)
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&name, k + 1, format!("expected `key = value`, found {raw:?}")))?;
            self.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::parse(&name, k + 1, msg),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Sets one key. Underscores and dashes are interchangeable in keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('_', "-");
        match key.as_str() {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "hidden" => self.hidden = parse_val(&key, value)?,
            "look-back" => self.look_back = parse_val(&key, value)?,
            "split" => self.split = parse_val(&key, value)?,
            "epochs" => self.train.epochs = parse_val(&key, value)?,
            "learning-rate" => self.train.learning_rate = parse_val(&key, value)?,
            "optimizer" => {
                self.train.optimizer = match value {
                    "sgd" => Optimizer::Sgd,
                    "adam" => match self.train.optimizer {
                        a @ Optimizer::Adam { .. } => a,
                        Optimizer::Sgd => Optimizer::default(),
                    },
                    _ => return Err(Error::Config(format!("unknown optimizer {value:?}"))),
                }
            }
            "beta1" | "beta2" | "epsilon" => {
                let v: f64 = parse_val(&key, value)?;
                let (mut b1, mut b2, mut eps) = match self.train.optimizer {
                    Optimizer::Adam {
                        beta1,
                        beta2,
                        epsilon,
                    } => (beta1, beta2, epsilon),
                    Optimizer::Sgd => {
                        return Err(Error::Config(format!("`{key}` only applies to adam")))
                    }
                };
                match key.as_str() {
                    "beta1" => b1 = v,
                    "beta2" => b2 = v,
                    _ => eps = v,
                }
                self.train.optimizer = Optimizer::Adam {
                    beta1: b1,
                    beta2: b2,
                    epsilon: eps,
                };
            }
            "clamp-low" => self.train.clamp_low = parse_val(&key, value)?,
            "clamp-high" => self.train.clamp_high = parse_val(&key, value)?,
            "seed" => self.train.seed = parse_val(&key, value)?,
            "shuffle" => self.train.shuffle = parse_bool(&key, value)?,
            "spacing" => {
                let s = Spacing::from_name(value)
                    .ok_or_else(|| Error::Config(format!("unknown spacing {value:?}")))?;
                self.crossbar.levels = build_level_set(s);
            }
            "read-noise" => self.crossbar.read_noise_sigma = parse_val(&key, value)?,
            "level-variation" => self.crossbar.level_variation_sigma = parse_val(&key, value)?,
            "crossbar-seed" => self.crossbar.seed = parse_val(&key, value)?,
            "noise-seeds" => self.noise_seeds = parse_val(&key, value)?,
            "quantize-output" => self.crossbar.quantize_output_layer = parse_bool(&key, value)?,
            "out-dir" => self.out_dir = PathBuf::from(value),
            "weights" => self.weights = Some(PathBuf::from(value)),
            "program" => self.program = Some(PathBuf::from(value)),
            "format" => {
                self.format = match value {
                    "table" => ReportFormat::Table,
                    "delimited" => ReportFormat::Delimited,
                    _ => return Err(Error::Config(format!("unknown format {value:?}"))),
                }
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.crossbar.validate()?;
        if self.hidden == 0 {
            return Err(Error::Config("`hidden` must be at least 1".into()));
        }
        if self.look_back == 0 {
            return Err(Error::Config("`look-back` must be at least 1".into()));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config("`split` must lie strictly between 0 and 1".into()));
        }
        if self.noise_seeds == 0 {
            return Err(Error::Config("`noise-seeds` must be at least 1".into()));
        }
        Ok(())
    }

    pub fn weights_path(&self) -> PathBuf {
        self.weights
            .clone()
            .unwrap_or_else(|| self.out_dir.join("weights.txt"))
    }

    pub fn noisy(&self) -> bool {
        self.crossbar.read_noise_sigma > 0.0 || self.crossbar.level_variation_sigma > 0.0
    }
}
