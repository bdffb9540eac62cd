use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use memlstm::pipeline::{cmd_evaluate, cmd_plotdata, cmd_quantize, cmd_train, Report};
use memlstm::{Result, RunConfig};

#[derive(Parser)]
#[command(name = "memlstm", version, about = "LSTM forecasting on a 16-level memristive crossbar model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the float model and write weights.txt and loss.csv
    Train(Common),
    /// Map weights onto crossbar levels and write the program and quantized weights
    Quantize(Common),
    /// Compare float and crossbar RMSE on both splits
    Evaluate(Common),
    /// Write delimited prediction and loss curves for plotting
    PlotData(Common),
}

/// Every config key is accepted as a flag; flags override the config file.
#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Series CSV; the bundled airline data when absent
    #[arg(long)]
    dataset: Option<String>,
    /// Hidden units (4)
    #[arg(long)]
    hidden: Option<String>,
    /// Window length (1)
    #[arg(long)]
    look_back: Option<String>,
    /// Training fraction (0.67)
    #[arg(long)]
    split: Option<String>,
    /// Training epochs (100)
    #[arg(long)]
    epochs: Option<String>,
    /// Step size (0.01)
    #[arg(long)]
    learning_rate: Option<String>,
    /// adam or sgd
    #[arg(long)]
    optimizer: Option<String>,
    /// Adam first-moment decay
    #[arg(long)]
    beta1: Option<String>,
    /// Adam second-moment decay
    #[arg(long)]
    beta2: Option<String>,
    /// Adam epsilon
    #[arg(long)]
    epsilon: Option<String>,
    /// Lower weight clamp (-1)
    #[arg(long)]
    clamp_low: Option<String>,
    /// Upper weight clamp (1)
    #[arg(long)]
    clamp_high: Option<String>,
    /// Training seed (7)
    #[arg(long)]
    seed: Option<String>,
    /// Shuffle windows each epoch (false)
    #[arg(long)]
    shuffle: Option<String>,
    /// Level spacing: uniform_conductance or uniform_resistance
    #[arg(long)]
    spacing: Option<String>,
    /// Relative Gaussian read-noise sigma (0)
    #[arg(long)]
    read_noise: Option<String>,
    /// Relative programming-variation sigma (0)
    #[arg(long)]
    level_variation: Option<String>,
    /// Base seed for crossbar noise (0)
    #[arg(long)]
    crossbar_seed: Option<String>,
    /// Seeds averaged when noise is on (10)
    #[arg(long)]
    noise_seeds: Option<String>,
    /// Also map the dense output layer (false)
    #[arg(long)]
    quantize_output: Option<String>,
    /// Output directory (out)
    #[arg(long)]
    out_dir: Option<String>,
    /// Weight file; defaults to <out-dir>/weights.txt
    #[arg(long)]
    weights: Option<String>,
    /// Crossbar program file to evaluate instead of re-quantizing
    #[arg(long)]
    program: Option<String>,
    /// Report format: table or delimited
    #[arg(long)]
    format: Option<String>,
}

impl Common {
    fn overrides(&self) -> [(&'static str, &Option<String>); 24] {
        [
            ("dataset", &self.dataset),
            ("hidden", &self.hidden),
            ("look-back", &self.look_back),
            ("split", &self.split),
            ("epochs", &self.epochs),
            ("learning-rate", &self.learning_rate),
            ("optimizer", &self.optimizer),
            ("beta1", &self.beta1),
            ("beta2", &self.beta2),
            ("epsilon", &self.epsilon),
            ("clamp-low", &self.clamp_low),
            ("clamp-high", &self.clamp_high),
            ("seed", &self.seed),
            ("shuffle", &self.shuffle),
            ("spacing", &self.spacing),
            ("read-noise", &self.read_noise),
            ("level-variation", &self.level_variation),
            ("crossbar-seed", &self.crossbar_seed),
            ("noise-seeds", &self.noise_seeds),
            ("quantize-output", &self.quantize_output),
            ("out-dir", &self.out_dir),
            ("weights", &self.weights),
            ("program", &self.program),
            ("format", &self.format),
        ]
    }

    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        // Optimizer first so that beta/epsilon flags apply to the chosen one.
        let mut ov = self.overrides().to_vec();
        ov.sort_by_key(|(k, _)| *k != "optimizer");
        for (key, value) in ov {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    let (common, cmd): (&Common, fn(&RunConfig) -> Result<Report>) = match &cli.command {
        Command::Train(c) => (c, cmd_train),
        Command::Quantize(c) => (c, cmd_quantize),
        Command::Evaluate(c) => (c, cmd_evaluate),
        Command::PlotData(c) => (c, cmd_plotdata),
    };
    let cfg = common.resolve()?;
    let report = cmd(&cfg)?;
    print!("{}", report.render(cfg.format));
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
