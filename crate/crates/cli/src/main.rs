use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fbd::Variant;
use fbd_cli::{cmd_ablate, cmd_gradcheck, cmd_report, cmd_synth, cmd_train, CliError, ExperimentConfig};

/// Forecast, blur, denoise: train and compare blur/denoise variants.
///
/// Exit codes: 0 success, 1 internal or training failure, 2 usage or
/// config error.
#[derive(Parser)]
#[command(name = "fbd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic series as CSV.
    Synth(#[command(flatten)] Common),
    /// Train one variant for one horizon and seed.
    Train {
        #[command(flatten)]
        common: Common,
        /// backbone, dg, di, dwb, rb or dt.
        #[arg(long, default_value = "dg")]
        variant: Variant,
        /// Forecast horizon; defaults to the config's first horizon.
        #[arg(long)]
        horizon: Option<usize>,
        /// Defaults to the config's first seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train and evaluate every variant x horizon x seed cell.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Check every analytic gradient against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Aggregate the metric records under a results directory.
    Report {
        /// Defaults to --out, then the config's out_dir.
        results_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), CliError> {
        let cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let cfg = ExperimentConfig::default();
                cfg.validate()?;
                cfg
            }
        };
        let out = self.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
        Ok((cfg, out))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(common) => {
            let (cfg, out) = common.load()?;
            println!("{}", cmd_synth(&cfg, &out)?.display());
        }
        Command::Train {
            common,
            variant,
            horizon,
            seed,
        } => {
            let (cfg, out) = common.load()?;
            let tau = horizon.unwrap_or(cfg.window.horizons[0]);
            let seed = seed.unwrap_or(cfg.seeds[0]);
            let a = cmd_train(&cfg, variant, tau, seed, &out)?;
            println!("checkpoint {} (best epoch {})", a.checkpoint.display(), a.best_epoch);
            println!("metrics    {}", a.metrics.display());
        }
        Command::Ablate { common, workers } => {
            let (cfg, out) = common.load()?;
            let summary = cmd_ablate(&cfg, &out, workers)?;
            println!(
                "{} runs, {} aggregate rows, results in {}",
                summary.runs,
                summary.rows.len(),
                out.display()
            );
            if !summary.failed.is_empty() {
                return Err(CliError::PartialFailure {
                    failed: summary.failed_runs,
                    total: summary.runs,
                });
            }
        }
        Command::Gradcheck { seed } => {
            let report = cmd_gradcheck(seed);
            print!("{}", report.render());
            if !report.passed() {
                let names: Vec<_> = report.failures().map(|r| r.component.as_str()).collect();
                return Err(CliError::GradcheckFailed(names.join(", ")));
            }
        }
        Command::Report { results_dir, common } => {
            let dir = match results_dir {
                Some(d) => d,
                None => common.load()?.1,
            };
            let summary = cmd_report(&dir)?;
            println!("{} ({} aggregate rows)", summary.markdown.display(), summary.rows.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
