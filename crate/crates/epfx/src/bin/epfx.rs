use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epfx::config::{self, Overrides};
use epfx::error::{CliError, CliResult};
use epfx::pipeline;

/// Day-ahead electricity price forecasting with Shapley and gradient explanations.
#[derive(Parser)]
#[command(name = "epfx", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long, env = "EPFX_OUT")]
    out: Option<PathBuf>,
    /// Run seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for attribution.
    #[arg(long, env = "EPFX_THREADS")]
    threads: Option<usize>,
}

impl Common {
    fn resolve(&self) -> CliResult<config::Resolved> {
        let overrides = Overrides { out: self.out.clone(), seed: self.seed, threads: self.threads };
        config::load(&self.config, &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a config file and the dataset path.
    Validate(Common),
    /// Parse the dataset and build the feature matrix.
    Ingest(Common),
    /// Train the model and write forecast metrics.
    Train(Common),
    /// Compute attributions, heatmaps, SSHAP lines and complexity metrics.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Model file; defaults to model.json in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Write summary.md for a finished run directory.
    Report {
        /// Config whose output directory holds the run.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run directory.
        #[arg(long, env = "EPFX_OUT")]
        out: Option<PathBuf>,
    },
    /// Run the exact-Shapley and finite-difference reference batteries.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "EPFX_OUT")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serialisable"));
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Validate(c) => {
            let res = c.resolve()?;
            println!("config ok: market {}, {} features, output {}", res.raw.market, res.market_config.feature_count(), res.output_dir.display());
        }
        Command::Ingest(c) => print_json(&pipeline::cmd_ingest(&c.resolve()?)?),
        Command::Train(c) => print_json(&pipeline::cmd_train(&c.resolve()?)?),
        Command::Explain { common, model } => print_json(&pipeline::cmd_explain(&common.resolve()?, model.as_deref())?),
        Command::Report { config, out } => {
            let dir = match (out, config) {
                (Some(o), _) => o,
                (None, Some(c)) => config::load(&c, &Overrides::default())?.output_dir,
                (None, None) => return Err(CliError::config("report needs --out or --config")),
            };
            println!("{}", pipeline::cmd_report(&dir)?.display());
        }
        Command::Oracle { config, out, seed } => {
            let base_seed = match (&seed, &config) {
                (Some(s), _) => *s,
                (None, Some(c)) => config::read_config(c)?.seed,
                (None, None) => 0,
            };
            let outcome = pipeline::cmd_oracle(base_seed, out.as_deref())?;
            print_json(&outcome);
            if !(outcome.shap.passed && outcome.gradient.passed) {
                return Err(CliError::new(epfx::ErrorKind::OracleFailure, "oracle battery failed"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("epfx: {}", CliError::config(first).diagnostic());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("epfx: {}", e.diagnostic());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
