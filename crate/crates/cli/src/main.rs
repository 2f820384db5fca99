use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hetero_forecast::ExecMode;
use hetero_forecast_cli::{
    cmd_cluster, cmd_evaluate, cmd_generate, cmd_train, default_out_dir, print_matrix, RunConfig, TrainOptions,
};

#[derive(Parser)]
#[command(
    name = "hetero-forecast",
    version,
    about = "Forecasting with Laplace aleatoric uncertainty and selective prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (`generate`: output file). Defaults to `$HETERO_FORECAST_OUT`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn exec(&self) -> ExecMode {
        if self.sequential {
            ExecMode::Sequential
        } else {
            ExecMode::Parallel
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(default_out_dir)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Overrides the generator seed from the config (first value is used).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Train the model grid, one checkpoint per (model, seed).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated seed list overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Use the small desk-scale architectures.
        #[arg(long)]
        desk: bool,
        /// Concurrent training jobs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Evaluate checkpoints on test data and write the comparison matrix.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Test dataset CSV.
        #[arg(long)]
        data: PathBuf,
        /// Directory holding checkpoints written by `train`.
        #[arg(long)]
        checkpoints: PathBuf,
    },
    /// k-means over normalized series.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { common, seeds } => {
            let config = RunConfig::load(common.config.as_deref())?;
            let out = common.out.clone().unwrap_or_else(|| default_out_dir().join("data.csv"));
            let seed = seeds.and_then(|s| s.first().copied());
            let n = cmd_generate(&config, seed, &out, common.exec())?;
            println!("wrote {n} series to {}", out.display());
        }
        Command::Train {
            common,
            data,
            seeds,
            desk,
            jobs,
        } => {
            let config = RunConfig::load(common.config.as_deref())?;
            let opts = TrainOptions {
                seeds,
                desk,
                jobs: jobs.max(1),
                exec: common.exec(),
            };
            let out = common.out_dir();
            let trained = cmd_train(&config, &data, &out, &opts)?;
            println!("wrote {} checkpoints to {}", trained.len(), out.display());
        }
        Command::Evaluate {
            common,
            data,
            checkpoints,
        } => {
            let config = RunConfig::load(common.config.as_deref())?;
            let out = common.out_dir();
            let matrix = cmd_evaluate(&config, &checkpoints, &data, &out, common.exec())?;
            print_matrix(std::io::stdout().lock(), &matrix)?;
            println!("wrote {}", out.join("matrix.json").display());
        }
        Command::Cluster { common, data, k, seed } => {
            let config = RunConfig::load(common.config.as_deref())?;
            let out = common.out_dir();
            let k = k.unwrap_or(config.cluster.k);
            let seed = seed.unwrap_or(config.cluster.seed);
            let s = cmd_cluster(&config, &data, k, seed, &out, common.exec())?;
            println!(
                "k={} inertia {:.6} after {} iterations; wrote {}",
                s.k,
                s.inertia,
                s.iterations,
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
