use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdra_core::experiment::{self, ExperimentConfig};
use sdra_core::Result;

#[derive(Parser)]
#[command(name = "sdra", version, about = "SIS epidemic control under restricted, sequential node access")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for replica randomness.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(r) = self.replicas {
            cfg.replicas = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Infected-fraction curves for every configured strategy and ratio.
    Campaign(Common),
    /// Score histograms at the given round indices.
    Scores {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 100, 500])]
        rounds: Vec<usize>,
    },
    /// Curves of the first SDRA strategy across sample ratios.
    SweepAlpha {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.5, 0.8, 1.0])]
        alphas: Vec<f64>,
    },
    /// Precompute optimal cutoffs and write them as CSV.
    CutoffTable {
        #[arg(long, default_value_t = 5)]
        b: usize,
        #[arg(long, default_value_t = 50)]
        n_max: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.001, 0.1, 0.2, 0.4, 0.6, 0.8, 0.999])]
        q: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "cutoff_table.csv")]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Campaign(common) => {
            let cfg = common.resolve()?;
            let results = experiment::run_campaign(&cfg, common.jobs)?;
            for r in &results {
                println!(
                    "{:<12} alpha={:.2} time-avg eta={:.4} (censored {})",
                    r.label(),
                    r.alpha,
                    sdra_core::stats::mean(&r.time_avg_eta),
                    r.n_censored
                );
            }
        }
        Command::Scores { common, rounds } => {
            let cfg = common.resolve()?;
            for s in experiment::snapshot_score_distribution(&cfg, &rounds, common.jobs)? {
                if s.warning {
                    eprintln!("warning: {} never reached round {}", s.label, s.round);
                }
            }
        }
        Command::SweepAlpha { common, alphas } => {
            let cfg = common.resolve()?;
            for r in experiment::sweep_sample_size(&cfg, &alphas, common.jobs)? {
                println!(
                    "{:<12} alpha={:.2} time-avg eta={:.4}",
                    r.label(),
                    r.alpha,
                    sdra_core::stats::mean(&r.time_avg_eta)
                );
            }
        }
        Command::CutoffTable { b, n_max, q, mc, seed, out, jobs } => {
            let table = experiment::write_cutoff_table(b, n_max, &q, mc, seed, &out, jobs)?;
            println!("wrote {} entries to {}", table.len(), out.display());
        }
    }
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
