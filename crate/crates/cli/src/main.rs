use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use swd_cli::config::RawConfig;
use swd_cli::run::SEED_ENV;
use swd_cli::{execute, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "swd",
    version,
    about = "Allocation analysis for stepped wedge designs with unequal cluster sizes"
)]
struct Cli {
    /// analyze, optimal, enumerate, sample, recommend or moments
    command: Option<String>,
    /// `key = value` configuration file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    periods: Option<String>,
    /// Residual to between-cluster variance ratio
    #[arg(long, conflicts_with = "icc", allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Intra-class correlation
    #[arg(long)]
    icc: Option<String>,
    /// Within-individual to between-cluster variance ratio (closed cohorts)
    #[arg(long)]
    mu: Option<String>,
    /// Cluster sizes, comma separated
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    mean: Option<String>,
    #[arg(long)]
    cv: Option<String>,
    /// Cluster count when only mean and cv are known
    #[arg(long)]
    clusters: Option<String>,
    /// Sequence for each cluster, comma separated, in `sizes` order
    #[arg(long)]
    alloc: Option<String>,
    /// random-cluster-balanced or random-unrestricted
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    /// outer, inner or free
    #[arg(long)]
    extra_rule: Option<String>,
    #[arg(long)]
    mirror_dedup: bool,
    #[arg(long)]
    top_k: Option<String>,
    /// table or csv
    #[arg(long)]
    output: Option<String>,
    /// distance or imbalance: write plot data instead of the report
    #[arg(long)]
    scatter: Option<String>,
}

impl Cli {
    fn raw(&self) -> Result<RawConfig, CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::parse(&std::fs::read_to_string(path)?)?,
            None => RawConfig::default(),
        };
        let flags = [
            ("command", &self.command),
            ("periods", &self.periods),
            ("lambda", &self.lambda),
            ("icc", &self.icc),
            ("mu", &self.mu),
            ("sizes", &self.sizes),
            ("mean", &self.mean),
            ("cv", &self.cv),
            ("clusters", &self.clusters),
            ("alloc", &self.alloc),
            ("mode", &self.mode),
            ("reps", &self.reps),
            ("seed", &self.seed),
            ("threshold", &self.threshold),
            ("extra_rule", &self.extra_rule),
            ("top_k", &self.top_k),
            ("output", &self.output),
            ("scatter", &self.scatter),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                raw.set_flag(key, v.as_str());
            }
        }
        if self.mirror_dedup {
            raw.set_flag("mirror_dedup", "true");
        }
        Ok(raw)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = cli
        .raw()
        .and_then(|raw| raw.validate())
        .and_then(|cfg| execute(&cfg, env_seed.as_deref()));
    match result {
        Ok(out) => {
            for note in &out.notes {
                eprintln!("{note}");
            }
            print!("{}", out.stdout);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
