// Negated float comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lilypad_core::analysis::Variant;

use config::{Mode, RunConfig};
pub use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "lilypad", version, about = "Lilypad model experiments for branching random walks and PAM")]
struct Cli {
    /// gen-env, lilypad, pam-lilypad, simulate, pam, compare, scenario or frames.
    mode: Mode,
    /// Config file; keys it omits keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "lilypad-out")]
    out: PathBuf,
    /// Worker threads for replicate fan-out.
    #[arg(long, env = "LILYPAD_THREADS")]
    threads: Option<usize>,
    /// Comma-separated values of T, one run each.
    #[arg(long = "T-ladder", value_delimiter = ',')]
    t_ladder: Option<Vec<f64>>,
    /// Scenario variant: S1, S2 or S3.
    #[arg(long)]
    variant: Option<String>,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    cfg.mode = cli.mode;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(ladder) = &cli.t_ladder {
        cfg.t_ladder = ladder.clone();
    }
    if let Some(v) = &cli.variant {
        cfg.scenario.variant = Variant::parse(v)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|cfg| {
        cfg.validate()?;
        if let Some(n) = cli.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::InvalidConfig(format!("thread pool: {e}")))?;
        }
        run::run(&cfg, &cli.out)
    });
    match result {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: class={} detail={}", e.class(), e.detail());
            ExitCode::from(2)
        }
    }
}
