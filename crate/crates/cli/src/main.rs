//! `hct`: train small networks under stochastic inequality constraints and
//! benchmark the optimizers against each other.
//!
//! Exit codes: 0 success, 1 configuration error (including unknown flags and
//! missing config files), 2 runtime failure.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use hct_core::data::{generate_synthetic, write_csv, SyntheticSpec};
use hct_core::error::Error;
use hct_core::harness::{run_experiment, write_experiment_outputs, Algorithm, ExperimentConfig};
use hct_core::selftest::{gradient_check_random_configs, projection_grid_check};

#[derive(Parser)]
#[command(name = "hct", version, about = "Constrained training benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a config file.
    Run(RunArgs),
    /// Run Adam, SSL-ALM, and SSw on the same data and seed set, writing
    /// side-by-side aggregates under one output directory.
    Compare(RunArgs),
    /// Write a synthetic dataset CSV.
    Synth(SynthArgs),
    /// Run the gradient and projection self-tests.
    Check(CheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file with `key = value` lines; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optimizer: adam, ssl-alm, or ssw (overrides the config).
    #[arg(long)]
    algorithm: Option<String>,
    /// Base seed; repeats use seed, seed+1, ...
    #[arg(long)]
    seed: Option<u64>,
    /// Wall-clock budget per run, in seconds.
    #[arg(long)]
    budget_secs: Option<f64>,
    /// Number of repeated runs.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    rows: usize,
    #[arg(long, default_value_t = 9)]
    features: usize,
    #[arg(long, default_value_t = 2)]
    groups: usize,
    /// Comma-separated P(label = 1) per group.
    #[arg(long, value_delimiter = ',')]
    positive_rates: Option<Vec<f64>>,
    #[arg(long, default_value_t = 2.0)]
    margin: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CheckArgs {
    /// Random (network, batch) configurations for the gradient check.
    #[arg(long, default_value_t = 20)]
    configs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(alg) = &args.algorithm {
        cfg.algorithm = alg.parse()?;
    }
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(budget) = args.budget_secs {
        cfg.budget_secs = budget;
    }
    if let Some(repeats) = args.repeats {
        cfg.repeats = repeats;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_one(cfg: &ExperimentConfig, out_dir: &PathBuf) -> Result<(), Error> {
    let output = run_experiment(cfg)?;
    write_experiment_outputs(&output, out_dir)?;
    let last = output.aggregates.last();
    let final_loss = last.map_or(f64::NAN, |row| row.stats[0].mean);
    println!(
        "{}: {} runs x {:.1}s -> {} time bins, final mean train loss {:.4} ({})",
        cfg.algorithm,
        cfg.repeats,
        cfg.budget_secs,
        output.aggregates.len(),
        final_loss,
        out_dir.display()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Error> {
    let cfg = load_config(&args)?;
    run_one(&cfg, &cfg.out_dir.clone())
}

fn cmd_compare(args: RunArgs) -> Result<(), Error> {
    let base = load_config(&args)?;
    for algorithm in Algorithm::ALL {
        let mut cfg = base.clone();
        cfg.algorithm = algorithm;
        let out_dir = base.out_dir.join(algorithm.name());
        run_one(&cfg, &out_dir)?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let spec = SyntheticSpec {
        rows: args.rows,
        feature_dim: args.features,
        group_count: args.groups,
        group_positive_rate: args.positive_rates.unwrap_or_else(|| {
            (0..args.groups)
                .map(|g| {
                    if args.groups == 1 {
                        0.5
                    } else {
                        0.8 - 0.6 * g as f64 / (args.groups - 1) as f64
                    }
                })
                .collect()
        }),
        margin: args.margin,
        noise_std: args.noise,
    };
    let ds = generate_synthetic(&spec, args.seed)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    write_csv(&ds, &args.out, "label", "group")?;
    let (overall, per_group) = ds.label_positive_rates();
    println!(
        "wrote {} rows x {} features, {} groups (label rates {:.3} overall, {:?} per group) to {}",
        ds.len(),
        ds.features.cols(),
        ds.group_count,
        overall,
        per_group.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        args.out.display()
    );
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<(), Error> {
    let summary = gradient_check_random_configs(args.configs, args.seed)?;
    let grad_ok = summary.max_error() <= 1e-5;
    println!(
        "gradient check: {} ({} configs, max relative error {:.3e})",
        if grad_ok { "PASS" } else { "FAIL" },
        summary.configs,
        summary.max_error()
    );
    let proj_ok = projection_grid_check();
    println!(
        "projection check: {}",
        if proj_ok { "PASS" } else { "FAIL" }
    );
    if grad_ok && proj_ok {
        Ok(())
    } else {
        Err(Error::NonFinite("self-test failure".into()))
    }
}

fn cli_main<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Check(args) => cmd_check(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                1
            } else {
                2
            }
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(cli_main(std::env::args_os()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_flag_exits_1() {
        assert_eq!(cli_main(["hct", "run", "--bogus"]), 1);
        assert_eq!(cli_main(["hct", "frobnicate"]), 1);
    }

    #[test]
    fn missing_config_file_exits_1() {
        assert_eq!(cli_main(["hct", "run", "--config", "/nonexistent/c.cfg"]), 1);
    }

    #[test]
    fn help_exits_0() {
        assert_eq!(cli_main(["hct", "--help"]), 0);
    }
}
