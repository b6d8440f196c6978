use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use todp_core::experiment::{self, ExperimentConfig, ExperimentSummary, Mode, RunOutcome};

/// Exit status when every file was written but some equilibrium did not settle.
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "todp", version, about = "Time-of-day road pricing experiments on a trip-based MFD network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config. Missing sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    replications: Option<usize>,
    /// Worker threads for replications (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// No-toll equilibrium.
    Nte,
    /// Equilibrium under the toll profile in `[toll]`.
    Toll,
    /// Bayesian optimisation of a `k`-component toll.
    Optimize,
}

fn load(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    let mode = match cli.command {
        Command::Nte => Mode::Nte,
        Command::Toll => Mode::Toll,
        Command::Optimize => Mode::Optimize,
    };
    cfg.resolve_for(mode)?;
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    if let Some(o) = &cli.out {
        cfg.experiment.output_dir = o.clone();
    }
    if let Some(r) = cli.replications {
        cfg.experiment.replications = r;
    }
    if let Some(j) = cli.jobs {
        cfg.experiment.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(o: &RunOutcome) {
    match &o.summary {
        ExperimentSummary::Nte(set) | ExperimentSummary::Toll(set) => {
            for s in &set.scenarios {
                let days = s.days_to_converge.map_or("not converged".to_string(), |d| format!("converged day {d}"));
                println!(
                    "rep {}: welfare {:.4} (cs {:.4}, rr {:.4}) peak {} {days}",
                    s.replication, s.welfare, s.cs, s.rr, s.peak_accumulation
                );
            }
        }
        ExperimentSummary::Optimize(set) => {
            for c in &set.campaigns {
                println!(
                    "rep {}: best {:.4} vs no toll {:.4} ({:+.1}%), peak {} -> {}",
                    c.replication,
                    c.best_objective,
                    c.nte.welfare,
                    c.welfare_gain_pct,
                    c.nte.peak_accumulation,
                    c.best.peak_accumulation
                );
            }
            println!("best objective mean {:.4} std {:.4}", set.mean, set.std);
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = load(&cli).and_then(|cfg| Ok(experiment::run(&cfg)?));
    match outcome {
        Ok(o) => {
            report(&o);
            if o.all_converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("warning: some equilibria did not converge within max_days");
                ExitCode::from(EXIT_NOT_CONVERGED)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
