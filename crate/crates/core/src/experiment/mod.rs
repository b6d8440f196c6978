//! Experiment drivers: no-toll baseline, fixed-toll scenario and BO campaign.
//!
//! Each driver writes its files under `experiment.output_dir`. With a single
//! replication the scenario files sit directly in that directory; otherwise
//! replication `r` gets `rep_<r>/`. BO traces are always `bo_trace_<r>.csv`
//! at the top level.

pub mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, Mode, RunSettings, TollSection};

use crate::bo::{run_bo, BoTrace};
use crate::dynamics::{run_day_to_day, write_days_csv, EquilibriumResult};
use crate::mfd::write_trajectory_csv;
use crate::population::{build_population, write_population_csv, TravelerProfile};
use crate::toll::TollProfile;
use crate::welfare::welfare;
use crate::{Error, Result};

/// Equilibrium figures for one scenario. Money in DKK per traveler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub replication: usize,
    pub population_seed: u64,
    pub dynamics_seed: u64,
    pub converged: bool,
    /// Day on which the stability run completed.
    pub days_to_converge: Option<usize>,
    pub days_run: usize,
    pub final_inconsistency: Option<f64>,
    pub welfare: f64,
    pub cs: f64,
    pub rr: f64,
    pub avg_tt_cost: f64,
    pub avg_sd_cost: f64,
    pub peak_accumulation: usize,
    pub include_epsilon: bool,
    pub toll: Option<TollProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<ScenarioSummary>,
    pub welfare_mean: f64,
    pub welfare_std: f64,
    pub peak_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub replication: usize,
    pub bo_seed: u64,
    pub objective_seed: u64,
    pub dropout: String,
    pub evaluations: usize,
    pub stalled_evaluations: usize,
    /// Evaluations whose day-to-day run hit `max_days` without settling.
    pub unconverged_evaluations: usize,
    pub best_vector: Vec<f64>,
    pub best_objective: f64,
    /// The best toll re-run as a scenario.
    pub best: ScenarioSummary,
    /// No-toll baseline on the same population and seed.
    pub nte: ScenarioSummary,
    pub welfare_gain_pct: f64,
    pub peak_reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSet {
    pub k: usize,
    pub dropout: String,
    pub campaigns: Vec<CampaignSummary>,
    pub best_vector: Vec<f64>,
    pub best_objective: f64,
    /// Mean and sample standard deviation of the per-campaign best objective.
    pub mean: f64,
    pub std: f64,
    /// Mean of |best objective|, the magnitude reading where smaller is better.
    pub mean_magnitude: f64,
    pub nte_welfare_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ExperimentSummary {
    Nte(ScenarioSet),
    Toll(ScenarioSet),
    Optimize(CampaignSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: ExperimentSummary,
    /// False if any reported equilibrium hit `max_days` without settling.
    pub all_converged: bool,
}

/// One scenario evaluated in memory.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub population: Vec<TravelerProfile>,
    pub equilibrium: EquilibriumResult,
    pub summary: ScenarioSummary,
}

/// One BO campaign evaluated in memory.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub trace: BoTrace,
    pub summary: CampaignSummary,
    pub best: Scenario,
    pub nte: Scenario,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn summarise(
    replication: usize,
    cfg: &ExperimentConfig,
    population: &[TravelerProfile],
    eq: &EquilibriumResult,
) -> Result<ScenarioSummary> {
    let w = welfare(eq, population, cfg.experiment.include_epsilon)?;
    Ok(ScenarioSummary {
        replication,
        population_seed: cfg.population.seed,
        dynamics_seed: cfg.dynamics.seed,
        converged: eq.converged,
        days_to_converge: eq.converged.then_some(eq.days_run),
        days_run: eq.days_run,
        final_inconsistency: eq.inconsistency_series.last().copied(),
        welfare: w.welfare_per_capita,
        cs: w.consumer_surplus_per_capita,
        rr: w.revenue_per_capita,
        avg_tt_cost: w.avg_travel_time_cost,
        avg_sd_cost: w.avg_schedule_delay_cost,
        peak_accumulation: eq.peak_accumulation(),
        include_epsilon: w.include_epsilon,
        toll: eq.toll.clone(),
    })
}

/// Runs the day-to-day model to equilibrium under `toll` for an already
/// replicated configuration.
pub fn evaluate_scenario(
    cfg: &ExperimentConfig,
    replication: usize,
    population: Vec<TravelerProfile>,
    toll: Option<&TollProfile>,
) -> Result<Scenario> {
    let mut dyn_cfg = cfg.dynamics.clone();
    dyn_cfg.keep_trajectories |= cfg.experiment.dump_trajectories;
    let equilibrium = run_day_to_day(&population, &cfg.network, toll, &dyn_cfg)?;
    let summary = summarise(replication, cfg, &population, &equilibrium)?;
    Ok(Scenario { population, equilibrium, summary })
}

/// Runs one BO campaign for an already replicated configuration.
pub fn run_campaign(cfg: &ExperimentConfig, replication: usize) -> Result<Campaign> {
    let (k, bounds) = cfg.search_space()?;
    let bo_cfg = cfg.bo.clone().unwrap_or_default();
    let objective_seed = bo_cfg.objective_seed();
    let population = build_population(&cfg.population)?;
    let include_eps = cfg.experiment.include_epsilon;

    let mut unconverged = 0usize;
    let trace = run_bo(
        |x, seed| {
            let toll = TollProfile::from_vector(x, k, &bounds)?;
            let mut d = cfg.dynamics.clone();
            d.seed = seed;
            d.keep_trajectories = false;
            let eq = run_day_to_day(&population, &cfg.network, Some(&toll), &d)?;
            unconverged += usize::from(!eq.converged);
            Ok(welfare(&eq, &population, include_eps)?.welfare_per_capita)
        },
        &bounds.box_for(k),
        &bo_cfg,
    )?;

    // The objective is deterministic, so re-running the incumbent reproduces
    // its equilibrium exactly.
    let mut scen_cfg = cfg.clone();
    scen_cfg.dynamics.seed = objective_seed;
    let best_toll = TollProfile::from_vector(&trace.best_x, k, &bounds)?;
    let best = evaluate_scenario(&scen_cfg, replication, population.clone(), Some(&best_toll))?;
    let nte = evaluate_scenario(&scen_cfg, replication, population, None)?;

    let stalled = trace.evaluations.iter().filter(|e| e.stalled).count();
    let summary = CampaignSummary {
        replication,
        bo_seed: bo_cfg.seed,
        objective_seed,
        dropout: bo_cfg.dropout.label(),
        evaluations: trace.evaluations.len(),
        stalled_evaluations: stalled,
        unconverged_evaluations: unconverged,
        best_vector: trace.best_x.clone(),
        best_objective: trace.best_objective,
        welfare_gain_pct: 100.0 * (best.summary.welfare - nte.summary.welfare) / nte.summary.welfare.abs(),
        peak_reduction_pct: 100.0
            * (nte.summary.peak_accumulation as f64 - best.summary.peak_accumulation as f64)
            / nte.summary.peak_accumulation.max(1) as f64,
        best: best.summary.clone(),
        nte: nte.summary.clone(),
    };
    Ok(Campaign { trace, summary, best, nte })
}

fn replication_dir(cfg: &ExperimentConfig, r: usize) -> PathBuf {
    let out = &cfg.experiment.output_dir;
    if cfg.experiment.replications == 1 {
        out.clone()
    } else {
        out.join(format!("rep_{r}"))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `population.csv`, `days.csv` and the trajectory files of a scenario.
pub fn write_scenario_files(dir: &Path, scenario: &Scenario) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_population_csv(&scenario.population, create(&dir.join("population.csv"))?)?;
    let eq = &scenario.equilibrium;
    write_days_csv(&eq.day_results, create(&dir.join("days.csv"))?)?;
    if eq.trajectories.is_empty() {
        let path = dir.join(format!("trajectory_day_{}.csv", eq.days_run));
        write_trajectory_csv(&eq.final_day.trajectory, create(&path)?)?;
    } else {
        for (d, day) in eq.trajectories.iter().enumerate() {
            write_trajectory_csv(&day.trajectory, create(&dir.join(format!("trajectory_day_{d}.csv")))?)?;
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

/// Runs `work` for every replication on a pool of `experiment.jobs` threads.
/// All replications finish before the first error, if any, is returned.
fn for_each_replication<T, F>(cfg: &ExperimentConfig, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, ExperimentConfig) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.experiment.jobs)
        .build()
        .map_err(|e| Error::Config(format!("experiment: cannot start {} workers: {e}", cfg.experiment.jobs)))?;
    let results: Vec<Result<T>> = pool.install(|| {
        (0..cfg.experiment.replications)
            .into_par_iter()
            .map(|r| work(r, cfg.replication(r)))
            .collect()
    });
    results.into_iter().collect()
}

fn prepare(cfg: &ExperimentConfig, want: Mode) -> Result<()> {
    cfg.validate()?;
    let got = cfg.mode()?;
    if got != want {
        return Err(Error::Config(format!("expected a `{}` config, got `{}`", want.name(), got.name())));
    }
    fs::create_dir_all(&cfg.experiment.output_dir)?;
    fs::write(cfg.experiment.output_dir.join("config.echo"), cfg.to_toml_string()?)?;
    Ok(())
}

fn run_scenarios(cfg: &ExperimentConfig, want: Mode) -> Result<RunOutcome> {
    prepare(cfg, want)?;
    let toll = cfg.toll.as_ref().and_then(|t| t.components.clone());
    let scenarios = for_each_replication(cfg, |r, rc| {
        let population = build_population(&rc.population)?;
        let s = evaluate_scenario(&rc, r, population, toll.as_ref())?;
        write_scenario_files(&replication_dir(cfg, r), &s)?;
        Ok(s.summary)
    })?;
    let welfare: Vec<f64> = scenarios.iter().map(|s| s.welfare).collect();
    let (welfare_mean, welfare_std) = mean_std(&welfare);
    let peaks: Vec<f64> = scenarios.iter().map(|s| s.peak_accumulation as f64).collect();
    let all_converged = scenarios.iter().all(|s| s.converged);
    let set = ScenarioSet { scenarios, welfare_mean, welfare_std, peak_mean: mean_std(&peaks).0 };
    let summary = if want == Mode::Nte { ExperimentSummary::Nte(set) } else { ExperimentSummary::Toll(set) };
    write_json(&cfg.experiment.output_dir.join("summary.json"), &summary)?;
    Ok(RunOutcome { summary, all_converged })
}

/// No-toll equilibrium for every replication.
pub fn run_nte(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_scenarios(cfg, Mode::Nte)
}

/// Equilibrium under the configured toll profile for every replication.
pub fn run_fixed_toll(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_scenarios(cfg, Mode::Toll)
}

/// One BO campaign per replication. Each campaign's trace and scenario files
/// are written as soon as it finishes.
pub fn run_optimize(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    prepare(cfg, Mode::Optimize)?;
    let (k, _) = cfg.search_space()?;
    let out = cfg.experiment.output_dir.clone();
    let campaigns = for_each_replication(cfg, |r, rc| {
        let c = run_campaign(&rc, r)?;
        c.trace.write_csv(create(&out.join(format!("bo_trace_{r}.csv")))?)?;
        write_scenario_files(&replication_dir(cfg, r), &c.best)?;
        Ok(c.summary)
    })?;

    let best = campaigns
        .iter()
        .max_by(|a, b| a.best_objective.total_cmp(&b.best_objective))
        .expect("at least one replication");
    let objectives: Vec<f64> = campaigns.iter().map(|c| c.best_objective).collect();
    let (mean, std) = mean_std(&objectives);
    let magnitudes: Vec<f64> = objectives.iter().map(|v| v.abs()).collect();
    let nte: Vec<f64> = campaigns.iter().map(|c| c.nte.welfare).collect();
    let all_converged = campaigns.iter().all(|c| c.best.converged && c.nte.converged);
    let set = CampaignSet {
        k,
        dropout: cfg.bo.clone().unwrap_or_default().dropout.label(),
        best_vector: best.best_vector.clone(),
        best_objective: best.best_objective,
        mean,
        std,
        mean_magnitude: mean_std(&magnitudes).0,
        nte_welfare_mean: mean_std(&nte).0,
        campaigns,
    };
    let summary = ExperimentSummary::Optimize(set);
    write_json(&out.join("summary.json"), &summary)?;
    Ok(RunOutcome { summary, all_converged })
}

/// Dispatches on the mode the configuration resolves to.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    match cfg.mode()? {
        Mode::Nte => run_nte(cfg),
        Mode::Toll => run_fixed_toll(cfg),
        Mode::Optimize => run_optimize(cfg),
    }
}
