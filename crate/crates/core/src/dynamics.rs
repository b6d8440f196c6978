//! Departure-time choice and day-to-day cost learning.
//!
//! Each traveler keeps a perceived cost for every slot of their menu. A day
//! consists of logit choices on the perceived costs, one MFD simulation,
//! experienced costs for the chosen slot and probe-estimated costs for every
//! other slot, and an exponential-smoothing update of the perceptions.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gumbel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mfd::{self, DaySimResult, NetworkParams, SpeedProfile};
use crate::population::TravelerProfile;
use crate::rng::{self, streams, SimRng};
use crate::toll::TollProfile;
use crate::{Error, Result};

/// How the uniform variate behind each logit draw is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceSampling {
    /// One uniform per traveler, reused every day (inverse-CDF sampling with
    /// common random numbers). Choices only move when probabilities do.
    Persistent,
    /// Fresh uniforms every day.
    Daily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DayToDayConfig {
    /// Logit scale, per DKK.
    pub logit_scale: f64,
    /// Weight on yesterday's perception, in (0, 1).
    pub learning_weight: f64,
    /// Converts toll rate times meters into DKK.
    pub toll_scale: f64,
    /// Learning days after the day-0 initialisation.
    pub max_days: usize,
    /// DKK per traveler.
    pub convergence_tol: f64,
    pub stable_days: usize,
    pub choice_sampling: ChoiceSampling,
    /// Keep every day's full trajectory in the result.
    pub keep_trajectories: bool,
    pub seed: u64,
}

impl Default for DayToDayConfig {
    fn default() -> Self {
        Self {
            logit_scale: 0.25,
            learning_weight: 0.7,
            toll_scale: 2e-4,
            max_days: 80,
            convergence_tol: 0.5,
            stable_days: 5,
            choice_sampling: ChoiceSampling::Persistent,
            keep_trajectories: false,
            seed: 42,
        }
    }
}

impl DayToDayConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("dynamics: {m}")));
        if !(self.learning_weight > 0.0 && self.learning_weight < 1.0) {
            return bad("learning_weight must lie in (0, 1)");
        }
        if !(self.logit_scale > 0.0) || !self.logit_scale.is_finite() {
            return bad("logit_scale must be positive");
        }
        if !(self.convergence_tol > 0.0) {
            return bad("convergence_tol must be positive");
        }
        if !(self.toll_scale >= 0.0) {
            return bad("toll_scale must be non-negative");
        }
        if self.stable_days == 0 {
            return bad("stable_days must be at least 1");
        }
        Ok(())
    }
}

/// Perceived and experienced monetary utilities, one row per traveler and
/// one column per menu slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub perceived: Vec<Vec<f64>>,
    pub experienced: Vec<Vec<f64>>,
}

/// Generalised time cost split into its travel-time and schedule-delay parts (minutes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeCost {
    pub travel: f64,
    pub schedule: f64,
}

impl TimeCost {
    pub fn total(&self) -> f64 {
        self.travel + self.schedule
    }
}

pub fn time_cost(traveler: &TravelerProfile, dep: f64, travel_time: f64) -> TimeCost {
    let arrival = dep + travel_time;
    let schedule = if arrival <= traveler.desired_arrival {
        traveler.sde * (traveler.desired_arrival - arrival)
    } else {
        traveler.sdl * (arrival - traveler.desired_arrival)
    };
    TimeCost { travel: travel_time, schedule }
}

/// Toll payment in DKK for departing at `dep`.
pub fn toll_payment(traveler: &TravelerProfile, dep: f64, toll: Option<&TollProfile>, w: f64) -> f64 {
    toll.map_or(0.0, |p| p.eval(dep) * traveler.trip_length * w)
}

/// Monetary utility (negative cost) of a trip, DKK.
pub fn experienced_cost(
    traveler: &TravelerProfile,
    dep: f64,
    travel_time: f64,
    toll: Option<&TollProfile>,
    w: f64,
) -> f64 {
    -traveler.value_of_time * time_cost(traveler, dep, travel_time).total() - toll_payment(traveler, dep, toll, w)
}

/// Logit probabilities over a menu.
pub fn choice_probabilities(perceived_row: &[f64], logit_scale: f64) -> Vec<f64> {
    let max = perceived_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = perceived_row
        .iter()
        .map(|&c| (logit_scale * (c - max)).exp())
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

/// Index of the slot whose cumulative probability first reaches `u`.
fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

pub fn learning_update(perceived: f64, experienced: f64, weight: f64) -> f64 {
    weight * perceived + (1.0 - weight) * experienced
}

/// `||C - c||_1 / N` over all traveler-slot entries.
pub fn inconsistency(costs: &CostTable) -> f64 {
    let n = costs.perceived.len();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = costs
        .perceived
        .iter()
        .zip(&costs.experienced)
        .map(|(p, e)| p.iter().zip(e).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .sum();
    total / n as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySummary {
    pub day: usize,
    /// Absent on day 0, when there is no perception yet.
    pub inconsistency: Option<f64>,
    pub mean_consumer_surplus: f64,
    pub welfare: f64,
    pub peak_accumulation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub final_costs: CostTable,
    /// Menu index chosen by each traveler on the final day.
    pub final_slots: Vec<usize>,
    pub final_departures: Vec<f64>,
    pub final_day: DaySimResult,
    /// Days 1..=days_run.
    pub inconsistency_series: Vec<f64>,
    /// Day 0 included.
    pub day_results: Vec<DaySummary>,
    pub converged: bool,
    pub days_run: usize,
    /// Realised taste shocks per traveler and menu slot, DKK.
    pub gumbel_draws: Vec<Vec<f64>>,
    pub toll: Option<TollProfile>,
    pub toll_scale: f64,
    /// Every simulated day's trajectory, when requested.
    pub trajectories: Vec<DaySimResult>,
}

impl EquilibriumResult {
    pub fn peak_accumulation(&self) -> usize {
        self.final_day.peak_accumulation
    }
}

struct Day {
    slots: Vec<usize>,
    departures: Vec<f64>,
    sim: DaySimResult,
    experienced: Vec<Vec<f64>>,
}

/// The state-independent parts of a day-to-day run.
struct Learner<'a> {
    population: &'a [TravelerProfile],
    net: &'a NetworkParams,
    cfg: &'a DayToDayConfig,
    lengths: Vec<f64>,
    /// Toll payment per traveler and slot; fixed for the whole run.
    payments: Vec<Vec<f64>>,
    persistent_uniforms: Vec<f64>,
    daily_rng: SimRng,
}

impl<'a> Learner<'a> {
    fn new(
        population: &'a [TravelerProfile],
        net: &'a NetworkParams,
        toll: Option<&TollProfile>,
        cfg: &'a DayToDayConfig,
    ) -> Self {
        let mut persistent = rng::stream(cfg.seed, streams::CHOICE_PERSISTENT);
        Self {
            population,
            net,
            cfg,
            lengths: population.iter().map(|p| p.trip_length).collect(),
            payments: population
                .iter()
                .map(|p| p.time_window.iter().map(|&dep| toll_payment(p, dep, toll, cfg.toll_scale)).collect())
                .collect(),
            persistent_uniforms: population.iter().map(|_| persistent.random::<f64>()).collect(),
            daily_rng: rng::stream(cfg.seed, streams::CHOICE_DAILY),
        }
    }

    fn initial_slots(&mut self) -> Vec<usize> {
        self.population
            .iter()
            .map(|p| self.daily_rng.random_range(0..p.time_window.len()))
            .collect()
    }

    fn choose(&mut self, perceived: &[Vec<f64>]) -> Vec<usize> {
        let mu = self.cfg.logit_scale;
        match self.cfg.choice_sampling {
            ChoiceSampling::Persistent => perceived
                .par_iter()
                .zip(&self.persistent_uniforms)
                .map(|(row, &u)| inverse_cdf(&choice_probabilities(row, mu), u))
                .collect(),
            ChoiceSampling::Daily => {
                let uniforms: Vec<f64> = perceived.iter().map(|_| self.daily_rng.random()).collect();
                perceived
                    .par_iter()
                    .zip(&uniforms)
                    .map(|(row, &u)| inverse_cdf(&choice_probabilities(row, mu), u))
                    .collect()
            }
        }
    }

    fn experience(&self, slots: Vec<usize>) -> Result<Day> {
        let departures: Vec<f64> = self
            .population
            .iter()
            .zip(&slots)
            .map(|(p, &k)| p.time_window[k])
            .collect();
        let sim = mfd::simulate_day(&departures, &self.lengths, self.net)?;
        let profile = SpeedProfile::new(&sim.trajectory, self.net);
        // Same arithmetic as `experienced_cost`, with the toll looked up.
        let experienced = self
            .population
            .par_iter()
            .zip(slots.par_iter())
            .zip(self.payments.par_iter())
            .map(|((p, &chosen), pay)| {
                p.time_window
                    .iter()
                    .zip(pay)
                    .enumerate()
                    .map(|(k, (&dep, &toll))| {
                        let tt = if k == chosen {
                            sim.travel_times[p.id]
                        } else {
                            profile.travel_time(dep, p.trip_length)
                        };
                        -p.value_of_time * time_cost(p, dep, tt).total() - toll
                    })
                    .collect()
            })
            .collect();
        Ok(Day { slots, departures, sim, experienced })
    }

    fn summarise(&self, day: usize, inconsistency: Option<f64>, d: &Day) -> DaySummary {
        let n = self.population.len().max(1) as f64;
        let mut cs = 0.0;
        let mut welfare = 0.0;
        for (p, &k) in self.population.iter().zip(&d.slots) {
            cs += d.experienced[p.id][k];
            let dep = p.time_window[k];
            welfare -= p.value_of_time * time_cost(p, dep, d.sim.travel_times[p.id]).total();
        }
        DaySummary {
            day,
            inconsistency,
            mean_consumer_surplus: cs / n,
            welfare: welfare / n,
            peak_accumulation: d.sim.peak_accumulation,
        }
    }
}

fn check_population(population: &[TravelerProfile]) -> Result<()> {
    for (i, p) in population.iter().enumerate() {
        if p.id != i {
            return Err(Error::Input(format!("traveler at position {i} has id {}", p.id)));
        }
        p.validate()?;
    }
    Ok(())
}

/// Gumbel taste shocks with scale `1 / logit_scale`, fixed per traveler and slot.
pub fn taste_shocks(population: &[TravelerProfile], cfg: &DayToDayConfig) -> Result<Vec<Vec<f64>>> {
    let gumbel = Gumbel::new(0.0, 1.0 / cfg.logit_scale)
        .map_err(|e| Error::Config(format!("taste shock distribution: {e}")))?;
    let mut rng = rng::stream(cfg.seed, streams::TASTE);
    Ok(population
        .iter()
        .map(|p| p.time_window.iter().map(|_| gumbel.sample(&mut rng)).collect())
        .collect())
}

/// Iterates days until the inconsistency stays below tolerance for
/// `stable_days` consecutive days, or `max_days` is reached.
pub fn run_day_to_day(
    population: &[TravelerProfile],
    net: &NetworkParams,
    toll: Option<&TollProfile>,
    cfg: &DayToDayConfig,
) -> Result<EquilibriumResult> {
    cfg.validate()?;
    net.validate()?;
    check_population(population)?;
    let gumbel_draws = taste_shocks(population, cfg)?;
    let mut learner = Learner::new(population, net, toll, cfg);
    let mut trajectories = Vec::new();

    let slots = learner.initial_slots();
    let mut day = learner.experience(slots)?;
    let mut perceived = day.experienced.clone();
    let mut day_results = vec![learner.summarise(0, None, &day)];
    if cfg.keep_trajectories {
        trajectories.push(day.sim.clone());
    }

    let mut series = Vec::new();
    let mut converged = false;
    let mut costs = CostTable { perceived: perceived.clone(), experienced: day.experienced.clone() };

    for d in 1..=cfg.max_days {
        let slots = learner.choose(&perceived);
        day = learner.experience(slots)?;
        costs = CostTable { perceived, experienced: day.experienced.clone() };
        let gap = inconsistency(&costs);
        series.push(gap);
        day_results.push(learner.summarise(d, Some(gap), &day));
        if cfg.keep_trajectories {
            trajectories.push(day.sim.clone());
        }
        if series.len() >= cfg.stable_days
            && series[series.len() - cfg.stable_days..].iter().all(|&g| g < cfg.convergence_tol)
        {
            converged = true;
            break;
        }
        let w = cfg.learning_weight;
        perceived = costs
            .perceived
            .iter()
            .zip(&costs.experienced)
            .map(|(p, e)| p.iter().zip(e).map(|(&a, &b)| learning_update(a, b, w)).collect())
            .collect();
    }

    Ok(EquilibriumResult {
        days_run: series.len(),
        final_costs: costs,
        final_slots: day.slots,
        final_departures: day.departures,
        final_day: day.sim,
        inconsistency_series: series,
        day_results,
        converged,
        gumbel_draws,
        toll: toll.cloned(),
        toll_scale: cfg.toll_scale,
        trajectories,
    })
}

/// Plays one more day with perceptions frozen at the equilibrium and
/// returns that day's inconsistency.
pub fn frozen_day_inconsistency(
    population: &[TravelerProfile],
    net: &NetworkParams,
    eq: &EquilibriumResult,
    cfg: &DayToDayConfig,
) -> Result<f64> {
    let mut learner = Learner::new(population, net, eq.toll.as_ref(), cfg);
    let perceived = &eq.final_costs.perceived;
    let slots = learner.choose(perceived);
    let day = learner.experience(slots)?;
    Ok(inconsistency(&CostTable { perceived: perceived.clone(), experienced: day.experienced }))
}

/// Writes `day,inconsistency,mean_consumer_surplus,welfare,peak_accumulation`.
pub fn write_days_csv<W: Write>(days: &[DaySummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["day", "inconsistency", "mean_consumer_surplus", "welfare", "peak_accumulation"])?;
    for d in days {
        w.write_record([
            d.day.to_string(),
            d.inconsistency.map(|g| g.to_string()).unwrap_or_default(),
            d.mean_consumer_surplus.to_string(),
            d.welfare.to_string(),
            d.peak_accumulation.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
