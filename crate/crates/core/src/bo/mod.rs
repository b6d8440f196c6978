//! Bayesian optimisation of a black-box objective over a box.
//!
//! The loop evaluates a Latin hypercube design, then repeatedly fits a GP to
//! everything seen so far (inputs rescaled to the unit cube, targets
//! standardised), picks the active subspace, maximises UCB there with the
//! inactive coordinates copied from the incumbent, and evaluates the result.

pub mod acquisition;
pub mod dropout;
pub mod gp;
pub mod kernel;
pub mod lhs;
pub mod optim;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use acquisition::{maximize_acquisition, ucb, AcquisitionOptions};
pub use dropout::{dropout_select, DropoutMode};
pub use gp::{fit_hyperparameters, posterior, FitOptions, GpHyperparameters, GpModel};
pub use kernel::{matern_kernel, Matern52};
pub use lhs::lhs;

use crate::rng::{self, streams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoConfig {
    /// Latin hypercube points evaluated before the first GP fit.
    pub n_init: usize,
    /// Total evaluations, design included.
    pub budget: usize,
    pub ucb_beta: f64,
    pub dropout: DropoutMode,
    pub acq_restarts: usize,
    pub acq_probe_points: usize,
    pub fit_restarts: usize,
    /// Objective value recorded for evaluations that stall. Defaults to the
    /// worst value observed so far.
    pub stall_penalty: Option<f64>,
    pub seed: u64,
    /// Seed handed to the objective. Defaults to `seed`.
    pub objective_seed: Option<u64>,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            n_init: 30,
            budget: 90,
            ucb_beta: 2.0,
            dropout: DropoutMode::None,
            acq_restarts: 5,
            acq_probe_points: 1024,
            fit_restarts: 8,
            stall_penalty: None,
            seed: 42,
            objective_seed: None,
        }
    }
}

impl BoConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_init == 0 {
            return Err(Error::Config("bo: n_init must be at least 1".into()));
        }
        if self.budget < self.n_init {
            return Err(Error::Config("bo: budget must be >= n_init".into()));
        }
        if !(self.ucb_beta >= 0.0) {
            return Err(Error::Config("bo: ucb_beta must be non-negative".into()));
        }
        if self.acq_probe_points == 0 {
            return Err(Error::Config("bo: acq_probe_points must be positive".into()));
        }
        self.dropout.validate(dim)
    }

    pub fn objective_seed(&self) -> u64 {
        self.objective_seed.unwrap_or(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub objective: f64,
    pub seed: u64,
    /// The objective stalled and `objective` holds the penalty.
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoTrace {
    pub evaluations: Vec<Evaluation>,
    /// Best objective after each evaluation.
    pub incumbent_series: Vec<f64>,
    pub best_x: Vec<f64>,
    pub best_objective: f64,
}

impl BoTrace {
    fn push(&mut self, e: Evaluation) {
        if self.evaluations.is_empty() || e.objective > self.best_objective {
            self.best_objective = e.objective;
            self.best_x.clone_from(&e.x);
        }
        self.incumbent_series.push(self.best_objective);
        self.evaluations.push(e);
    }

    /// CSV with columns `iteration,x0..x{D-1},objective,incumbent`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let dim = self.best_x.len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iteration".to_string()];
        header.extend((0..dim).map(|d| format!("x{d}")));
        header.extend(["objective".into(), "incumbent".into()]);
        w.write_record(&header)?;
        for (i, (e, inc)) in self.evaluations.iter().zip(&self.incumbent_series).enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(e.x.iter().map(|v| v.to_string()));
            row.push(e.objective.to_string());
            row.push(inc.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn evaluate<F>(objective: &mut F, x: Vec<f64>, cfg: &BoConfig, trace: &BoTrace) -> Result<Evaluation>
where
    F: FnMut(&[f64], u64) -> Result<f64>,
{
    let seed = cfg.objective_seed();
    match objective(&x, seed) {
        Ok(v) if v.is_finite() => Ok(Evaluation { x, objective: v, seed, stalled: false }),
        Ok(v) => Err(Error::Numerical(format!("objective returned {v}"))),
        Err(e) if e.is_stall() => {
            let worst = trace
                .evaluations
                .iter()
                .filter(|e| !e.stalled)
                .map(|e| e.objective)
                .fold(f64::INFINITY, f64::min);
            let penalty = cfg.stall_penalty.unwrap_or(if worst.is_finite() { worst } else { 0.0 });
            Ok(Evaluation { x, objective: penalty, seed, stalled: true })
        }
        Err(e) => Err(e),
    }
}

/// Maximises `objective` over the box `bounds`. The objective receives the
/// decision vector and the simulation seed to use.
pub fn run_bo<F>(mut objective: F, bounds: &[[f64; 2]], cfg: &BoConfig) -> Result<BoTrace>
where
    F: FnMut(&[f64], u64) -> Result<f64>,
{
    let dim = bounds.len();
    if dim == 0 || bounds.iter().any(|[lo, hi]| !(lo < hi)) {
        return Err(Error::Config("bo: every bound needs lo < hi".into()));
    }
    cfg.validate(dim)?;

    let mut lhs_rng = rng::stream(cfg.seed, streams::LHS);
    let mut dropout_rng = rng::stream(cfg.seed, streams::DROPOUT);
    let mut acq_rng = rng::stream(cfg.seed, streams::ACQUISITION);
    let mut fit_rng = rng::stream(cfg.seed, streams::HYPERPARAMETERS);

    let mut trace = BoTrace {
        evaluations: Vec::with_capacity(cfg.budget),
        incumbent_series: Vec::with_capacity(cfg.budget),
        best_x: Vec::new(),
        best_objective: f64::NEG_INFINITY,
    };
    for u in lhs(cfg.n_init, dim, &mut lhs_rng) {
        let e = evaluate(&mut objective, acquisition::from_unit(&u, bounds), cfg, &trace)?;
        trace.push(e);
    }

    let fit_opts = FitOptions { restarts: cfg.fit_restarts, ..FitOptions::default() };
    let acq_opts = AcquisitionOptions {
        probe_points: cfg.acq_probe_points,
        restarts: cfg.acq_restarts,
        ..AcquisitionOptions::default()
    };
    let mut hyper: Option<GpHyperparameters> = None;
    while trace.evaluations.len() < cfg.budget {
        let xs: Vec<Vec<f64>> = trace.evaluations.iter().map(|e| acquisition::to_unit(&e.x, bounds)).collect();
        let ys: Vec<f64> = trace.evaluations.iter().map(|e| e.objective).collect();
        let model = if xs.len() >= 2 {
            fit_hyperparameters(&xs, &ys, &fit_opts, hyper.as_ref(), &mut fit_rng)?
        } else {
            GpModel::from_hyperparameters(xs, ys, &GpHyperparameters::default_for(dim))?
        };
        hyper = Some(model.hyperparameters());

        let active = dropout_select(cfg.dropout, dim, &mut dropout_rng)?;
        let fill_in = acquisition::to_unit(&trace.best_x, bounds);
        let next = acquisition::maximize_acquisition_unit(&model, cfg.ucb_beta, &active, &fill_in, &acq_opts, &mut acq_rng);
        let e = evaluate(&mut objective, acquisition::from_unit(&next, bounds), cfg, &trace)?;
        trace.push(e);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64], _: u64) -> Result<f64> {
        Ok(-x.iter().map(|v| v * v).sum::<f64>())
    }

    #[test]
    fn budget_equal_to_design_is_pure_lhs() {
        let cfg = BoConfig { n_init: 7, budget: 7, ..Default::default() };
        let t = run_bo(sphere, &[[-1.0, 1.0]; 2], &cfg).unwrap();
        assert_eq!(t.evaluations.len(), 7);
        // One point per stratum of width 2/7 in each coordinate.
        for d in 0..2 {
            let mut s: Vec<usize> = t.evaluations.iter().map(|e| ((e.x[d] + 1.0) / 2.0 * 7.0) as usize).collect();
            s.sort();
            assert_eq!(s, (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn incumbent_is_monotone_and_deterministic() {
        let cfg = BoConfig { n_init: 5, budget: 15, acq_probe_points: 128, fit_restarts: 3, ..Default::default() };
        let a = run_bo(sphere, &[[-2.0, 3.0]; 3], &cfg).unwrap();
        let b = run_bo(sphere, &[[-2.0, 3.0]; 3], &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.incumbent_series.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(a.incumbent_series.last().copied(), Some(a.best_objective));
    }

    #[test]
    fn stalls_are_penalised_and_other_errors_propagate() {
        let cfg = BoConfig { n_init: 4, budget: 6, acq_probe_points: 64, fit_restarts: 2, stall_penalty: Some(-99.0), ..Default::default() };
        let mut calls = 0;
        let t = run_bo(
            |x, _| {
                calls += 1;
                if calls == 2 {
                    Err(Error::Stall { time: 1.0, inside: 3 })
                } else {
                    sphere(x, 0)
                }
            },
            &[[-1.0, 1.0]],
            &cfg,
        )
        .unwrap();
        assert!(t.evaluations[1].stalled);
        assert_eq!(t.evaluations[1].objective, -99.0);
        let err = run_bo(|_, _| Err(Error::Input("boom".into())), &[[-1.0, 1.0]], &cfg).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = BoConfig { n_init: 10, budget: 5, ..Default::default() };
        assert!(run_bo(sphere, &[[0.0, 1.0]], &cfg).is_err());
        let cfg = BoConfig { dropout: DropoutMode::Random { d: 4 }, ..Default::default() };
        assert!(run_bo(sphere, &[[0.0, 1.0]; 3], &cfg).is_err());
        assert!(run_bo(sphere, &[[1.0, 1.0]], &BoConfig::default()).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let cfg = BoConfig { n_init: 2, budget: 2, ..Default::default() };
        let t = run_bo(sphere, &[[0.0, 1.0]; 3], &cfg).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,x0,x1,x2,objective,incumbent\n0,"));
        assert_eq!(text.lines().count(), 3);
    }
}
