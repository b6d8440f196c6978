//! Upper-confidence-bound acquisition and its maximisation over a subspace.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gp::GpModel;
use super::optim::{maximize_box, SpgOptions};
use crate::rng::SimRng;

/// `mu(x) + beta * sigma(x)`.
pub fn ucb(model: &GpModel, x: &[f64], beta: f64) -> f64 {
    let (mean, var) = model.posterior(x);
    mean + beta * var.sqrt()
}

fn ucb_with_grad(model: &GpModel, x: &[f64], beta: f64) -> (f64, Vec<f64>) {
    let (mean, var, dmean, dvar) = model.posterior_with_grad(x);
    let sd = var.sqrt();
    let grad = if beta == 0.0 || sd < 1e-12 {
        dmean
    } else {
        dmean.iter().zip(&dvar).map(|(m, v)| m + beta * v / (2.0 * sd)).collect()
    };
    (mean + beta * sd, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionOptions {
    /// Quasi-random probes scored before local refinement.
    pub probe_points: usize,
    /// Best probes refined by local ascent.
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for AcquisitionOptions {
    fn default() -> Self {
        Self { probe_points: 1024, restarts: 5, max_iter: 50 }
    }
}

const PRIMES: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Randomly shifted Halton points in `[0, 1)^dims`; falls back to uniform
/// draws beyond the tabulated prime bases.
pub fn shifted_halton(n: usize, dims: usize, rng: &mut SimRng) -> Vec<Vec<f64>> {
    let shift: Vec<f64> = (0..dims).map(|_| rng.random()).collect();
    (0..n)
        .map(|i| {
            (0..dims)
                .map(|d| match PRIMES.get(d) {
                    Some(&p) => (radical_inverse(i as u64 + 1, p) + shift[d]).fract(),
                    None => rng.random(),
                })
                .collect()
        })
        .collect()
}

/// Maximises UCB in the unit cube over `active` coordinates, holding the
/// others at `fill_in`. The result scores at least as well as every probe.
pub fn maximize_acquisition_unit(
    model: &GpModel,
    beta: f64,
    active: &[usize],
    fill_in: &[f64],
    opts: &AcquisitionOptions,
    rng: &mut SimRng,
) -> Vec<f64> {
    assert!(!active.is_empty(), "at least one active dimension is required");
    let embed = |sub: &[f64]| -> Vec<f64> {
        let mut x = fill_in.to_vec();
        for (&d, &v) in active.iter().zip(sub) {
            x[d] = v;
        }
        x
    };

    let mut probes = shifted_halton(opts.probe_points.max(1), active.len(), rng);
    probes.push(active.iter().map(|&d| fill_in[d]).collect());
    let mut scored: Vec<(f64, Vec<f64>)> = probes
        .into_iter()
        .map(|p| (ucb(model, &embed(&p), beta), p))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let lower = vec![0.0; active.len()];
    let upper = vec![1.0; active.len()];
    let spg = SpgOptions { max_iter: opts.max_iter, tol: 1e-7, memory: 5 };
    let (mut best_value, mut best) = scored[0].clone();
    for (_, start) in scored.iter().take(opts.restarts.max(1)) {
        let refined = maximize_box(
            |sub| {
                let (v, g) = ucb_with_grad(model, &embed(sub), beta);
                Some((v, active.iter().map(|&d| g[d]).collect()))
            },
            start,
            &lower,
            &upper,
            spg,
        );
        if let Some(r) = refined {
            // Re-score with the plain posterior so comparisons use one code path.
            let v = ucb(model, &embed(&r.x), beta);
            if v > best_value {
                best_value = v;
                best = r.x;
            }
        }
    }
    embed(&best)
}

/// Same as [`maximize_acquisition_unit`] but in decision-vector units: the
/// model is trained on inputs rescaled from `bounds` to the unit cube.
pub fn maximize_acquisition(
    model: &GpModel,
    bounds: &[[f64; 2]],
    beta: f64,
    active: &[usize],
    fill_in: &[f64],
    opts: &AcquisitionOptions,
    rng: &mut SimRng,
) -> Vec<f64> {
    let unit_fill = to_unit(fill_in, bounds);
    from_unit(&maximize_acquisition_unit(model, beta, active, &unit_fill, opts, rng), bounds)
}

pub fn to_unit(x: &[f64], bounds: &[[f64; 2]]) -> Vec<f64> {
    x.iter()
        .zip(bounds)
        .map(|(v, [lo, hi])| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
        .collect()
}

pub fn from_unit(u: &[f64], bounds: &[[f64; 2]]) -> Vec<f64> {
    u.iter()
        .zip(bounds)
        .map(|(v, [lo, hi])| (lo + v * (hi - lo)).clamp(*lo, *hi))
        .collect()
}
