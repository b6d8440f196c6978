//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use todp_core::mfd::TrajectoryPoint;

/// Matern 5/2 written out from scratch.
pub fn matern52(a: &[f64], b: &[f64], length_scales: &[f64], signal_variance: f64) -> f64 {
    let r = a
        .iter()
        .zip(b)
        .zip(length_scales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum::<f64>()
        .sqrt();
    let s = 5f64.sqrt() * r;
    signal_variance * (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// GP posterior mean and latent variance through an explicit matrix inverse.
pub fn gp_posterior_by_inverse(
    xs: &[Vec<f64>],
    ys: &[f64],
    length_scales: &[f64],
    signal_variance: f64,
    noise: f64,
    standardize: bool,
    x: &[f64],
) -> (f64, f64) {
    let m = xs.len();
    let (shift, scale) = if standardize {
        let mean = ys.iter().sum::<f64>() / m as f64;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / m as f64).sqrt();
        (mean, if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 })
    } else {
        (0.0, 1.0)
    };
    let k = DMatrix::from_fn(m, m, |i, j| {
        matern52(&xs[i], &xs[j], length_scales, signal_variance) + if i == j { noise } else { 0.0 }
    });
    let inv = k.clone().try_inverse().expect("covariance is invertible");
    // The plain inverse loses accuracy on badly conditioned covariances, so
    // both solves get a few rounds of residual correction.
    let solve = |b: &DVector<f64>| {
        let mut sol = &inv * b;
        for _ in 0..4 {
            let r = b - &k * &sol;
            sol += &inv * r;
        }
        sol
    };
    let z = DVector::from_iterator(m, ys.iter().map(|y| (y - shift) / scale));
    let ks = DVector::from_iterator(m, xs.iter().map(|xi| matern52(x, xi, length_scales, signal_variance)));
    let mean = ks.dot(&solve(&z));
    let var = signal_variance - ks.dot(&solve(&ks));
    (shift + scale * mean, scale * scale * var)
}

/// Speed in m/min with the quadratic fundamental diagram.
pub fn speed(n: f64, n_jam: f64, v_f: f64) -> f64 {
    if n >= n_jam {
        0.0
    } else {
        60.0 * v_f * (1.0 - n / n_jam).powi(2)
    }
}

/// Distance covered between `t0` and `t1` by summing speed times duration
/// over the constant-accumulation segments of a trajectory.
pub fn integrate_speed(traj: &[TrajectoryPoint], n_jam: f64, v_f: f64, t0: f64, t1: f64) -> f64 {
    let mut dist = 0.0;
    // Segment before the first event is empty.
    let mut seg_start = f64::NEG_INFINITY;
    let mut n = 0usize;
    for p in traj.iter().chain(std::iter::once(&TrajectoryPoint { time: f64::INFINITY, accumulation: 0 })) {
        let lo = seg_start.max(t0);
        let hi = p.time.min(t1);
        if hi > lo {
            dist += speed(n as f64, n_jam, v_f) * (hi - lo);
        }
        seg_start = p.time;
        n = p.accumulation;
    }
    dist
}
