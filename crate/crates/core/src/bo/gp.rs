//! Zero-mean Gaussian-process regression with a Matern-5/2 kernel.
//!
//! Targets are standardised before fitting and predictions are mapped back,
//! so the zero prior mean sits at the sample mean of the observations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::Matern52;
use super::optim::{maximize_box, SpgOptions};
use crate::linalg::Cholesky;
use crate::rng::SimRng;
use crate::{Error, Result};

/// Smallest observation-noise variance a model may carry (standardised units).
pub const NOISE_FLOOR: f64 = 1e-8;

const LOG_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyperparameters {
    pub fn default_for(dim: usize) -> Self {
        Self { length_scales: vec![0.5; dim], signal_variance: 1.0, noise_variance: 1e-3 }
    }

    fn to_log(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.length_scales.iter().map(|l| l.ln()).collect();
        v.push(self.signal_variance.ln());
        v.push(self.noise_variance.ln());
        v
    }

    fn from_log(v: &[f64]) -> Self {
        let d = v.len() - 2;
        Self {
            length_scales: v[..d].iter().map(|x| x.exp()).collect(),
            signal_variance: v[d].exp(),
            noise_variance: v[d + 1].exp(),
        }
    }
}

/// Box for hyperparameter search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterBounds {
    pub length_scale: [f64; 2],
    pub signal_variance: [f64; 2],
    pub noise_variance: [f64; 2],
}

impl Default for HyperparameterBounds {
    fn default() -> Self {
        Self {
            length_scale: [1e-2, 20.0],
            signal_variance: [1e-2, 1e2],
            noise_variance: [NOISE_FLOOR, 1.0],
        }
    }
}

impl HyperparameterBounds {
    fn log_box(&self, dim: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![self.length_scale[0].ln(); dim];
        let mut hi = vec![self.length_scale[1].ln(); dim];
        lo.push(self.signal_variance[0].ln());
        hi.push(self.signal_variance[1].ln());
        lo.push(self.noise_variance[0].ln());
        hi.push(self.noise_variance[1].ln());
        (lo, hi)
    }
}

#[derive(Debug, Clone)]
pub struct GpModel {
    train_x: Vec<Vec<f64>>,
    train_y: Vec<f64>,
    y_shift: f64,
    y_scale: f64,
    kernel: Matern52,
    noise_variance: f64,
    chol: Cholesky,
    alpha: Vec<f64>,
}

fn covariance(x: &[Vec<f64>], kernel: &Matern52, noise: f64) -> Vec<f64> {
    let m = x.len();
    let mut k = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let v = kernel.eval(&x[i], &x[j]);
            k[i * m + j] = v;
            k[j * m + i] = v;
        }
        k[i * m + i] += noise;
    }
    k
}

fn standardisation(y: &[f64], standardize: bool) -> (f64, f64) {
    if !standardize || y.is_empty() {
        return (0.0, 1.0);
    }
    let m = y.len() as f64;
    let mean = y.iter().sum::<f64>() / m;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    let sd = var.sqrt();
    (mean, if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 })
}

impl GpModel {
    /// Conditions the GP on `(train_x, train_y)` with fixed hyperparameters.
    pub fn new(
        train_x: Vec<Vec<f64>>,
        train_y: Vec<f64>,
        kernel: Matern52,
        noise_variance: f64,
        standardize: bool,
    ) -> Result<Self> {
        if train_x.len() != train_y.len() {
            return Err(Error::Input(format!(
                "{} inputs but {} targets",
                train_x.len(),
                train_y.len()
            )));
        }
        if let Some(bad) = train_x.iter().position(|x| x.len() != kernel.dim()) {
            return Err(Error::Input(format!("input {bad} has the wrong dimension")));
        }
        if train_y.iter().any(|y| !y.is_finite()) {
            return Err(Error::Input("non-finite training target".into()));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::Input("noise variance must be non-negative".into()));
        }
        let (y_shift, y_scale) = standardisation(&train_y, standardize);
        let m = train_x.len();
        let k = covariance(&train_x, &kernel, noise_variance);
        let chol = Cholesky::factor_escalating(&k, m)?;
        let z: Vec<f64> = train_y.iter().map(|y| (y - y_shift) / y_scale).collect();
        let alpha = chol.solve(&z);
        Ok(Self { train_x, train_y, y_shift, y_scale, kernel, noise_variance, chol, alpha })
    }

    pub fn from_hyperparameters(
        train_x: Vec<Vec<f64>>,
        train_y: Vec<f64>,
        h: &GpHyperparameters,
    ) -> Result<Self> {
        let kernel = Matern52::new(h.signal_variance, h.length_scales.clone());
        Self::new(train_x, train_y, kernel, h.noise_variance, true)
    }

    pub fn len(&self) -> usize {
        self.train_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn kernel(&self) -> &Matern52 {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn train_x(&self) -> &[Vec<f64>] {
        &self.train_x
    }

    pub fn train_y(&self) -> &[f64] {
        &self.train_y
    }

    pub fn hyperparameters(&self) -> GpHyperparameters {
        GpHyperparameters {
            length_scales: self.kernel.length_scales.clone(),
            signal_variance: self.kernel.signal_variance,
            noise_variance: self.noise_variance,
        }
    }

    /// Posterior mean and latent-function variance at `x`, in target units.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let k: Vec<f64> = self.train_x.iter().map(|xi| self.kernel.eval(x, xi)).collect();
        let mean: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let mut v = k;
        self.chol.solve_lower_in_place(&mut v);
        let explained: f64 = v.iter().map(|a| a * a).sum();
        let var = (self.kernel.signal_variance - explained).max(0.0);
        (self.y_shift + self.y_scale * mean, self.y_scale * self.y_scale * var)
    }

    /// Posterior mean and variance together with their gradients in `x`.
    pub fn posterior_with_grad(&self, x: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
        let dim = self.dim();
        let m = self.len();
        let mut k = Vec::with_capacity(m);
        let mut dk = Vec::with_capacity(m);
        for xi in &self.train_x {
            k.push(self.kernel.eval(x, xi));
            dk.push(self.kernel.grad_first(x, xi));
        }
        let mean: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let w = self.chol.solve(&k);
        let explained: f64 = k.iter().zip(&w).map(|(a, b)| a * b).sum();
        let var = (self.kernel.signal_variance - explained).max(0.0);
        let mut dmean = vec![0.0; dim];
        let mut dvar = vec![0.0; dim];
        for j in 0..m {
            for d in 0..dim {
                dmean[d] += self.alpha[j] * dk[j][d];
                dvar[d] -= 2.0 * w[j] * dk[j][d];
            }
        }
        let s2 = self.y_scale * self.y_scale;
        dmean.iter_mut().for_each(|g| *g *= self.y_scale);
        dvar.iter_mut().for_each(|g| *g *= s2);
        (self.y_shift + self.y_scale * mean, s2 * var, dmean, dvar)
    }

    /// Log marginal likelihood of the standardised targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let z: Vec<f64> = self.train_y.iter().map(|y| (y - self.y_shift) / self.y_scale).collect();
        let fit: f64 = z.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        -0.5 * fit - 0.5 * self.chol.log_det() - 0.5 * self.len() as f64 * LOG_2PI
    }
}

/// Free-function form of [`GpModel::posterior`].
pub fn posterior(model: &GpModel, x: &[f64]) -> (f64, f64) {
    model.posterior(x)
}

/// Log marginal likelihood of standardised targets `z` and its gradient with
/// respect to `[log l_1.., log s2, log noise]`.
fn lml_with_grad(x: &[Vec<f64>], z: &[f64], log_params: &[f64]) -> Option<(f64, Vec<f64>)> {
    let h = GpHyperparameters::from_log(log_params);
    let dim = h.length_scales.len();
    let m = x.len();
    let kernel = Matern52 { signal_variance: h.signal_variance, length_scales: h.length_scales };

    let mut k = vec![0.0; m * m];
    // dK/dlog l_d, stored per pair (i >= j).
    let mut dk = vec![0.0; m * m * dim];
    let mut g = vec![0.0; dim];
    for i in 0..m {
        for j in 0..=i {
            let v = kernel.eval_with_log_length_grad(&x[i], &x[j], &mut g);
            k[i * m + j] = v;
            k[j * m + i] = v;
            dk[(i * m + j) * dim..(i * m + j + 1) * dim].copy_from_slice(&g);
        }
        k[i * m + i] += h.noise_variance;
    }
    let chol = Cholesky::factor(&k, m).ok()?;
    let alpha = chol.solve(z);
    let lml = -0.5 * z.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>()
        - 0.5 * chol.log_det()
        - 0.5 * m as f64 * LOG_2PI;
    let inv = chol.inverse();

    // dLML/dθ = 0.5 tr((αα^T - K^-1) dK/dθ)
    let mut grad = vec![0.0; dim + 2];
    let mut trace_noise = 0.0;
    let mut trace_signal = 0.0;
    for i in 0..m {
        for j in 0..=i {
            let a = alpha[i] * alpha[j] - inv[i * m + j];
            let weight = if i == j { 1.0 } else { 2.0 };
            let base = (i * m + j) * dim;
            for d in 0..dim {
                grad[d] += 0.5 * weight * a * dk[base + d];
            }
            let kij = if i == j { k[i * m + i] - h.noise_variance } else { k[i * m + j] };
            trace_signal += 0.5 * weight * a * kij;
            if i == j {
                trace_noise += 0.5 * a * h.noise_variance;
            }
        }
    }
    grad[dim] = trace_signal;
    grad[dim + 1] = trace_noise;
    lml.is_finite().then_some((lml, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub restarts: usize,
    pub bounds: HyperparameterBounds,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: 8, bounds: HyperparameterBounds::default(), max_iter: 60 }
    }
}

/// Maximises the log marginal likelihood by multi-start projected-gradient
/// ascent in log-parameter space. The first start is `warm_start` (or a
/// neutral default), the others are uniform in the log box.
pub fn fit_hyperparameters(
    train_x: &[Vec<f64>],
    train_y: &[f64],
    opts: &FitOptions,
    warm_start: Option<&GpHyperparameters>,
    rng: &mut SimRng,
) -> Result<GpModel> {
    let m = train_x.len();
    if m < 2 || train_y.len() != m {
        return Err(Error::Input(format!("hyperparameter fitting needs >= 2 observations, got {m}")));
    }
    let dim = train_x[0].len();
    let (lo, hi) = opts.bounds.log_box(dim);
    let (shift, scale) = standardisation(train_y, true);
    let z: Vec<f64> = train_y.iter().map(|y| (y - shift) / scale).collect();

    let mut starts = Vec::with_capacity(opts.restarts.max(1));
    let first = warm_start
        .filter(|h| h.length_scales.len() == dim)
        .cloned()
        .unwrap_or_else(|| GpHyperparameters::default_for(dim));
    starts.push(first.to_log());
    while starts.len() < opts.restarts.max(1) {
        starts.push(lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect());
    }

    let spg = SpgOptions { max_iter: opts.max_iter, tol: 1e-5, memory: 10 };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in &starts {
        let Some(r) = maximize_box(|p| lml_with_grad(train_x, &z, p), start, &lo, &hi, spg) else {
            continue;
        };
        if best.as_ref().is_none_or(|(v, _)| r.value > *v) {
            best = Some((r.value, r.x));
        }
    }
    let (_, params) = best.ok_or_else(|| {
        Error::Numerical("covariance factorisation failed at every hyperparameter start".into())
    })?;
    GpModel::from_hyperparameters(train_x.to_vec(), train_y.to_vec(), &GpHyperparameters::from_log(&params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn toy_model(noise: f64) -> GpModel {
        let x = vec![vec![0.1, 0.2], vec![0.7, 0.4], vec![0.4, 0.9]];
        let y = vec![1.0, -0.5, 2.0];
        GpModel::new(x, y, Matern52::new(1.5, vec![0.3, 0.6]), noise, false).unwrap()
    }

    #[test]
    fn interpolates_training_points_at_noise_floor() {
        let m = toy_model(NOISE_FLOOR);
        for (x, y) in m.train_x().to_vec().iter().zip(m.train_y().to_vec()) {
            let (mu, var) = m.posterior(x);
            assert!((mu - y).abs() < 1e-6);
            assert!(var <= 10.0 * NOISE_FLOOR);
        }
    }

    #[test]
    fn empty_model_returns_prior() {
        let m = GpModel::new(vec![], vec![], Matern52::isotropic(3, 0.5, 2.0), NOISE_FLOOR, true).unwrap();
        assert_eq!(m.posterior(&[0.1, 0.2, 0.3]), (0.0, 2.0));
    }

    #[test]
    fn posterior_gradient_matches_finite_differences() {
        let m = GpModel::new(
            vec![vec![0.1, 0.2], vec![0.7, 0.4], vec![0.4, 0.9]],
            vec![10.0, -5.0, 20.0],
            Matern52::new(1.5, vec![0.3, 0.6]),
            1e-4,
            true,
        )
        .unwrap();
        let x = [0.35, 0.55];
        let (mu, var, dmu, dvar) = m.posterior_with_grad(&x);
        let (mu2, var2) = m.posterior(&x);
        assert!((mu - mu2).abs() < 1e-10 && (var - var2).abs() < 1e-10);
        for d in 0..2 {
            let h = 1e-6;
            let mut p = x;
            let mut q = x;
            p[d] += h;
            q[d] -= h;
            let fm = (m.posterior(&p).0 - m.posterior(&q).0) / (2.0 * h);
            let fv = (m.posterior(&p).1 - m.posterior(&q).1) / (2.0 * h);
            assert!((fm - dmu[d]).abs() < 1e-5, "mean grad {fm} vs {}", dmu[d]);
            assert!((fv - dvar[d]).abs() < 1e-5, "var grad {fv} vs {}", dvar[d]);
        }
    }

    #[test]
    fn lml_gradient_matches_finite_differences() {
        let x = vec![vec![0.1, 0.2], vec![0.7, 0.4], vec![0.4, 0.9], vec![0.9, 0.8]];
        let z = vec![0.5, -1.0, 1.2, -0.7];
        let p = vec![(0.4f64).ln(), (0.7f64).ln(), (1.3f64).ln(), (0.05f64).ln()];
        let (_, g) = lml_with_grad(&x, &z, &p).unwrap();
        for i in 0..p.len() {
            let h = 1e-6;
            let mut a = p.clone();
            let mut b = p.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (lml_with_grad(&x, &z, &a).unwrap().0 - lml_with_grad(&x, &z, &b).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "param {i}: {fd} vs {}", g[i]);
        }
        // Agrees with the model's own likelihood.
        let model = GpModel::new(
            x.clone(),
            z.clone(),
            Matern52::new(1.3, vec![0.4, 0.7]),
            0.05,
            false,
        )
        .unwrap();
        assert!((model.log_marginal_likelihood() - lml_with_grad(&x, &z, &p).unwrap().0).abs() < 1e-10);
    }

    #[test]
    fn fitting_beats_every_start() {
        let mut r = rng::stream(5, 0);
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let y: Vec<f64> = x.iter().map(|v| (6.0 * v[0]).sin()).collect();
        let opts = FitOptions::default();
        let fitted = fit_hyperparameters(&x, &y, &opts, None, &mut r).unwrap();
        let default = GpModel::from_hyperparameters(x.clone(), y.clone(), &GpHyperparameters::default_for(1)).unwrap();
        assert!(fitted.log_marginal_likelihood() >= default.log_marginal_likelihood());
    }

    #[test]
    fn constant_targets_fit_a_flat_mean() {
        let mut r = rng::stream(6, 0);
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0, (i * 3 % 8) as f64 / 7.0]).collect();
        let y = vec![-25.0; 8];
        let m = fit_hyperparameters(&x, &y, &FitOptions::default(), None, &mut r).unwrap();
        for p in [[0.5, 0.5], [0.05, 0.95], [0.3, 0.1]] {
            assert!((m.posterior(&p).0 + 25.0).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicated_inconsistent_points_force_noise() {
        let mut r = rng::stream(7, 0);
        let x = vec![vec![0.2], vec![0.2], vec![0.8], vec![0.5]];
        let y = vec![1.0, 2.0, 0.0, 0.5];
        let m = fit_hyperparameters(&x, &y, &FitOptions::default(), None, &mut r).unwrap();
        assert!(m.noise_variance() > NOISE_FLOOR * 10.0);
    }

    #[test]
    fn rejects_too_few_points() {
        let mut r = rng::stream(8, 0);
        assert!(fit_hyperparameters(&[vec![0.1]], &[1.0], &FitOptions::default(), None, &mut r).is_err());
    }
}
