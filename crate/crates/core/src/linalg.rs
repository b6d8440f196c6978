//! Dense Cholesky factorisation for the small SPD systems the GP needs.

use crate::{Error, Result};

/// Lower-triangular Cholesky factor of an `n x n` SPD matrix, row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
    /// Diagonal jitter that had to be added on top of the input matrix.
    jitter: f64,
}

pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-6;

impl Cholesky {
    /// Factorises `a` as given. Fails if a pivot is not strictly positive.
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        Self::factor_with_jitter(a, n, 0.0)
    }

    /// Tries the plain factorisation first, then escalates diagonal jitter
    /// by decades from [`JITTER_START`] up to [`JITTER_MAX`].
    pub fn factor_escalating(a: &[f64], n: usize) -> Result<Self> {
        if let Ok(c) = Self::factor(a, n) {
            return Ok(c);
        }
        let mut jitter = JITTER_START;
        while jitter <= JITTER_MAX * 1.0001 {
            if let Ok(c) = Self::factor_with_jitter(a, n, jitter) {
                return Ok(c);
            }
            jitter *= 10.0;
        }
        Err(Error::Numerical(format!(
            "matrix of order {n} is not positive definite even with jitter {JITTER_MAX:e}"
        )))
    }

    fn factor_with_jitter(a: &[f64], n: usize, jitter: f64) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix storage does not match order");
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                if i == j {
                    sum += jitter;
                }
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::Numerical(format!(
                            "non-positive pivot {sum:e} at row {i}"
                        )));
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l, jitter })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor_entry(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.n + j]
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            let row = &self.l[i * n..i * n + i];
            for (k, lik) in row.iter().enumerate() {
                s -= lik * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>() * 2.0
    }

    /// Dense `A^{-1}`, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}
