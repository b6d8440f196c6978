//! Matern-5/2 kernel with per-dimension length-scales.

use serde::{Deserialize, Serialize};

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matern52 {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
}

impl Matern52 {
    pub fn new(signal_variance: f64, length_scales: Vec<f64>) -> Self {
        assert!(signal_variance > 0.0, "signal variance must be positive");
        assert!(length_scales.iter().all(|&l| l > 0.0), "length-scales must be positive");
        Self { signal_variance, length_scales }
    }

    pub fn isotropic(dim: usize, length_scale: f64, signal_variance: f64) -> Self {
        Self::new(signal_variance, vec![length_scale; dim])
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn scaled_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.dim());
        debug_assert_eq!(b.len(), self.dim());
        a.iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r = self.scaled_distance(a, b);
        let s = SQRT5 * r;
        self.signal_variance * (1.0 + s + s * s / 3.0) * (-s).exp()
    }

    /// `dk(a, b) / da`.
    pub fn grad_first(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let r = self.scaled_distance(a, b);
        let s = SQRT5 * r;
        let c = -(5.0 / 3.0) * self.signal_variance * (1.0 + s) * (-s).exp();
        a.iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((x, y), l)| c * (x - y) / (l * l))
            .collect()
    }

    /// Kernel value and its derivatives with respect to each log length-scale.
    pub(crate) fn eval_with_log_length_grad(&self, a: &[f64], b: &[f64], grad: &mut [f64]) -> f64 {
        let r = self.scaled_distance(a, b);
        let s = SQRT5 * r;
        let e = (-s).exp();
        let c = (5.0 / 3.0) * self.signal_variance * (1.0 + s) * e;
        for (((g, x), y), l) in grad.iter_mut().zip(a).zip(b).zip(&self.length_scales) {
            let d = (x - y) / l;
            *g = c * d * d;
        }
        self.signal_variance * (1.0 + s + s * s / 3.0) * e
    }
}

/// Free-function form of [`Matern52::eval`].
pub fn matern_kernel(a: &[f64], b: &[f64], params: &Matern52) -> f64 {
    params.eval(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_inputs_give_signal_variance() {
        let k = Matern52::new(2.5, vec![0.3, 0.7]);
        assert_eq!(k.eval(&[0.1, 0.2], &[0.1, 0.2]), 2.5);
    }

    #[test]
    fn unit_distance_value() {
        let k = Matern52::isotropic(1, 1.0, 1.0);
        let s5 = 5f64.sqrt();
        let expected = (1.0 + s5 + 5.0 / 3.0) * (-s5).exp();
        assert!((k.eval(&[0.0], &[1.0]) - expected).abs() < 1e-15);
        assert!((expected - 0.5240).abs() < 1e-4);
    }

    #[test]
    fn decays_and_is_symmetric() {
        let k = Matern52::new(1.0, vec![0.5, 2.0]);
        assert!(k.eval(&[0.0, 0.0], &[100.0, 100.0]) < 1e-50);
        assert_eq!(k.eval(&[0.1, 0.9], &[0.4, 0.2]), k.eval(&[0.4, 0.2], &[0.1, 0.9]));
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let k = Matern52::new(1.7, vec![0.4, 0.9, 0.25]);
        let a = [0.3, 0.6, 0.1];
        let b = [0.5, 0.2, 0.15];
        let g = k.grad_first(&a, &b);
        for d in 0..3 {
            let h = 1e-6;
            let mut ap = a;
            let mut am = a;
            ap[d] += h;
            am[d] -= h;
            let fd = (k.eval(&ap, &b) - k.eval(&am, &b)) / (2.0 * h);
            assert!((fd - g[d]).abs() < 1e-7, "dim {d}: {fd} vs {}", g[d]);
        }
        assert!(k.grad_first(&a, &a).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_scale_gradient_matches_finite_differences() {
        let k = Matern52::new(1.3, vec![0.4, 0.9]);
        let a = [0.3, 0.6];
        let b = [0.5, 0.2];
        let mut g = [0.0; 2];
        k.eval_with_log_length_grad(&a, &b, &mut g);
        for d in 0..2 {
            let h: f64 = 1e-6;
            let mut kp = k.clone();
            let mut km = k.clone();
            kp.length_scales[d] *= h.exp();
            km.length_scales[d] *= (-h).exp();
            let fd = (kp.eval(&a, &b) - km.eval(&a, &b)) / (2.0 * h);
            assert!((fd - g[d]).abs() < 1e-7);
        }
    }
}
