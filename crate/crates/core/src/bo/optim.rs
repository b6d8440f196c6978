//! Spectral projected gradient ascent on a box.

/// Outcome of a local search: the best point seen and its value.
#[derive(Debug, Clone)]
pub struct LocalOptimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SpgOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub memory: usize,
}

impl Default for SpgOptions {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-6, memory: 10 }
    }
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Maximises `f` over `[lower, upper]`. `f` returns the value and gradient,
/// or `None` where it cannot be evaluated. The returned point is never worse
/// than the (projected) start.
pub fn maximize_box<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: SpgOptions) -> Option<LocalOptimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    const GAMMA: f64 = 1e-4;
    const STEP_MIN: f64 = 1e-10;
    const STEP_MAX: f64 = 1e10;

    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    let mut best = LocalOptimum { x: x.clone(), value: fx, evaluations };
    let mut history = vec![fx];

    // Work with the minimisation of -f.
    let pg_norm = |x: &[f64], g: &[f64]| -> f64 {
        x.iter()
            .zip(g)
            .enumerate()
            .map(|(i, (xi, gi))| ((xi + gi).clamp(lower[i], upper[i]) - xi).abs())
            .fold(0.0, f64::max)
    };
    let mut step = {
        let p = pg_norm(&x, &g);
        if p > 0.0 { (1.0 / p).clamp(STEP_MIN, STEP_MAX) } else { 1.0 }
    };

    for _ in 0..opts.max_iter {
        if pg_norm(&x, &g) < opts.tol {
            break;
        }
        let d: Vec<f64> = (0..n)
            .map(|i| (x[i] + step * g[i]).clamp(lower[i], upper[i]) - x[i])
            .collect();
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope <= 0.0 {
            break;
        }
        let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = (0..n).map(|i| x[i] + alpha * d[i]).collect();
            evaluations += 1;
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft >= reference + GAMMA * alpha * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else { break };
        let mut sty = 0.0;
        let mut sts = 0.0;
        for i in 0..n {
            let s = x_new[i] - x[i];
            // Gradient of -f changes by -(g_new - g).
            let y = -(g_new[i] - g[i]);
            sty += s * y;
            sts += s * s;
        }
        step = if sty <= 0.0 { STEP_MAX } else { (sts / sty).clamp(STEP_MIN, STEP_MAX) };
        x = x_new;
        fx = f_new;
        g = g_new;
        if fx > best.value {
            best.x.clone_from(&x);
            best.value = fx;
        }
        history.push(fx);
        if history.len() > opts.memory {
            history.remove(0);
        }
    }
    best.evaluations = evaluations;
    Some(best)
}
