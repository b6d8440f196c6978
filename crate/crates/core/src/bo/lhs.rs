//! Latin hypercube designs on the unit cube.

use rand::seq::SliceRandom;
use rand::Rng;

/// `n` points in `[0, 1)^dims`; along every dimension each stratum
/// `[j/n, (j+1)/n)` holds exactly one point.
pub fn lhs<R: Rng + ?Sized>(n: usize, dims: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dims]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for d in 0..dims {
        strata.shuffle(rng);
        for (point, &s) in points.iter_mut().zip(&strata) {
            let lo = s as f64 / n as f64;
            let hi = (s + 1) as f64 / n as f64;
            let v = (s as f64 + rng.random::<f64>()) / n as f64;
            point[d] = if v >= hi { hi.next_down() } else { v.max(lo) };
        }
    }
    points
}
