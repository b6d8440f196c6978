mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use todp_core::bo::{GpModel, Matern52};

fn random_case(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64, f64) {
    let dim = rng.random_range(1..=4);
    let m = rng.random_range(1..=5);
    let xs: Vec<Vec<f64>> = (0..m).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let ys: Vec<f64> = (0..m).map(|_| rng.random_range(-40.0..-10.0)).collect();
    let ls: Vec<f64> = (0..dim).map(|_| rng.random_range(0.1..2.0)).collect();
    let s2 = rng.random_range(0.1..5.0);
    let noise = 10f64.powf(rng.random_range(-6.0..-1.0));
    (xs, ys, ls, s2, noise)
}

#[test]
fn posterior_matches_explicit_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..400 {
        let (xs, ys, ls, s2, noise) = random_case(&mut rng);
        let standardize = case % 2 == 0;
        let model = GpModel::new(xs.clone(), ys.clone(), Matern52::new(s2, ls.clone()), noise, standardize).unwrap();
        for _ in 0..5 {
            let x: Vec<f64> = (0..ls.len()).map(|_| rng.random_range(-0.2..1.2)).collect();
            let (mu, var) = model.posterior(&x);
            let (mu_ref, var_ref) = common::gp_posterior_by_inverse(&xs, &ys, &ls, s2, noise, standardize, &x);
            assert!((mu - mu_ref).abs() <= 1e-8 * mu_ref.abs().max(1.0), "case {case}: mean {mu} vs {mu_ref}");
            assert!((var - var_ref.max(0.0)).abs() <= 1e-8 * s2.max(1.0), "case {case}: var {var} vs {var_ref}");
        }
    }
}

#[test]
fn kernel_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let dim = rng.random_range(1..=6);
        let a: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let ls: Vec<f64> = (0..dim).map(|_| rng.random_range(0.05..3.0)).collect();
        let k = Matern52::new(1.7, ls.clone());
        assert!((k.eval(&a, &b) - common::matern52(&a, &b, &ls, 1.7)).abs() < 1e-14);
    }
}

#[test]
fn interpolates_at_noise_floor() {
    let xs = vec![vec![0.1, 0.2], vec![0.5, 0.9], vec![0.8, 0.3]];
    let ys = vec![-3.0, -1.0, -2.5];
    let model = GpModel::new(xs.clone(), ys.clone(), Matern52::isotropic(2, 0.4, 1.0), 1e-8, true).unwrap();
    for (x, y) in xs.iter().zip(&ys) {
        let (mu, var) = model.posterior(x);
        assert!((mu - y).abs() < 1e-6, "{mu} vs {y}");
        assert!(var < 1e-6);
    }
}

