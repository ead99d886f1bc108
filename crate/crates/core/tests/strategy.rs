mod common;

use eqdrift::factorization::{cholesky, sym_sqrt, CovMatrix, VolMatrix};
use eqdrift::strategy::{brownian_exposures, pi_star, pi_star_fully_invested};
use proptest::prelude::*;

use common::{constant_strategy_variance, gaussian_matrix, random_cov, rng};

const W: f64 = 1.0;
const MU: f64 = 0.2;
const R: f64 = 0.03;
const T: f64 = 1.0;

#[test]
fn equal_exposure_minimizes_variance_n2() {
    let kappa = (0.1 - R) / (MU - R);
    let mut best = (f64::INFINITY, 0.0);
    let step = 1e-4;
    let mut p1 = kappa / 2.0 - 1.0;
    while p1 <= kappa / 2.0 + 1.0 {
        let v = constant_strategy_variance(W, MU, R, T, &[p1, kappa - p1]);
        if v < best.0 {
            best = (v, p1);
        }
        p1 += step;
    }
    assert!((best.1 - kappa / 2.0).abs() <= step);
}

#[test]
fn equal_exposure_minimizes_variance_n3() {
    let kappa = 1.2;
    let step = 2e-3;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let span = 1.0;
    let k = (2.0 * span / step) as usize;
    for a in 0..=k {
        let p1 = kappa / 3.0 - span + a as f64 * step;
        for b in 0..=k {
            let p2 = kappa / 3.0 - span + b as f64 * step;
            let v = constant_strategy_variance(W, MU, R, T, &[p1, p2, kappa - p1 - p2]);
            if v < best.0 {
                best = (v, p1, p2);
            }
        }
    }
    assert!((best.1 - kappa / 3.0).abs() <= step);
    assert!((best.2 - kappa / 3.0).abs() <= step);
}

/// Grid minimizer of the terminal-wealth variance over fully-invested `pi = (x, 1 - x)`,
/// each candidate rescaled to a common expected terminal wealth (common sum of
/// driver exposures).
fn matched_mean_grid_minimizer(sigma: &VolMatrix) -> f64 {
    let s = sigma.matrix();
    let kappa_ref = 0.5;
    let mut best = (f64::INFINITY, f64::NAN);
    let steps = 50_000;
    for k in 0..=steps {
        let x = -2.0 + k as f64 * 1e-4;
        let pi = [x, 1.0 - x];
        let p = [
            pi[0] * s[(0, 0)] + pi[1] * s[(1, 0)],
            pi[0] * s[(0, 1)] + pi[1] * s[(1, 1)],
        ];
        let total = p[0] + p[1];
        if total <= 0.0 {
            continue;
        }
        let alpha = kappa_ref / total;
        let v = constant_strategy_variance(W, MU, R, T, &[alpha * p[0], alpha * p[1]]);
        if v < best.0 {
            best = (v, x);
        }
    }
    best.1
}

#[test]
fn fully_invested_matches_matched_mean_grid() {
    let c = CovMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
    for sigma in [sym_sqrt(&c).unwrap(), cholesky(&c).unwrap()] {
        let w = pi_star_fully_invested(&sigma, 1.0).unwrap();
        let x = matched_mean_grid_minimizer(&sigma);
        assert!(
            (w.weights()[0] - x).abs() <= 1e-3,
            "{} vs {x}",
            w.weights()[0]
        );
    }
}

#[test]
fn literal_fixed_lambda_grid_finds_minimum_variance_instead() {
    // Holding lambda fixed minimizes sum p_j^2 = pi' C pi: the minimum-variance
    // portfolio, which differs from the equal-exposure one unless sigma 1 is proportional to 1.
    let c = CovMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 5.0]]).unwrap();
    let sigma = sym_sqrt(&c).unwrap();
    let s = sigma.matrix();
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=50_000 {
        let x = -2.0 + k as f64 * 1e-4;
        let p = [
            x * s[(0, 0)] + (1.0 - x) * s[(1, 0)],
            x * s[(0, 1)] + (1.0 - x) * s[(1, 1)],
        ];
        let v = (2.0 * 0.1f64).exp() * (p[0] * p[0] + p[1] * p[1]).exp_m1();
        if v < best.0 {
            best = (v, x);
        }
    }
    assert!((best.1 - 0.6).abs() < 1e-3);
    let w = pi_star_fully_invested(&sigma, 1.0).unwrap();
    assert!((w.weights()[0] - best.1).abs() > 0.05);
}

#[test]
fn exposures_equal_for_random_sigma() {
    let mut g = rng(77);
    for n in 1..=30 {
        let sigma = VolMatrix::user(gaussian_matrix(n, &mut g)).unwrap();
        let kappa = 2.5;
        let w = pi_star(&sigma, kappa).unwrap();
        let p = brownian_exposures(&w, &sigma).unwrap();
        assert!(p.spread() <= 1e-10 * kappa / n as f64);
        assert!((p.sum() - kappa).abs() <= 1e-9 * kappa);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linearity_in_kappa(seed in 0u64..10_000, n in 1usize..10, kappa in 0.01f64..10.0, a in 0.1f64..10.0) {
        let sigma = sym_sqrt(&random_cov(n, seed)).unwrap();
        let base = pi_star(&sigma, kappa).unwrap();
        let scaled = pi_star(&sigma, a * kappa).unwrap();
        for (x, y) in base.weights().iter().zip(scaled.weights()) {
            prop_assert!((a * x - y).abs() <= 1e-14 * (a * x).abs().max(1e-300) * 4.0);
        }
    }

    #[test]
    fn fully_invested_scale_invariant(seed in 0u64..10_000, n in 1usize..10, c in 0.01f64..100.0) {
        let cov = random_cov(n, seed);
        let w1 = pi_star_fully_invested(&sym_sqrt(&cov).unwrap(), 1.0).unwrap();
        let w2 = pi_star_fully_invested(&sym_sqrt(&cov.scaled(c).unwrap()).unwrap(), 1.0).unwrap();
        for (x, y) in w1.weights().iter().zip(w2.weights()) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
        let k1 = w1.kappa().unwrap();
        let k2 = w2.kappa().unwrap();
        prop_assert!((k2 - k1 * c.sqrt()).abs() <= 1e-9 * k2.abs());
    }

    #[test]
    fn fully_invested_sums_to_exposure(seed in 0u64..10_000, n in 1usize..12, exposure in 0.1f64..2.0) {
        let sigma = cholesky(&random_cov(n, seed)).unwrap();
        let w = pi_star_fully_invested(&sigma, exposure).unwrap();
        prop_assert!((w.exposure() - exposure).abs() <= 1e-12);
        let p = brownian_exposures(&w, &sigma).unwrap();
        prop_assert!(p.spread() <= 1e-10 * w.kappa().unwrap().abs() / n as f64);
    }
}
