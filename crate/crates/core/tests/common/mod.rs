#![allow(dead_code)]

use eqdrift::data::ReturnPanel;
use eqdrift::factorization::{sym_sqrt, CovMatrix, VolMatrix};
use eqdrift::model::ModelParams;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng))
}

/// Well-conditioned SPD matrix `A A' / n + 0.05 I`.
pub fn random_cov(n: usize, seed: u64) -> CovMatrix {
    let mut r = rng(seed);
    let a = gaussian_matrix(n, &mut r);
    let c = &a * a.transpose() / n as f64 + DMatrix::<f64>::identity(n, n) * 0.05;
    CovMatrix::new(c).unwrap()
}

/// Annual covariance with vols in [15%, 45%] and one-factor-plus-noise correlations.
pub fn random_market_cov(n: usize, rng: &mut ChaCha8Rng) -> CovMatrix {
    let vols: Vec<f64> = (0..n).map(|_| rng.random_range(0.15..0.45)).collect();
    let betas: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..0.9)).collect();
    let c = DMatrix::from_fn(n, n, |i, j| {
        let corr = if i == j { 1.0 } else { betas[i] * betas[j] };
        corr * vols[i] * vols[j]
    });
    CovMatrix::new(c).unwrap()
}

/// Market whose true volatility matrix is the symmetric square root of a random covariance.
pub fn random_market(n: usize, mu: f64, r: f64, seed: u64) -> ModelParams {
    let mut g = rng(seed);
    let c = random_market_cov(n, &mut g);
    ModelParams::with_unit_prices(sym_sqrt(&c).unwrap(), mu, r).unwrap()
}

pub fn vol(rows: &[Vec<f64>]) -> VolMatrix {
    VolMatrix::from_rows(rows).unwrap()
}

pub fn column(panel: &ReturnPanel, a: usize) -> Vec<f64> {
    (0..panel.n_dates()).map(|t| panel.row(t)[a]).collect()
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// All 2x2 orthogonal matrices on an angle grid: rotations then reflections.
pub fn orthogonal_2x2_grid(step: f64) -> impl Iterator<Item = DMatrix<f64>> {
    let count = (2.0 * std::f64::consts::PI / step).ceil() as usize;
    (0..count).flat_map(move |k| {
        let th = k as f64 * step;
        let (s, c) = th.sin_cos();
        [
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
            DMatrix::from_row_slice(2, 2, &[c, s, s, -c]),
        ]
    })
}

/// Brute-force `min ||L Q - T||_F` over the 2x2 orthogonal angle grid.
pub fn grid_procrustes_min(l: &DMatrix<f64>, t: &DMatrix<f64>, step: f64) -> f64 {
    orthogonal_2x2_grid(step)
        .map(|q| (l * q - t).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Closed-form terminal-wealth variance of a constant strategy with driver exposures `p`.
pub fn constant_strategy_variance(w: f64, mu: f64, r: f64, t: f64, p: &[f64]) -> f64 {
    let s: f64 = p.iter().sum();
    let ss: f64 = p.iter().map(|x| x * x).sum();
    let growth = (mu - r) * s + r;
    w * w * (2.0 * growth * t).exp() * (ss * t).exp_m1()
}
