//! Monte Carlo for the equal-drift market and closed-form laws of the optimal wealth.
//!
//! Paths are sampled from the exact lognormal transition, so there is no
//! discretization bias. Each path draws from its own ChaCha stream selected by
//! the path index, which makes results independent of how paths are split
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::strategy::WeightVector;

/// Simulated prices together with the driver increments that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    times: Vec<f64>,
    n_assets: usize,
    n_paths: usize,
    /// `[path][step 0..=steps][asset]`
    prices: Vec<f64>,
    /// `[path][step 0..steps][driver]`, each `N(0, dt)`
    increments: Vec<f64>,
    seed: u64,
}

impl PathSet {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Prices of every asset at grid point `step` (0 is the initial time).
    pub fn prices(&self, path: usize, step: usize) -> &[f64] {
        let n = self.n_assets;
        let start = (path * (self.steps() + 1) + step) * n;
        &self.prices[start..start + n]
    }

    pub fn terminal_prices(&self, path: usize) -> &[f64] {
        self.prices(path, self.steps())
    }

    /// Brownian increments over `[t_step, t_{step+1}]`.
    pub fn increments(&self, path: usize, step: usize) -> &[f64] {
        let n = self.n_assets;
        let start = (path * self.steps() + step) * n;
        &self.increments[start..start + n]
    }
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

pub fn simulate_paths(
    params: &ModelParams,
    horizon: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathSet> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if steps == 0 || n_paths == 0 {
        return Err(Error::InvalidParameter(
            "steps and n_paths must be positive".into(),
        ));
    }
    let n = params.n_assets();
    let dt = horizon / steps as f64;
    let sqrt_dt = dt.sqrt();
    let sigma = params.sigma().matrix();
    let excess = params.excess_drift();
    // per-step log drift: (r - |sigma_i|^2 / 2) dt + (mu - r) rowsum_i dt
    let log_drift: Vec<f64> = (0..n)
        .map(|i| {
            let row = sigma.row(i);
            let half_var = 0.5 * row.iter().map(|s| s * s).sum::<f64>();
            let rowsum: f64 = row.iter().sum();
            (params.r() - half_var + excess * rowsum) * dt
        })
        .collect();
    let log_s0: Vec<f64> = params.s0().iter().map(|s| s.ln()).collect();

    let mut prices = vec![0.0; n_paths * (steps + 1) * n];
    let mut increments = vec![0.0; n_paths * steps * n];
    prices
        .par_chunks_mut((steps + 1) * n)
        .zip(increments.par_chunks_mut(steps * n))
        .enumerate()
        .for_each(|(path, (px, inc))| {
            let mut rng = path_rng(seed, path);
            let mut log_s = log_s0.clone();
            px[..n].copy_from_slice(params.s0());
            for step in 0..steps {
                let db = &mut inc[step * n..(step + 1) * n];
                for v in db.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v = z * sqrt_dt;
                }
                let out = &mut px[(step + 1) * n..(step + 2) * n];
                for i in 0..n {
                    let shock: f64 = (0..n).map(|j| sigma[(i, j)] * db[j]).sum();
                    log_s[i] += log_drift[i] + shock;
                    out[i] = log_s[i].exp();
                }
            }
        });

    let times = (0..=steps)
        .map(|k| if k == steps { horizon } else { k as f64 * dt })
        .collect();
    Ok(PathSet {
        times,
        n_assets: n,
        n_paths,
        prices,
        increments,
        seed,
    })
}

/// Source of portfolio weights, queried once per simulation step.
pub trait Policy {
    fn weights_at(&self, step: usize) -> Vec<f64>;
}

impl Policy for WeightVector {
    fn weights_at(&self, _step: usize) -> Vec<f64> {
        self.weights().to_vec()
    }
}

/// One weight vector per step.
#[derive(Debug, Clone)]
pub struct StepSchedule(pub Vec<WeightVector>);

impl Policy for StepSchedule {
    fn weights_at(&self, step: usize) -> Vec<f64> {
        self.0[step].weights().to_vec()
    }
}

impl<F: Fn(usize) -> Vec<f64>> Policy for F {
    fn weights_at(&self, step: usize) -> Vec<f64> {
        self(step)
    }
}

/// Terminal wealth per path under a self-financing strategy.
///
/// Uses the exponential form of the wealth equation with driver exposures
/// held constant within each step, so every wealth is strictly positive.
pub fn replay_wealth<P: Policy + ?Sized>(
    paths: &PathSet,
    policy: &P,
    params: &ModelParams,
    w0: f64,
) -> Result<Vec<f64>> {
    if !(w0 > 0.0 && w0.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "initial wealth must be positive, got {w0}"
        )));
    }
    let n = paths.n_assets();
    if params.n_assets() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: params.n_assets(),
        });
    }
    let steps = paths.steps();
    let sigma = params.sigma().matrix();
    let excess = params.excess_drift();
    let mut exposures = Vec::with_capacity(steps);
    let mut drifts = Vec::with_capacity(steps);
    for step in 0..steps {
        let pi = policy.weights_at(step);
        if pi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: pi.len(),
            });
        }
        let p: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| pi[i] * sigma[(i, j)]).sum())
            .collect();
        let dt = paths.times[step + 1] - paths.times[step];
        let drift: f64 = p.iter().map(|pj| pj * excess - 0.5 * pj * pj).sum::<f64>() * dt;
        exposures.push(p);
        drifts.push(drift);
    }
    let rt = params.r() * paths.horizon();
    let wealth = (0..paths.n_paths())
        .into_par_iter()
        .map(|path| {
            let mut log_growth = 0.0;
            for step in 0..steps {
                let db = paths.increments(path, step);
                let noise: f64 = exposures[step].iter().zip(db).map(|(p, b)| p * b).sum();
                log_growth += drifts[step] + noise;
            }
            w0 * (rt + log_growth).exp()
        })
        .collect();
    Ok(wealth)
}

/// Lognormal law of the optimal terminal wealth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WealthLaw {
    pub w: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub n: usize,
    pub t: f64,
}

impl WealthLaw {
    pub fn new(w: f64, lambda: f64, kappa: f64, n: usize, t: f64) -> Result<Self> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial wealth must be positive, got {w}"
            )));
        }
        if !(kappa.is_finite() && lambda.is_finite()) {
            return Err(Error::NonFinite);
        }
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be non-negative, got {t}"
            )));
        }
        Ok(Self {
            w,
            lambda,
            kappa,
            n,
            t,
        })
    }

    /// Derives `kappa = (lambda - r) / (mu - r)`; requires `mu > r`.
    pub fn from_rates(w: f64, lambda: f64, mu: f64, r: f64, n: usize, t: f64) -> Result<Self> {
        if !(mu > r) {
            return Err(Error::InvalidParameter(format!(
                "mu={mu} must exceed r={r}"
            )));
        }
        Self::new(w, lambda, (lambda - r) / (mu - r), n, t)
    }

    pub fn log_mean(&self) -> f64 {
        self.w.ln() + (self.lambda - self.kappa * self.kappa / (2.0 * self.n as f64)) * self.t
    }

    pub fn log_sd(&self) -> f64 {
        self.kappa.abs() * (self.t / self.n as f64).sqrt()
    }
}

/// `(w e^{lambda t}, w^2 e^{2 lambda t} (e^{kappa^2 t / n} - 1))`.
pub fn optimal_wealth_moments(law: &WealthLaw) -> (f64, f64) {
    let mean = law.w * (law.lambda * law.t).exp();
    let var = law.w
        * law.w
        * (2.0 * law.lambda * law.t).exp()
        * (law.kappa * law.kappa * law.t / law.n as f64).exp_m1();
    (mean, var)
}

pub fn optimal_wealth_density(law: &WealthLaw, grid: &[f64]) -> Result<Vec<f64>> {
    if let Some((index, &value)) = grid.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(Error::NonPositiveGridPoint { index, value });
    }
    let m = law.log_mean();
    let s = law.log_sd();
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(
            "wealth law is degenerate (zero log-sd)".into(),
        ));
    }
    let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&x| {
            let z = (x.ln() - m) / s;
            norm / x * (-0.5 * z * z).exp()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::VolMatrix;
    use nalgebra::DMatrix;

    fn params(sigma: DMatrix<f64>, mu: f64, r: f64) -> ModelParams {
        ModelParams::with_unit_prices(VolMatrix::user(sigma).unwrap(), mu, r).unwrap()
    }

    #[test]
    fn near_zero_vol_is_bond_like() {
        let p = params(DMatrix::identity(3, 3) * 1e-12, 0.2, 0.03);
        let ps = simulate_paths(&p, 2.0, 10, 5, 1).unwrap();
        for path in 0..5 {
            for &s in ps.terminal_prices(path) {
                assert!((s - (0.03f64 * 2.0).exp()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let p = params(
            DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.1, 0.3]),
            0.2,
            0.03,
        );
        let a = simulate_paths(&p, 1.0, 4, 50, 42).unwrap();
        let b = simulate_paths(&p, 1.0, 4, 50, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_paths(&p, 1.0, 4, 50, 43).unwrap();
        assert_ne!(a.prices, c.prices);
    }

    #[test]
    fn all_cash_earns_risk_free() {
        let p = params(
            DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.1, 0.3]),
            0.2,
            0.03,
        );
        let ps = simulate_paths(&p, 1.5, 3, 20, 9).unwrap();
        let cash = WeightVector::new(vec![0.0, 0.0]).unwrap();
        let w = replay_wealth(&ps, &cash, &p, 2.0).unwrap();
        for v in w {
            assert_eq!(v, 2.0 * (0.03f64 * 1.5).exp());
        }
    }

    #[test]
    fn replay_checks_dimensions() {
        let p = params(DMatrix::identity(2, 2) * 0.2, 0.2, 0.03);
        let ps = simulate_paths(&p, 1.0, 2, 3, 0).unwrap();
        let bad = WeightVector::new(vec![0.5; 3]).unwrap();
        assert!(matches!(
            replay_wealth(&ps, &bad, &p, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        let closure = |step: usize| vec![0.1 * step as f64, 0.2];
        assert!(replay_wealth(&ps, &closure, &p, 1.0).is_ok());
    }

    #[test]
    fn moments_closed_form() {
        let law = WealthLaw::new(1.0, 0.1, 1.0, 1, 0.0).unwrap();
        assert_eq!(optimal_wealth_moments(&law), (1.0, 0.0));
        let law = WealthLaw::new(1.0, 0.1, 1.0, 1, 1.0).unwrap();
        let (m, v) = optimal_wealth_moments(&law);
        assert!((m - 0.1f64.exp()).abs() < 1e-15);
        assert!((v - 0.2f64.exp() * (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn variance_decreases_in_n() {
        let mut prev = f64::INFINITY;
        for n in [1, 2, 5, 10, 25, 100, 1000] {
            let (_, v) = optimal_wealth_moments(
                &WealthLaw::from_rates(1.0, 0.1, 0.2, 0.03, n, 1.0).unwrap(),
            );
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn density_at_mode() {
        let law = WealthLaw::from_rates(1.0, 0.1, 0.2, 0.03, 5, 1.0).unwrap();
        let (m, s) = (law.log_mean(), law.log_sd());
        let mode = (m - s * s).exp();
        let d = optimal_wealth_density(&law, &[mode]).unwrap()[0];
        let analytic = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt()) * (-m + 0.5 * s * s).exp();
        assert!((d - analytic).abs() < 1e-12);
    }

    #[test]
    fn density_rejects_non_positive_grid() {
        let law = WealthLaw::from_rates(1.0, 0.1, 0.2, 0.03, 5, 1.0).unwrap();
        assert_eq!(
            optimal_wealth_density(&law, &[1.0, 0.0]),
            Err(Error::NonPositiveGridPoint {
                index: 1,
                value: 0.0
            })
        );
    }

    #[test]
    fn density_integrates_to_one() {
        // [1e-4, 20] holds 99.9% of the mass only while the log-sd stays below ~1
        for (kappa, n) in [(0.25, 1), (1.0, 1), (1.5, 5), (2.0, 4), (2.0, 25)] {
            let law = WealthLaw::new(1.0, 0.1, kappa, n, 1.0).unwrap();
            let m = 200_000;
            let (a, b) = (1e-4, 20.0);
            let h = (b - a) / m as f64;
            let grid: Vec<f64> = (0..=m).map(|k| a + k as f64 * h).collect();
            let d = optimal_wealth_density(&law, &grid).unwrap();
            let integral: f64 = d.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).sum();
            assert!(integral >= 0.999, "kappa {kappa}: {integral}");
        }
    }
}
