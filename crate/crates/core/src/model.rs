//! Equal-drift Black–Scholes market: every Brownian driver carries the same
//! excess drift `mu - r`, so a stock's expected return is fixed by how much it
//! loads on the drivers.
//!
//! Rates are per year. Daily quantities use [`TRADING_DAYS_PER_YEAR`].

use crate::error::{Error, Result};
use crate::factorization::VolMatrix;

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    sigma: VolMatrix,
    mu: f64,
    r: f64,
    s0: Vec<f64>,
}

impl ModelParams {
    /// Requires `mu >= r >= 0` and strictly positive initial prices.
    pub fn new(sigma: VolMatrix, mu: f64, r: f64, s0: Vec<f64>) -> Result<Self> {
        if !(mu.is_finite() && r.is_finite()) {
            return Err(Error::NonFinite);
        }
        if r < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "risk-free rate must be >= 0, got {r}"
            )));
        }
        if mu < r {
            return Err(Error::InvalidParameter(format!(
                "drift mu={mu} must not be below r={r}"
            )));
        }
        if s0.len() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                found: s0.len(),
            });
        }
        if s0.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(
                "initial prices must be positive".into(),
            ));
        }
        Ok(Self { sigma, mu, r, s0 })
    }

    /// All initial prices set to one.
    pub fn with_unit_prices(sigma: VolMatrix, mu: f64, r: f64) -> Result<Self> {
        let n = sigma.dim();
        Self::new(sigma, mu, r, vec![1.0; n])
    }

    pub fn sigma(&self) -> &VolMatrix {
        &self.sigma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn s0(&self) -> &[f64] {
        &self.s0
    }

    pub fn n_assets(&self) -> usize {
        self.sigma.dim()
    }

    pub fn excess_drift(&self) -> f64 {
        self.mu - self.r
    }
}

/// Continuously compounded expected returns and market prices of risk.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnProfile {
    pub mu_c: Vec<f64>,
    pub nu: Vec<f64>,
    pub row_sums: Vec<f64>,
}

/// `mu_c_i = r + (mu - r) * sum_j sigma_ij` and
/// `nu_i = (mu - r) * sum_j sigma_ij / sqrt(C_ii)`.
pub fn expected_returns(params: &ModelParams) -> ReturnProfile {
    let row_sums = params.sigma.row_sums();
    let excess = params.excess_drift();
    let sigma = params.sigma.matrix();
    let mut mu_c = Vec::with_capacity(row_sums.len());
    let mut nu = Vec::with_capacity(row_sums.len());
    for (i, &rs) in row_sums.iter().enumerate() {
        let vol_i = sigma.row(i).norm();
        mu_c.push(params.r + excess * rs);
        nu.push(excess * rs / vol_i);
    }
    ReturnProfile { mu_c, nu, row_sums }
}
