//! Rolling-sample out-of-sample backtest of the equal-driver-exposure strategy
//! against the 1/n benchmark.
//!
//! Every `reestimate_every` rows the covariance is estimated from the trailing
//! `window_days` rows (minus any exclusion windows), factored, and turned into
//! fully-invested weights. Those weights are held fixed, reset daily, for the
//! following block of days. A day's return only ever depends on rows strictly
//! before the block it belongs to.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{black_monday_week, DateRange, ReturnPanel, TradingDate};
use crate::error::{Error, Result};
use crate::factorization::{
    cholesky, procrustes_rotate, sym_sqrt, CovMatrix, TargetMatrix, VolMatrix,
};
use crate::model::TRADING_DAYS_PER_YEAR;
use crate::stats::{jobson_korkie_memmel, sample_sd, sharpe, JkTestResult, SharpeResult};
use crate::strategy::{one_over_n, pi_star_fully_invested, WeightVector};

#[derive(Debug, Clone, PartialEq)]
pub enum Factorization {
    Cholesky,
    SymSqrt,
    /// Cholesky factor rotated toward the target in the least-squares sense.
    RotateToTarget(TargetMatrix),
}

impl Factorization {
    pub fn factor(&self, c: &CovMatrix) -> Result<VolMatrix> {
        match self {
            Factorization::Cholesky => cholesky(c),
            Factorization::SymSqrt => sym_sqrt(c),
            Factorization::RotateToTarget(t) => procrustes_rotate(&cholesky(c)?, t).map(|(v, _)| v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub window_days: usize,
    pub reestimate_every: usize,
    pub factorization: Factorization,
    pub exposure: f64,
    pub rf_annual: f64,
    /// Rows in these ranges are left out of covariance estimation but still
    /// count as out-of-sample return days.
    pub exclusion_windows: Vec<DateRange>,
    /// Diagonal repair `C + delta * mean(diag C) * I`; `None` turns it off.
    pub shrinkage: Option<f64>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window_days: 1260,
            reestimate_every: 20,
            factorization: Factorization::SymSqrt,
            exposure: 1.0,
            rf_annual: 0.03,
            exclusion_windows: vec![black_monday_week()],
            shrinkage: None,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reestimate_every == 0 {
            return Err(Error::InvalidParameter(
                "reestimate_every must be positive".into(),
            ));
        }
        if self.window_days <= self.reestimate_every {
            return Err(Error::InvalidParameter(format!(
                "window_days ({}) must exceed reestimate_every ({})",
                self.window_days, self.reestimate_every
            )));
        }
        if !self.exposure.is_finite() || self.exposure == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "bad exposure {}",
                self.exposure
            )));
        }
        if !self.rf_annual.is_finite() {
            return Err(Error::NonFinite);
        }
        if let Some(d) = self.shrinkage {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad shrinkage {d}")));
            }
        }
        Ok(())
    }

    pub fn rf_daily(&self) -> f64 {
        self.rf_annual / TRADING_DAYS_PER_YEAR
    }

    fn is_excluded(&self, d: TradingDate) -> bool {
        self.exclusion_windows.iter().any(|w| w.contains(d))
    }
}

/// Unbiased sample covariance (divisor `m - 1`) of the given panel rows.
pub fn estimate_covariance(
    panel: &ReturnPanel,
    rows: &[usize],
    shrinkage: Option<f64>,
) -> Result<CovMatrix> {
    let n = panel.n_assets();
    let m = rows.len();
    if m < n + 1 {
        return Err(Error::InsufficientObservations {
            needed: n + 1,
            available: m,
        });
    }
    for &t in rows {
        panel.check_row_complete(t)?;
    }
    let mut means = vec![0.0; n];
    for &t in rows {
        for (acc, x) in means.iter_mut().zip(panel.row(t)) {
            *acc += x;
        }
    }
    for v in &mut means {
        *v /= m as f64;
    }
    let mut c = DMatrix::<f64>::zeros(n, n);
    let mut dev = vec![0.0; n];
    for &t in rows {
        for ((d, x), mu) in dev.iter_mut().zip(panel.row(t)).zip(&means) {
            *d = x - mu;
        }
        for i in 0..n {
            for j in 0..=i {
                c[(i, j)] += dev[i] * dev[j];
            }
        }
    }
    let denom = (m - 1) as f64;
    for i in 0..n {
        for j in 0..=i {
            let v = c[(i, j)] / denom;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    match shrinkage {
        Some(delta) => CovMatrix::with_shrinkage(c, delta),
        None => CovMatrix::new(c),
    }
}

/// One re-estimation: the estimate, its factor, and the weights held until the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct Rebalance {
    /// Panel row of the first day these weights are applied to.
    pub start_row: usize,
    pub first_day: TradingDate,
    /// Last panel date that entered the estimate.
    pub estimation_end: TradingDate,
    pub observations: usize,
    pub covariance: CovMatrix,
    pub vol: VolMatrix,
    pub strategy: WeightVector,
    pub benchmark: WeightVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Performance {
    pub sharpe_strategy: SharpeResult,
    pub sharpe_benchmark: SharpeResult,
    /// Strategy first, so small `p_one_sided` rejects 1/n superiority.
    pub jk: JkTestResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub assets: Vec<String>,
    pub dates: Vec<TradingDate>,
    pub strategy_returns: Vec<f64>,
    pub benchmark_returns: Vec<f64>,
    pub rebalances: Vec<Rebalance>,
    pub rf_daily: f64,
    pub exposure: f64,
    /// Sharpe ratios and the test; an error when either series is degenerate.
    pub performance: Result<Performance>,
    pub terminal_wealth_ratio: f64,
    /// `sd(strategy returns) / sd(benchmark returns)`.
    pub volatility_ratio: f64,
}

impl BacktestReport {
    pub fn sharpe_strategy(&self) -> Option<f64> {
        self.performance
            .as_ref()
            .ok()
            .map(|p| p.sharpe_strategy.ratio)
    }

    pub fn sharpe_benchmark(&self) -> Option<f64> {
        self.performance
            .as_ref()
            .ok()
            .map(|p| p.sharpe_benchmark.ratio)
    }

    pub fn jk_z(&self) -> Option<f64> {
        self.performance.as_ref().ok().map(|p| p.jk.z)
    }

    pub fn jk_p(&self) -> Option<f64> {
        self.performance.as_ref().ok().map(|p| p.jk.p_one_sided)
    }

    /// Rebalance in force on out-of-sample day `k`.
    pub fn rebalance_for_day(&self, k: usize) -> &Rebalance {
        let first_row = self.rebalances[0].start_row;
        let row = first_row + k;
        let idx = self.rebalances.partition_point(|r| r.start_row <= row) - 1;
        &self.rebalances[idx]
    }
}

fn portfolio_return(weights: &[f64], exposure: f64, returns: &[f64], rf_daily: f64) -> f64 {
    let risky: f64 = weights.iter().zip(returns).map(|(w, r)| w * r).sum();
    risky + (1.0 - exposure) * rf_daily
}

fn rebalance_at(
    panel: &ReturnPanel,
    config: &BacktestConfig,
    start_row: usize,
) -> Result<Rebalance> {
    let first_day = panel.dates()[start_row];
    let rows: Vec<usize> = (start_row - config.window_days..start_row)
        .filter(|&t| !config.is_excluded(panel.dates()[t]))
        .collect();
    let singular = |e: Error| match e {
        Error::NotPositiveDefinite(_) | Error::SingularMatrix(_) if config.shrinkage.is_none() => {
            Error::SingularCovariance { date: first_day }
        }
        other => other,
    };
    let covariance = estimate_covariance(panel, &rows, config.shrinkage).map_err(singular)?;
    let vol = config.factorization.factor(&covariance).map_err(singular)?;
    let strategy = pi_star_fully_invested(&vol, config.exposure)?;
    let benchmark = one_over_n(panel.n_assets(), config.exposure)?;
    Ok(Rebalance {
        start_row,
        first_day,
        estimation_end: panel.dates()[*rows.last().expect("window is non-empty")],
        observations: rows.len(),
        covariance,
        vol,
        strategy,
        benchmark,
    })
}

pub fn rolling_backtest(panel: &ReturnPanel, config: &BacktestConfig) -> Result<BacktestReport> {
    config.validate()?;
    let needed = config.window_days + config.reestimate_every;
    if panel.n_dates() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: panel.n_dates(),
        });
    }
    if let Factorization::RotateToTarget(t) = &config.factorization {
        if t.dim() != panel.n_assets() {
            return Err(Error::DimensionMismatch {
                expected: panel.n_assets(),
                found: t.dim(),
            });
        }
    }
    let starts: Vec<usize> = (config.window_days..panel.n_dates())
        .step_by(config.reestimate_every)
        .collect();
    // Collect in order so the reported error is the earliest one.
    let rebalances: Vec<Rebalance> = starts
        .par_iter()
        .map(|&s| rebalance_at(panel, config, s))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;

    let rf_daily = config.rf_daily();
    let mut dates = Vec::new();
    let mut strategy_returns = Vec::new();
    let mut benchmark_returns = Vec::new();
    for (k, reb) in rebalances.iter().enumerate() {
        let end = rebalances
            .get(k + 1)
            .map_or(panel.n_dates(), |r| r.start_row);
        for t in reb.start_row..end {
            panel.check_row_complete(t)?;
            let row = panel.row(t);
            dates.push(panel.dates()[t]);
            strategy_returns.push(portfolio_return(
                reb.strategy.weights(),
                reb.strategy.exposure(),
                row,
                rf_daily,
            ));
            benchmark_returns.push(portfolio_return(
                reb.benchmark.weights(),
                reb.benchmark.exposure(),
                row,
                rf_daily,
            ));
        }
    }

    let performance = performance(&strategy_returns, &benchmark_returns, rf_daily);
    let growth = |rs: &[f64]| rs.iter().map(|r| 1.0 + r).product::<f64>();
    let terminal_wealth_ratio = growth(&strategy_returns) / growth(&benchmark_returns);
    let volatility_ratio = sample_sd(&strategy_returns) / sample_sd(&benchmark_returns);
    Ok(BacktestReport {
        assets: panel.assets().to_vec(),
        dates,
        strategy_returns,
        benchmark_returns,
        rebalances,
        rf_daily,
        exposure: config.exposure,
        performance,
        terminal_wealth_ratio,
        volatility_ratio,
    })
}

fn performance(strategy: &[f64], benchmark: &[f64], rf_daily: f64) -> Result<Performance> {
    let sharpe_strategy = sharpe(strategy, rf_daily)?;
    let sharpe_benchmark = sharpe(benchmark, rf_daily)?;
    let xs: Vec<f64> = strategy.iter().map(|r| r - rf_daily).collect();
    let xb: Vec<f64> = benchmark.iter().map(|r| r - rf_daily).collect();
    let jk = jobson_korkie_memmel(&xs, &xb)?;
    Ok(Performance {
        sharpe_strategy,
        sharpe_benchmark,
        jk,
    })
}
