//! Out-of-sample Sharpe ratios and the Jobson–Korkie test with Memmel's
//! variance correction.
//!
//! All ratios are per observation (daily); nothing here annualizes.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::TRADING_DAYS_PER_YEAR;

const ZERO_SD: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpeResult {
    pub mean_excess: f64,
    pub sd_excess: f64,
    pub ratio: f64,
    pub n_obs: usize,
}

impl SharpeResult {
    pub fn annualized(&self) -> f64 {
        annualize(self.ratio)
    }
}

/// Scales a daily Sharpe ratio by `sqrt(252)`; for display only.
pub fn annualize(daily_ratio: f64) -> f64 {
    daily_ratio * TRADING_DAYS_PER_YEAR.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JkTestResult {
    pub z: f64,
    /// `P(Z > z)`.
    pub p_one_sided: f64,
    pub p_two_sided: f64,
    pub rho: f64,
    pub sharpe_1: f64,
    pub sharpe_2: f64,
}

/// Upper tail `P(Z > z)` of the standard normal.
pub fn normal_upper_tail(z: f64) -> f64 {
    Normal::standard().sf(z)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with divisor `n - 1`.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

fn sharpe_of_excess(excess: &[f64]) -> Result<SharpeResult> {
    if excess.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            available: excess.len(),
        });
    }
    if excess.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mean_excess = mean(excess);
    let sd_excess = sample_sd(excess);
    if !(sd_excess > ZERO_SD) {
        return Err(Error::ZeroVariance);
    }
    Ok(SharpeResult {
        mean_excess,
        sd_excess,
        ratio: mean_excess / sd_excess,
        n_obs: excess.len(),
    })
}

/// `mean(r - rf) / sd(r - rf)`.
pub fn sharpe(returns: &[f64], rf_daily: f64) -> Result<SharpeResult> {
    let excess: Vec<f64> = returns.iter().map(|r| r - rf_daily).collect();
    sharpe_of_excess(&excess)
}

/// Tests `H0: SR_1 <= SR_2` on paired excess-return series.
///
/// `z = (s1 - s2) / sqrt(theta)` with
/// `theta = (2 (1 - rho) + (s1^2 + s2^2 - 2 s1 s2 rho^2) / 2) / T`.
pub fn jobson_korkie_memmel(r1: &[f64], r2: &[f64]) -> Result<JkTestResult> {
    if r1.len() != r2.len() {
        return Err(Error::LengthMismatch {
            left: r1.len(),
            right: r2.len(),
        });
    }
    let t = r1.len();
    if t < 3 {
        return Err(Error::TooFewObservations {
            needed: 3,
            available: t,
        });
    }
    let a = sharpe_of_excess(r1)?;
    let b = sharpe_of_excess(r2)?;
    let (m1, m2) = (a.mean_excess, b.mean_excess);
    let cov: f64 = r1
        .iter()
        .zip(r2)
        .map(|(x, y)| (x - m1) * (y - m2))
        .sum::<f64>()
        / (t as f64 - 1.0);
    let rho = (cov / (a.sd_excess * b.sd_excess)).clamp(-1.0, 1.0);
    let (s1, s2) = (a.ratio, b.ratio);
    let cross = 2.0 * (s1 * s2) * (rho * rho);
    let theta = (2.0 * (1.0 - rho) + 0.5 * (s1 * s1 + s2 * s2 - cross)) / t as f64;
    let diff = s1 - s2;
    let z = if diff == 0.0 {
        0.0
    } else if theta > 0.0 {
        diff / theta.sqrt()
    } else {
        diff.signum() * f64::INFINITY
    };
    let p_one_sided = normal_upper_tail(z);
    let p_two_sided = (2.0 * normal_upper_tail(z.abs())).min(1.0);
    Ok(JkTestResult {
        z,
        p_one_sided,
        p_two_sided,
        rho,
        sharpe_1: s1,
        sharpe_2: s2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_sharpe() {
        let s = sharpe(&[0.01, 0.02, 0.03], 0.0).unwrap();
        assert!((s.mean_excess - 0.02).abs() < 1e-15);
        assert!((s.sd_excess - 0.01).abs() < 1e-15);
        assert!((s.ratio - 2.0).abs() < 1e-12);
        assert_eq!(s.n_obs, 3);
        assert!((s.ratio * s.sd_excess - s.mean_excess).abs() < 1e-12);
    }

    #[test]
    fn degenerate_series() {
        assert_eq!(sharpe(&[0.001; 10], 0.001), Err(Error::ZeroVariance));
        assert!(matches!(
            sharpe(&[0.01], 0.0),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn location_shift_with_rf() {
        let r = [0.01, -0.02, 0.015, 0.03, -0.005];
        let a = sharpe(&r, 0.001).unwrap();
        let shifted: Vec<f64> = r.iter().map(|x| x + 0.25).collect();
        let b = sharpe(&shifted, 0.251).unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-12);
    }

    #[test]
    fn jk_identical_series() {
        let r = [0.01, -0.02, 0.015, 0.03, -0.005];
        let t = jobson_korkie_memmel(&r, &r).unwrap();
        assert_eq!(t.z, 0.0);
        assert_eq!(t.p_one_sided, 0.5);
    }

    #[test]
    fn jk_antisymmetry() {
        let a = [0.01, -0.02, 0.015, 0.03, -0.005, 0.002];
        let b = [0.004, -0.01, 0.02, 0.01, -0.015, 0.001];
        let ab = jobson_korkie_memmel(&a, &b).unwrap();
        let ba = jobson_korkie_memmel(&b, &a).unwrap();
        assert_eq!(ab.z, -ba.z);
        assert!((ab.p_one_sided - (1.0 - ba.p_one_sided)).abs() < 1e-15);
        assert_eq!(ab.p_two_sided, ba.p_two_sided);
    }

    #[test]
    fn jk_errors() {
        assert!(matches!(
            jobson_korkie_memmel(&[0.1, 0.2, 0.3], &[0.1, 0.2]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            jobson_korkie_memmel(&[0.1, 0.2], &[0.1, 0.3]),
            Err(Error::TooFewObservations { .. })
        ));
        assert_eq!(
            jobson_korkie_memmel(&[0.1; 4], &[0.1, 0.2, 0.3, 0.4]),
            Err(Error::ZeroVariance)
        );
    }

    #[test]
    fn upper_tail_reference_points() {
        assert_eq!(normal_upper_tail(0.0), 0.5);
        assert!((normal_upper_tail(1.959963984540054) - 0.025).abs() < 1e-11);
        assert!((normal_upper_tail(-1.6448536269514722) - 0.95).abs() < 1e-11);
    }
}
