//! The variance-minimizing strategy of the equal-drift model and the 1/n benchmark.
//!
//! The optimal weights put the same exposure `kappa / n` on every Brownian
//! driver, `sigma' pi = (kappa / n) 1`, where `kappa = (lambda - r) / (mu - r)`.
//! Fixing the total risky exposure `sum_i pi_i` pins down `kappa`, so the
//! fully-invested variant needs only the volatility matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::factorization::VolMatrix;

/// Relative tolerance on the equal-exposure residual `||sigma' pi - (kappa/n) 1||_inf`.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// `|1' x| <= DEGENERATE_TOL * ||x||_1` means no finite kappa reaches the exposure.
const DEGENERATE_TOL: f64 = 1e-12;

/// Fractions of wealth per asset. Negative entries are short positions.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    /// `(lambda - r) / (mu - r)`; `None` for strategies that have no such ratio (1/n).
    kappa: Option<f64>,
    exposure: f64,
}

impl WeightVector {
    /// Arbitrary weights with no associated kappa.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::build(weights, None)
    }

    fn build(weights: Vec<f64>, kappa: Option<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite);
        }
        let exposure = weights.iter().sum();
        Ok(Self {
            weights,
            kappa,
            exposure,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    /// Total risky exposure `sum_i pi_i`.
    pub fn exposure(&self) -> f64 {
        self.exposure
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Advisory flags; never alters the weights.
    pub fn flags(&self) -> WeightFlags {
        WeightFlags {
            large_positions: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| w.abs() > 1.0)
                .map(|(i, _)| i)
                .collect(),
            negative_exposure: self.exposure < 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WeightFlags {
    /// Assets with `|pi_i| > 1`.
    pub large_positions: Vec<usize>,
    pub negative_exposure: bool,
}

/// Portfolio loadings on the Brownian drivers, `p_j = sum_i pi_i sigma_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureVector {
    pub p: Vec<f64>,
}

impl ExposureVector {
    pub fn spread(&self) -> f64 {
        let max = self.p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.p.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn sum(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.p.iter().map(|x| x * x).sum()
    }
}

/// Solves `sigma' x = 1`.
fn unit_driver_solution(sigma: &VolMatrix) -> Result<DVector<f64>> {
    let n = sigma.dim();
    let st = sigma.matrix().transpose();
    let ones = DVector::from_element(n, 1.0);
    let mut x = if sigma.is_lower_triangular() {
        st.solve_upper_triangular(&ones)
            .ok_or_else(|| Error::SingularMatrix("zero on the diagonal".into()))?
    } else {
        st.clone()
            .lu()
            .solve(&ones)
            .ok_or_else(|| Error::SingularMatrix("LU solve failed".into()))?
    };
    // one step of iterative refinement
    let resid = &ones - &st * &x;
    if let Some(dx) = st.clone().lu().solve(&resid) {
        x += dx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix("non-finite solution".into()));
    }
    Ok(x)
}

fn check_residual(st: &DMatrix<f64>, pi: &[f64], kappa: f64) -> Result<()> {
    let n = pi.len();
    let target = kappa / n as f64;
    let p = st * DVector::from_column_slice(pi);
    let worst = p.iter().map(|v| (v - target).abs()).fold(0.0, f64::max);
    if worst > RESIDUAL_TOL * kappa.abs() {
        return Err(Error::SingularMatrix(format!(
            "equal-exposure residual {worst:e} exceeds tolerance"
        )));
    }
    Ok(())
}

/// Weights solving `sigma' pi = (kappa / n) 1`.
pub fn pi_star(sigma: &VolMatrix, kappa: f64) -> Result<WeightVector> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    let x = unit_driver_solution(sigma)?;
    let scale = kappa / sigma.dim() as f64;
    let weights: Vec<f64> = x.iter().map(|v| v * scale).collect();
    check_residual(&sigma.matrix().transpose(), &weights, kappa)?;
    WeightVector::build(weights, Some(kappa))
}

/// Equal-driver-exposure weights scaled so that `sum_i pi_i = exposure`.
/// The implied kappa is reported on the result.
pub fn pi_star_fully_invested(sigma: &VolMatrix, exposure: f64) -> Result<WeightVector> {
    if !exposure.is_finite() || exposure == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "exposure must be finite and non-zero, got {exposure}"
        )));
    }
    let x = unit_driver_solution(sigma)?;
    let total: f64 = x.iter().sum();
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    if total.abs() <= DEGENERATE_TOL * l1 {
        return Err(Error::DegenerateExposure);
    }
    let n = sigma.dim() as f64;
    let kappa = n * exposure / total;
    let scale = exposure / total;
    let weights: Vec<f64> = x.iter().map(|v| v * scale).collect();
    check_residual(&sigma.matrix().transpose(), &weights, kappa)?;
    WeightVector::build(weights, Some(kappa))
}

/// Equal capital weight `exposure / n` per asset.
pub fn one_over_n(n: usize, exposure: f64) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    WeightVector::build(vec![exposure / n as f64; n], None)
}

pub fn brownian_exposures(pi: &WeightVector, sigma: &VolMatrix) -> Result<ExposureVector> {
    if pi.len() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            found: pi.len(),
        });
    }
    let p = sigma.matrix().transpose() * DVector::from_column_slice(pi.weights());
    Ok(ExposureVector {
        p: p.iter().copied().collect(),
    })
}
