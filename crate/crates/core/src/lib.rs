//! Portfolio optimization in the equal-drift n-stock Black–Scholes model.
//!
//! In this model every Brownian driver carries the same excess drift, so the
//! volatility matrix fixes both the covariance and the expected returns. The
//! continuous-time mean-variance optimum holds an equal share of wealth in each
//! driver, and when the total risky exposure is fixed it depends on nothing but
//! the volatility matrix.
//!
//! - [`factorization`]: covariance matrices and their volatility factors
//! - [`model`]: model parameters and implied expected returns
//! - [`strategy`]: the optimal weights and the 1/n benchmark
//! - [`simulate`]: Monte Carlo paths, wealth replay, closed-form wealth law
//! - [`data`]: return panels and loaders
//! - [`backtest`]: rolling out-of-sample backtest
//! - [`stats`]: Sharpe ratios and the Jobson–Korkie–Memmel test

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod data;
pub mod error;
pub mod factorization;
pub mod matrix_csv;
pub mod model;
pub mod simulate;
pub mod stats;
pub mod strategy;

pub use error::{Error, Result};
