//! Saturation attacks on Gaussian-modulated coherent-state CV-QKD.
//!
//! The crate simulates how hard clipping in Bob's homodyne detector biases
//! the honest parties' channel estimates, searches for attack parameters
//! that keep the estimated channel looking clean, evaluates the resulting
//! key rates, and scores attack paths with a Common Criteria style
//! attack-potential calculator.
//!
//! Units: quadratures in √N0, variances in N0, with N0 = 1.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimation;
pub mod optimizer;
pub mod protocol;
pub mod quadrature;
pub mod rating;
pub mod report;
pub mod rng;
pub mod security;
pub mod snu;

pub use error::{Error, Result};
