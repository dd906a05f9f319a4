//! Local observability of sensorless PMSM drives.
//!
//! The crate models salient and non-salient permanent-magnet synchronous
//! machines, evaluates their observability matrices both analytically and
//! by finite differences, and runs a standstill estimation study with an
//! extended Kalman filter under high-frequency injection.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod config;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod machine;
pub mod observability;
pub mod output;
pub mod runner;
pub mod simulation;

pub use error::{Error, Result};
