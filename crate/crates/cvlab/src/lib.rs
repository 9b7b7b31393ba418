//! Ancillary-operator control of continuous-variable bosonic systems:
//! schedule synthesis, truncated Fock-space dynamics and invariance checks.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod expm;
pub mod fockspace;
pub mod frames;
pub mod kernels;
pub mod metrics;
pub mod protocols;
pub mod quad;
pub mod sparse;

pub use error::{CvError, Result};

/// Float formatting used in every CSV: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}
