//! Optimal linear feedback control of a continuously measured oscillator.
//!
//! Natural units throughout: ħ = 1, mass = 1. Spectra are single-sided.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod colddamp;
pub mod conditioning;
pub mod control;
pub mod error;
pub mod optics;
pub mod optim;
pub mod oracle;
pub mod plant;
pub mod ratfun;

pub use error::{Error, Result};
