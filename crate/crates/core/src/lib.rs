//! Conditional density estimation by logistic transformation.
//!
//! A response `y` is mapped to the unit interval by a fitted base CDF
//! `z = G(y | x)`. The conditional density of `z` is modelled as
//! `exp(q(z, x))` normalized over `z`, with `q` either a polynomial or a
//! small batch-normalized network. Both are fit by case-control likelihood
//! approximations: each observed `z` is contrasted with uniform controls.

// `!(a < b)` checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod casecontrol;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fit;
pub mod normal;
pub mod predict;
pub mod qmodel;
pub mod simgen;
pub mod transform;

pub use error::{CdeError, Result};
