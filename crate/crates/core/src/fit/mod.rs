//! Parameter estimation: damped Newton for the polynomial model with a
//! single control, mini-batch ADAM for everything else.

mod irls;
mod sgd;

use serde::{Deserialize, Serialize};

pub use irls::{fit_poly_mcc, IrlsOptions};
pub use sgd::{fit_mlp_sgd, fit_sgd, step_size, Adam, SgdConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub final_objective: f64,
    /// Objective after every Newton iteration, or the mini-batch objective of every SGD step.
    pub trace: Vec<f64>,
    pub seconds: f64,
    pub iterations: usize,
    pub converged: bool,
    pub config: serde_json::Value,
}
