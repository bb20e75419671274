//! Smooth q-functions `q(z, x)` whose exponential, normalized over `z`,
//! gives the conditional density on the unit scale.

pub mod mlp;
pub mod poly;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{CdeError, Result};
pub use mlp::{ForwardCache, MlpSpec};
pub use poly::{feature_count, PolynomialSpec};

/// Train mode normalizes with batch statistics; eval mode with running moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Rows `(z[i], x.row(owner[i]))`. Cases and controls of one observation
/// share an owner, so covariate rows are stored once.
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub z: &'a [f64],
    pub owner: &'a [usize],
    pub x: ArrayView2<'a, f64>,
}

impl Batch<'_> {
    pub(crate) fn check(&self, p: usize) -> Result<()> {
        if self.z.len() != self.owner.len() {
            return Err(CdeError::Dimension {
                expected: self.z.len(),
                got: self.owner.len(),
            });
        }
        if self.x.ncols() != p {
            return Err(CdeError::Dimension {
                expected: p,
                got: self.x.ncols(),
            });
        }
        if self.owner.iter().any(|&o| o >= self.x.nrows()) {
            return Err(crate::error::invalid("batch owner index out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QModel {
    Polynomial(PolynomialSpec),
    Mlp(MlpSpec),
}

/// Output of [`QModel::forward`], retained for the backward pass.
#[derive(Debug, Clone)]
pub enum Forward {
    Polynomial { features: Array2<f64> },
    Mlp(Box<ForwardCache>),
}

impl QModel {
    pub fn p(&self) -> usize {
        match self {
            QModel::Polynomial(s) => s.p,
            QModel::Mlp(s) => s.p(),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            QModel::Polynomial(s) => s.coefficients.len(),
            QModel::Mlp(s) => s.num_params(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            QModel::Polynomial(s) => s.coefficients.clone(),
            QModel::Mlp(s) => s.params(),
        }
    }

    pub fn set_params(&mut self, theta: &[f64]) -> Result<()> {
        match self {
            QModel::Polynomial(s) => {
                if theta.len() != s.num_features() {
                    return Err(CdeError::Dimension {
                        expected: s.num_features(),
                        got: theta.len(),
                    });
                }
                s.coefficients.copy_from_slice(theta);
                Ok(())
            }
            QModel::Mlp(s) => s.set_params(theta),
        }
    }

    /// Which parameters the ridge penalty applies to.
    pub fn penalty_mask(&self) -> Vec<bool> {
        match self {
            QModel::Polynomial(s) => vec![true; s.coefficients.len()],
            QModel::Mlp(s) => s.penalty_mask(),
        }
    }

    /// Squared norm of the penalized parameters.
    pub fn penalty_norm_sq(&self) -> f64 {
        self.params()
            .iter()
            .zip(self.penalty_mask())
            .filter(|(_, m)| *m)
            .map(|(t, _)| t * t)
            .sum()
    }

    /// q for every batch row plus whatever the backward pass needs.
    pub fn forward(&self, batch: &Batch<'_>, mode: Mode) -> Result<(Vec<f64>, Forward)> {
        match self {
            QModel::Polynomial(s) => {
                batch.check(s.p)?;
                let k = s.num_features();
                let mut features = Array2::zeros((batch.z.len(), k));
                for (i, mut row) in features.rows_mut().into_iter().enumerate() {
                    s.features_into(
                        batch.z[i],
                        batch.x.row(batch.owner[i]),
                        row.as_slice_mut().expect("standard layout"),
                    );
                }
                let coef = ndarray::ArrayView1::from(&s.coefficients[..]);
                let q = features.dot(&coef).to_vec();
                Ok((q, Forward::Polynomial { features }))
            }
            QModel::Mlp(s) => {
                let (q, cache) = s.forward(batch, mode)?;
                Ok((q, Forward::Mlp(Box::new(cache))))
            }
        }
    }

    /// Gradient of `sum_rows dq[row] * q[row]` wrt the flat parameter vector.
    pub fn backward(&self, fwd: &Forward, dq: &[f64]) -> Result<Vec<f64>> {
        match (self, fwd) {
            (QModel::Polynomial(_), Forward::Polynomial { features }) => {
                if dq.len() != features.nrows() {
                    return Err(CdeError::Dimension {
                        expected: features.nrows(),
                        got: dq.len(),
                    });
                }
                Ok(features.t().dot(&ndarray::ArrayView1::from(dq)).to_vec())
            }
            (QModel::Mlp(s), Forward::Mlp(cache)) => s.backward(cache, dq),
            _ => Err(crate::error::invalid("forward output does not match model type")),
        }
    }

    /// Eval-mode q values of one covariate vector at many `z`.
    pub fn q_grid(&self, z: &[f64], x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        let xm = x.insert_axis(ndarray::Axis(0));
        let owner = vec![0; z.len()];
        let batch = Batch { z, owner: &owner, x: xm };
        Ok(self.forward(&batch, Mode::Eval)?.0)
    }

    /// Eval-mode `q(z, x)`.
    pub fn q(&self, z: f64, x: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(self.q_grid(&[z], x)?[0])
    }

    /// Applies the running-moment update after a train-mode forward pass.
    pub fn after_train_step(&mut self, fwd: &Forward) {
        if let (QModel::Mlp(s), Forward::Mlp(cache)) = (self, fwd) {
            s.update_running_moments(cache);
        }
    }
}
