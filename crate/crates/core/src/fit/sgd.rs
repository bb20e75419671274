use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FitReport;
use crate::casecontrol::Objective;
use crate::error::{invalid, CdeError, Result};
use crate::qmodel::{MlpSpec, Mode, QModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdConfig {
    pub batch_size: usize,
    pub total_steps: usize,
    pub initial_step_size: f64,
    pub halve_every: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            batch_size: 50,
            total_steps: 600,
            initial_step_size: 1.0,
            halve_every: 100,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl SgdConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.halve_every == 0 {
            return Err(invalid("batch_size and halve_every must be positive"));
        }
        if !(self.initial_step_size > 0.0 && self.adam_epsilon > 0.0) {
            return Err(invalid("step size and ADAM epsilon must be positive"));
        }
        for b in [self.adam_beta1, self.adam_beta2] {
            if !(b > 0.0 && b < 1.0) {
                return Err(invalid("ADAM betas must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

/// Step size at (zero-based) `step`: halved every `halve_every` steps.
pub fn step_size(config: &SgdConfig, step: usize) -> f64 {
    config.initial_step_size * 0.5f64.powi((step / config.halve_every) as i32)
}

/// ADAM moment state with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(dim: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((th, g), m), v) in theta.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *th -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Mini-batch ADAM on the case-control objective.
///
/// Each step draws the next `batch_size` observations of a shuffled epoch
/// (the last batch of an epoch may be smaller), evaluates the train-mode
/// objective on their case and control rows with the ridge term scaled by
/// `batch / n`, and takes one ADAM step.
pub fn fit_sgd(model: &QModel, objective: &Objective<'_>, config: &SgdConfig) -> Result<(QModel, FitReport)> {
    config.validate()?;
    let start = Instant::now();
    let n = objective.n();
    if config.batch_size > n {
        return Err(invalid(format!(
            "batch size {} exceeds {n} observations",
            config.batch_size
        )));
    }
    let mut model = model.clone();
    let mut theta = model.params();
    let mut adam = Adam::new(theta.len(), config.adam_beta1, config.adam_beta2, config.adam_epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut trace = Vec::with_capacity(config.total_steps);

    for step in 0..config.total_steps {
        if cursor >= n {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + config.batch_size).min(n);
        let obs = &order[cursor..end];
        cursor = end;
        let eval = objective.evaluate(&model, obs, obs.len() as f64 / n as f64, Mode::Train)?;
        if !eval.value.is_finite() || eval.gradient.iter().any(|g| !g.is_finite()) {
            return Err(CdeError::Diverged { step });
        }
        trace.push(eval.value);
        model.after_train_step(&eval.forward);
        adam.step(&mut theta, &eval.gradient, step_size(config, step));
        model.set_params(&theta)?;
    }

    let final_objective = objective.value(&model, Mode::Eval)?;
    if !final_objective.is_finite() {
        return Err(CdeError::Diverged {
            step: config.total_steps,
        });
    }
    let report = FitReport {
        final_objective,
        trace,
        seconds: start.elapsed().as_secs_f64(),
        iterations: config.total_steps,
        converged: true,
        config: serde_json::json!({
            "method": "adam",
            "omega": objective.omega,
            "controls": objective.controls.m(),
            "sgd": config,
        }),
    };
    Ok((model, report))
}

/// [`fit_sgd`] for a network spec.
pub fn fit_mlp_sgd(
    spec: &MlpSpec,
    objective: &Objective<'_>,
    config: &SgdConfig,
) -> Result<(MlpSpec, FitReport)> {
    let (model, report) = fit_sgd(&QModel::Mlp(spec.clone()), objective, config)?;
    match model {
        QModel::Mlp(s) => Ok((s, report)),
        QModel::Polynomial(_) => unreachable!("fit_sgd preserves the model type"),
    }
}
