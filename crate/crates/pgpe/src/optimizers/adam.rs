//! Adam in ascent form: bias-corrected moment estimates, update added to the solution.

use serde::{Deserialize, Serialize};

use super::{ensure_gradient, AscentDirection};
use crate::error::{Error, Result};

/// Adam hyperparameters. `new` fills in the usual defaults
/// (`beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(step_size: f64) -> Self {
        AdamConfig { step_size, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step size must be finite and > 0, got {}",
                self.step_size
            )));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be finite and > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Adam accumulators: first/second moment vectors and the step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
}

impl AdamState {
    pub fn new(dimension: usize) -> Self {
        AdamState {
            first_moment: vec![0.0; dimension],
            second_moment: vec![0.0; dimension],
            step_count: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.first_moment.len()
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One bias-corrected Adam step, returned as an ascent update.
pub fn adam_step(
    state: &mut AdamState,
    config: &AdamConfig,
    gradient: &[f64],
) -> Result<AscentDirection> {
    ensure_gradient(gradient, state.dimension())?;

    state.step_count += 1;
    let correction1 = 1.0 - config.beta1.powi(state.step_count as i32);
    let correction2 = 1.0 - config.beta2.powi(state.step_count as i32);

    let mut update = vec![0.0; gradient.len()];
    for (i, &g) in gradient.iter().enumerate() {
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        update[i] = config.step_size * m_hat / (v_hat.sqrt() + config.epsilon);
    }

    Ok(AscentDirection { update, clipped: false })
}
