//! Gradient-following update rules behind a single ascent interface.
//!
//! Every optimizer consumes an estimated gradient of a function being
//! *maximized* and returns the update vector to add to the current solution.
//! `ClipUp` normalizes the gradient before applying momentum, so the length
//! of its updates is controlled purely in solution-space units; `NoClip` is
//! the same rule without the speed limit, and `Adam` / plain ascent are the
//! usual scale-sensitive baselines.

mod adam;
mod clipup;
mod plain;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use clipup::{clipup_step, noclip_step, ClipUpConfig, ClipUpState};
pub use plain::plain_step;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An ascent step: the vector added to the current solution.
#[derive(Clone, Debug, PartialEq)]
pub struct AscentDirection {
    /// Update vector, finite in every component.
    pub update: Vec<f64>,
    /// Whether the maximum-speed clip rescaled the velocity this step.
    pub clipped: bool,
}

/// Optimizer choice plus hyperparameters, as written in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerSpec {
    ClipUp(ClipUpConfig),
    NoClip(ClipUpConfig),
    Adam(AdamConfig),
    Plain { step_size: f64 },
}

impl OptimizerSpec {
    /// Check hyperparameter ranges without building any state.
    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerSpec::ClipUp(c) | OptimizerSpec::NoClip(c) => c.validate(),
            OptimizerSpec::Adam(c) => c.validate(),
            OptimizerSpec::Plain { step_size } => {
                if step_size.is_finite() && *step_size >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "plain ascent step size must be finite and >= 0, got {step_size}"
                    )))
                }
            }
        }
    }

    /// Instantiate the optimizer with zeroed state for `dimension` parameters.
    pub fn build(&self, dimension: usize) -> Optimizer {
        match self {
            OptimizerSpec::ClipUp(config) => Optimizer::ClipUp {
                config: *config,
                state: ClipUpState::new(dimension),
            },
            OptimizerSpec::NoClip(config) => Optimizer::NoClip {
                config: *config,
                state: ClipUpState::new(dimension),
            },
            OptimizerSpec::Adam(config) => Optimizer::Adam {
                config: *config,
                state: AdamState::new(dimension),
            },
            OptimizerSpec::Plain { step_size } => Optimizer::Plain { step_size: *step_size },
        }
    }

    /// The speed limit, for optimizers that have one.
    pub fn max_speed(&self) -> Option<f64> {
        match self {
            OptimizerSpec::ClipUp(c) => Some(c.max_speed),
            _ => None,
        }
    }

    /// Short lowercase name for reports and file names.
    pub fn label(&self) -> &'static str {
        match self {
            OptimizerSpec::ClipUp(_) => "clipup",
            OptimizerSpec::NoClip(_) => "noclip",
            OptimizerSpec::Adam(_) => "adam",
            OptimizerSpec::Plain { .. } => "plain",
        }
    }
}

/// A ready-to-run optimizer: hyperparameters plus mutable state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    ClipUp { config: ClipUpConfig, state: ClipUpState },
    NoClip { config: ClipUpConfig, state: ClipUpState },
    Adam { config: AdamConfig, state: AdamState },
    Plain { step_size: f64 },
}

impl Optimizer {
    /// Compute the ascent step for an estimated gradient, advancing any state.
    pub fn step(&mut self, gradient: &[f64]) -> Result<AscentDirection> {
        match self {
            Optimizer::ClipUp { config, state } => clipup_step(state, config, gradient),
            Optimizer::NoClip { config, state } => noclip_step(state, config, gradient),
            Optimizer::Adam { config, state } => adam_step(state, config, gradient),
            Optimizer::Plain { step_size } => plain_step(*step_size, gradient),
        }
    }

    /// The configuration this optimizer was built from.
    pub fn spec(&self) -> OptimizerSpec {
        match self {
            Optimizer::ClipUp { config, .. } => OptimizerSpec::ClipUp(*config),
            Optimizer::NoClip { config, .. } => OptimizerSpec::NoClip(*config),
            Optimizer::Adam { config, .. } => OptimizerSpec::Adam(*config),
            Optimizer::Plain { step_size } => OptimizerSpec::Plain { step_size: *step_size },
        }
    }
}

/// Validate a gradient: right length, all components finite.
pub(crate) fn ensure_gradient(gradient: &[f64], dimension: usize) -> Result<()> {
    if gradient.len() != dimension {
        return Err(Error::DimensionMismatch { expected: dimension, actual: gradient.len() });
    }
    ensure_finite(gradient)
}

/// Validate that every gradient component is finite.
pub(crate) fn ensure_finite(gradient: &[f64]) -> Result<()> {
    for (index, &value) in gradient.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteGradient { index, value });
        }
    }
    Ok(())
}
