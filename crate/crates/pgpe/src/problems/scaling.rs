//! Fitness-scaling wrappers for reward-scale sensitivity experiments.

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EvalOutcome, EvalRequest, Objective};
use crate::error::{Error, Result};

/// Named fitness-scale presets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    #[default]
    Identity,
    Times1000,
    Div1000,
}

impl ScaleMode {
    pub fn factor(&self) -> f64 {
        match self {
            ScaleMode::Identity => 1.0,
            ScaleMode::Times1000 => 1000.0,
            ScaleMode::Div1000 => 0.001,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ScaleMode::Identity => "identity",
            ScaleMode::Times1000 => "times_1000",
            ScaleMode::Div1000 => "div_1000",
        }
    }
}

impl FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ScaleMode::Identity),
            "times_1000" | "x1000" => Ok(ScaleMode::Times1000),
            "div_1000" | "div1000" => Ok(ScaleMode::Div1000),
            other => Err(Error::InvalidConfig(format!("unknown scale mode '{other}'"))),
        }
    }
}

/// Strictly increasing affine map `f -> scale * f + shift` (scale > 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessTransform {
    pub scale: f64,
    pub shift: f64,
}

impl FitnessTransform {
    pub fn identity() -> Self {
        FitnessTransform { scale: 1.0, shift: 0.0 }
    }

    pub fn from_mode(mode: ScaleMode) -> Self {
        FitnessTransform { scale: mode.factor(), shift: 0.0 }
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.shift == 0.0
    }

    pub fn apply(&self, fitness: f64) -> f64 {
        self.scale * fitness + self.shift
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) || !self.shift.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "fitness transform must have finite scale > 0 and finite shift, \
                 got scale {} shift {}",
                self.scale, self.shift
            )));
        }
        Ok(())
    }
}

/// An objective with its fitness passed through an affine transform.
/// Timesteps and observations are untouched.
pub struct ScaledObjective {
    inner: Arc<dyn Objective>,
    transform: FitnessTransform,
}

impl ScaledObjective {
    pub fn new(inner: Arc<dyn Objective>, transform: FitnessTransform) -> Result<Self> {
        transform.validate()?;
        Ok(ScaledObjective { inner, transform })
    }

    pub fn transform(&self) -> FitnessTransform {
        self.transform
    }
}

impl Objective for ScaledObjective {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn observation_dim(&self) -> Option<usize> {
        self.inner.observation_dim()
    }

    fn evaluate(&self, solution: &[f64], request: &EvalRequest) -> Result<EvalOutcome> {
        let mut outcome = self.inner.evaluate(solution, request)?;
        outcome.fitness = self.transform.apply(outcome.fitness);
        Ok(outcome)
    }
}

/// Wrap an objective in a named scale preset. `Identity` wraps too, so the
/// caller need not special-case it; the transform is then a no-op.
pub fn scaled_objective(inner: Arc<dyn Objective>, mode: ScaleMode) -> Arc<dyn Objective> {
    if mode == ScaleMode::Identity {
        inner
    } else {
        Arc::new(
            ScaledObjective::new(inner, FitnessTransform::from_mode(mode))
                .expect("preset transforms are always valid"),
        )
    }
}
