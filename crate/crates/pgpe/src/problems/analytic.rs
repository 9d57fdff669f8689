//! Analytic benchmarks, negated so that higher fitness is better everywhere.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EvalOutcome, EvalRequest, Objective};
use crate::error::{Error, Result};

/// Sum of squares; minimum 0 at the origin.
pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Highly multimodal cosine-modulated bowl; minimum 0 at the origin.
pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

/// Curved valley; minimum 0 at (1, ..., 1). Needs at least two dimensions.
pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2)
        })
        .sum()
}

/// The analytic functions available by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticFunction {
    Sphere,
    Rastrigin,
    Rosenbrock,
}

impl AnalyticFunction {
    /// Raw (minimization-form) function value.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            AnalyticFunction::Sphere => sphere(x),
            AnalyticFunction::Rastrigin => rastrigin(x),
            AnalyticFunction::Rosenbrock => rosenbrock(x),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalyticFunction::Sphere => "sphere",
            AnalyticFunction::Rastrigin => "rastrigin",
            AnalyticFunction::Rosenbrock => "rosenbrock",
        }
    }
}

impl FromStr for AnalyticFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(AnalyticFunction::Sphere),
            "rastrigin" => Ok(AnalyticFunction::Rastrigin),
            "rosenbrock" => Ok(AnalyticFunction::Rosenbrock),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }
}

/// Fitness of `x` under the named benchmark: the negated function value,
/// so the global optimum has fitness 0.
pub fn eval_analytic(name: &str, x: &[f64]) -> Result<f64> {
    Ok(-name.parse::<AnalyticFunction>()?.value(x))
}

/// An analytic benchmark as a maximization [`Objective`].
///
/// Evaluations are deterministic (the seed is ignored) and each one counts as
/// a single simulator interaction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticObjective {
    function: AnalyticFunction,
    dimension: usize,
}

impl AnalyticObjective {
    pub fn new(function: AnalyticFunction, dimension: usize) -> Result<Self> {
        let min_dim = match function {
            AnalyticFunction::Rosenbrock => 2,
            _ => 1,
        };
        if dimension < min_dim {
            return Err(Error::InvalidConfig(format!(
                "{} needs at least {min_dim} dimension(s), got {dimension}",
                function.name()
            )));
        }
        Ok(AnalyticObjective { function, dimension })
    }

    pub fn function(&self) -> AnalyticFunction {
        self.function
    }
}

impl Objective for AnalyticObjective {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, solution: &[f64], _request: &EvalRequest) -> Result<EvalOutcome> {
        if solution.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: solution.len(),
            });
        }
        Ok(EvalOutcome {
            fitness: -self.function.value(solution),
            timesteps: 1,
            observations: Vec::new(),
        })
    }
}
