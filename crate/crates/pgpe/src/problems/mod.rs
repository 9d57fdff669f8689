//! Objective functions: analytic benchmarks and an episodic control task.

pub mod analytic;
pub mod point_reach;
pub mod policy;
pub mod scaling;

pub use analytic::{eval_analytic, rastrigin, rosenbrock, sphere, AnalyticFunction, AnalyticObjective};
pub use point_reach::{rollout, PointReachConfig, PointReachObjective, Rollout};
pub use policy::{Policy, PolicySpec};
pub use scaling::{scaled_objective, FitnessTransform, ScaleMode, ScaledObjective};

use crate::error::Result;
use crate::stats::ObsNormalizer;

/// How a single evaluation should be performed.
#[derive(Clone, Copy, Debug)]
pub struct EvalRequest<'a> {
    /// Seed controlling any stochastic aspect of the evaluation
    /// (for the control task: the start-state jitter).
    pub seed: u64,
    /// Frozen observation normalization, when enabled for this run.
    pub normalizer: Option<&'a ObsNormalizer>,
    /// Whether to return the raw observations seen during the episode.
    pub collect_observations: bool,
}

impl EvalRequest<'_> {
    /// A request with just a seed: no normalization, no observation capture.
    pub fn seeded(seed: u64) -> Self {
        EvalRequest { seed, normalizer: None, collect_observations: false }
    }
}

/// Outcome of evaluating one solution.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalOutcome {
    pub fitness: f64,
    /// Simulator interactions consumed (1 for analytic functions).
    pub timesteps: u64,
    /// Raw (pre-normalization) observations, concatenated row-major;
    /// empty unless the request asked for them.
    pub observations: Vec<f64>,
}

/// A black-box objective to maximize.
///
/// Implementations must be deterministic given `(solution, request.seed)` and
/// callable from many threads at once.
pub trait Objective: Send + Sync {
    /// Length of the solution vector.
    fn dimension(&self) -> usize;

    /// Observation dimensionality, for problems that produce observations.
    fn observation_dim(&self) -> Option<usize> {
        None
    }

    fn evaluate(&self, solution: &[f64], request: &EvalRequest) -> Result<EvalOutcome>;

    /// Convenience wrapper returning just the fitness.
    fn fitness(&self, solution: &[f64], seed: u64) -> Result<f64> {
        Ok(self.evaluate(solution, &EvalRequest::seeded(seed))?.fitness)
    }
}
