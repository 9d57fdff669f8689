//! Distribution-based evolutionary search with normalized-gradient ascent.
//!
//! The search maintains a Gaussian over solution space (a mean vector and a
//! per-dimension standard deviation), draws mirrored perturbation pairs,
//! estimates gradients of expected fitness from their evaluations, and moves
//! the distribution with a pluggable optimizer. The headline optimizer,
//! ClipUp, normalizes the gradient and clips the momentum velocity so that
//! step lengths are chosen in solution-space units, independent of fitness
//! scale; Adam and plain ascent are provided for comparison.
//!
//! The [`runner`] module adds the experiment harness: adaptive population
//! sizing against a per-iteration simulator budget, parallel evaluation with
//! scheduling-independent seeding, observation normalization, CSV/JSONL
//! telemetry, and versioned checkpoints for exact resume.

pub mod algorithm;
pub mod error;
pub mod optimizers;
pub mod problems;
pub mod runner;
pub mod seeds;
mod serde_ext;
pub mod stats;
pub mod vecops;

pub use algorithm::{
    centered_rank, derive_heuristics, sample_population, sigma_from_radius, update_distribution,
    DirectionPair, DirectionPopulation, Evaluation, FitnessShaping, FmaxTracker, GradientEstimate,
    HeuristicInputs, IterationOutcome, PairFitness, Pgpe, PgpeConfig, SearchDistribution, Sign,
};
pub use error::{Error, Result};
pub use optimizers::{
    adam_step, clipup_step, noclip_step, plain_step, AdamConfig, AdamState, AscentDirection,
    ClipUpConfig, ClipUpState, Optimizer, OptimizerSpec,
};
pub use problems::{EvalOutcome, EvalRequest, Objective};
pub use runner::checkpoint::{Checkpoint, CHECKPOINT_FILE, CHECKPOINT_VERSION};
pub use runner::config::ExperimentConfig;
pub use runner::record::IterationRecord;
pub use runner::{run_experiment, resume, ExperimentRun, RepetitionResult, WORKERS_ENV};
pub use stats::{ObsNormalizer, RunningStats};
