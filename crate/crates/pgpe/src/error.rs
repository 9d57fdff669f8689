//! Error type shared across the library.

use thiserror::Error;

/// Convenience alias used by every fallible function in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while configuring or running a search.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("gradient component {index} is not finite ({value})")]
    NonFiniteGradient { index: usize, value: f64 },

    #[error("fitness value {value} is not finite")]
    NonFiniteFitness { value: f64 },

    #[error("need at least {min} fitness values, got {got}")]
    TooFewFitnesses { min: usize, got: usize },

    #[error("direction pair {pair} is missing its {side} evaluation")]
    MissingEvaluation { pair: usize, side: &'static str },

    #[error("standard deviation component {index} must be positive and finite, got {value}")]
    InvalidSigma { index: usize, value: f64 },

    #[error(
        "reward normalization denominator for pair {pair} is not positive \
         (f_max {f_max} <= pair mean {pair_mean})"
    )]
    RewardNormPair { pair: usize, f_max: f64, pair_mean: f64 },

    #[error(
        "reward normalization baseline denominator is not positive \
         (f_max {f_max} <= baseline {baseline})"
    )]
    RewardNormBaseline { f_max: f64, baseline: f64 },

    #[error("reward normalization needs at least one observed fitness before the first update")]
    RewardNormUninitialized,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("episode produced a non-finite {what} at step {step}")]
    NonFiniteEpisode { what: &'static str, step: u32 },

    #[error("checkpoint version mismatch: found {found}, expected {expected}")]
    CheckpointVersion { found: u64, expected: u32 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
