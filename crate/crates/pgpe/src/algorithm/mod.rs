//! The core search loop: mirrored sampling, fitness shaping, gradient
//! estimation and the distribution update.

pub mod gradients;
pub mod heuristics;
pub mod shaping;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{Optimizer, OptimizerSpec};
use crate::problems::{EvalRequest, Objective};
use crate::vecops::l2_norm;

pub use gradients::{
    estimate_grad_mean, estimate_grad_sigma, reward_normalized_gradients, standard_gradients,
    update_distribution, GradientEstimate,
};
pub use heuristics::{derive_heuristics, sigma_from_radius, DerivedHyperparams, HeuristicInputs};
pub use shaping::{centered_rank, rank_pairs, FitnessShaping, FmaxTracker};

/// Gaussian search distribution: solution mean and per-dimension standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchDistribution {
    mean: Vec<f64>,
    stdev: Vec<f64>,
}

impl SearchDistribution {
    pub fn new(mean: Vec<f64>, stdev: Vec<f64>) -> Result<Self> {
        if mean.len() != stdev.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), actual: stdev.len() });
        }
        for (index, &value) in stdev.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidSigma { index, value });
            }
        }
        for (index, &value) in mean.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteGradient { index, value });
            }
        }
        Ok(SearchDistribution { mean, stdev })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn stdev(&self) -> &[f64] {
        &self.stdev
    }

    /// Euclidean norm of the standard-deviation vector.
    pub fn sigma_norm(&self) -> f64 {
        l2_norm(&self.stdev)
    }
}

/// Fitness and cost of evaluating one solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    pub timesteps: u64,
}

/// Which half of a mirrored pair a solution belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// 0 for `Plus`, 1 for `Minus`; used in seed derivation.
    pub fn index(&self) -> u64 {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }
}

/// One mirrored perturbation and the evaluations of `mean + delta` / `mean - delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionPair {
    delta: Vec<f64>,
    plus: Option<Evaluation>,
    minus: Option<Evaluation>,
}

impl DirectionPair {
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn plus(&self) -> Option<Evaluation> {
        self.plus
    }

    pub fn minus(&self) -> Option<Evaluation> {
        self.minus
    }
}

/// The mirrored population of one iteration, possibly grown in blocks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DirectionPopulation {
    pairs: Vec<DirectionPair>,
}

impl DirectionPopulation {
    pub fn from_deltas(deltas: Vec<Vec<f64>>) -> Self {
        DirectionPopulation {
            pairs: deltas
                .into_iter()
                .map(|delta| DirectionPair { delta, plus: None, minus: None })
                .collect(),
        }
    }

    pub fn pairs(&self) -> &[DirectionPair] {
        &self.pairs
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// Number of solutions, i.e. `2 * pair_count`.
    pub fn solution_count(&self) -> usize {
        2 * self.pairs.len()
    }

    /// Record the evaluation of one half of a pair.
    pub fn record(&mut self, pair: usize, sign: Sign, evaluation: Evaluation) -> Result<()> {
        if !evaluation.fitness.is_finite() {
            return Err(Error::NonFiniteFitness { value: evaluation.fitness });
        }
        let slot = self
            .pairs
            .get_mut(pair)
            .ok_or(Error::MissingEvaluation { pair, side: "any" })?;
        match sign {
            Sign::Plus => slot.plus = Some(evaluation),
            Sign::Minus => slot.minus = Some(evaluation),
        }
        Ok(())
    }

    /// Extend with the pairs of another population (adaptive growth).
    pub fn append(&mut self, other: DirectionPopulation) {
        self.pairs.extend(other.pairs);
    }

    /// Total simulator timesteps across all recorded evaluations.
    pub fn total_timesteps(&self) -> u64 {
        self.pairs
            .iter()
            .flat_map(|p| [p.plus, p.minus])
            .flatten()
            .map(|e| e.timesteps)
            .sum()
    }

    /// Collect the raw fitness of every pair; errors if any half is missing.
    pub fn raw_pair_fitness(&self) -> Result<PairFitness> {
        let mut plus = Vec::with_capacity(self.pairs.len());
        let mut minus = Vec::with_capacity(self.pairs.len());
        for (i, pair) in self.pairs.iter().enumerate() {
            plus.push(
                pair.plus.ok_or(Error::MissingEvaluation { pair: i, side: "plus" })?.fitness,
            );
            minus.push(
                pair.minus.ok_or(Error::MissingEvaluation { pair: i, side: "minus" })?.fitness,
            );
        }
        Ok(PairFitness { plus, minus })
    }
}

/// Per-pair fitness values (raw or shaped), aligned with the population's pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct PairFitness {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl PairFitness {
    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    /// All values interleaved as `[plus_0, minus_0, plus_1, minus_1, ...]`.
    pub fn interleaved(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.len());
        for (p, m) in self.plus.iter().zip(&self.minus) {
            out.push(*p);
            out.push(*m);
        }
        out
    }

    /// Highest value across both halves.
    pub fn best(&self) -> f64 {
        self.plus.iter().chain(&self.minus).fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    /// Mean across both halves.
    pub fn mean(&self) -> f64 {
        let n = 2 * self.len();
        if n == 0 {
            return 0.0;
        }
        self.plus.iter().chain(&self.minus).sum::<f64>() / n as f64
    }
}

/// Draw `pair_count` mirrored perturbations: `delta ~ N(0, I) * stdev` elementwise.
pub fn sample_population<R: Rng + ?Sized>(
    dist: &SearchDistribution,
    pair_count: usize,
    rng: &mut R,
) -> DirectionPopulation {
    let deltas = (0..pair_count)
        .map(|_| {
            dist.stdev
                .iter()
                .map(|&s| s * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    DirectionPopulation::from_deltas(deltas)
}

/// Hyperparameters of the search loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgpeConfig {
    /// Base population size (solutions per iteration before growth); even, >= 2.
    pub population_size: usize,
    /// Ceiling for adaptive population growth; a multiple of `population_size`.
    pub max_population: usize,
    /// Per-iteration simulator budget that triggers growth; 0 disables growth.
    pub timestep_budget: u64,
    /// Learning rate for the standard-deviation update.
    pub sigma_learning_rate: f64,
    /// Cap on the per-dimension standard-deviation change, as a fraction of sigma.
    pub sigma_max_change: f64,
    pub fitness_shaping: FitnessShaping,
    pub optimizer: OptimizerSpec,
}

impl PgpeConfig {
    /// A config with the common defaults: no growth, sigma learning rate 0.1,
    /// 20% sigma change cap, rank shaping.
    pub fn new(population_size: usize, optimizer: OptimizerSpec) -> Self {
        PgpeConfig {
            population_size,
            max_population: population_size,
            timestep_budget: 0,
            sigma_learning_rate: 0.1,
            sigma_max_change: 0.2,
            fitness_shaping: FitnessShaping::CenteredRank,
            optimizer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || self.population_size % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "population size must be even and >= 2, got {}",
                self.population_size
            )));
        }
        if self.max_population < self.population_size
            || self.max_population % self.population_size != 0
        {
            return Err(Error::InvalidConfig(format!(
                "max population must be a positive multiple of the population size, \
                 got {} with base {}",
                self.max_population, self.population_size
            )));
        }
        if !(self.sigma_learning_rate.is_finite() && self.sigma_learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma learning rate must be finite and > 0, got {}",
                self.sigma_learning_rate
            )));
        }
        if !(self.sigma_max_change > 0.0 && self.sigma_max_change < 1.0) {
            // Strictly below 1 so the standard deviation can never reach zero.
            return Err(Error::InvalidConfig(format!(
                "sigma max change must lie in (0, 1), got {}",
                self.sigma_max_change
            )));
        }
        self.optimizer.validate()
    }
}

/// Telemetry produced by one iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationOutcome {
    /// Solutions actually evaluated this iteration (after any growth).
    pub lambda_used: usize,
    /// Simulator timesteps consumed by those evaluations.
    pub timesteps: u64,
    pub raw_best: f64,
    pub raw_mean: f64,
    /// Best/mean of the values fed to the gradient estimator (equals the raw
    /// ones unless shaping rewrote them).
    pub shaped_best: f64,
    pub shaped_mean: f64,
    /// Norm of the mean update, i.e. how far the distribution center moved.
    pub speed: f64,
    /// Norm of the updated standard-deviation vector.
    pub sigma_norm: f64,
    /// Whether the optimizer's speed limit engaged this iteration.
    pub clip_engaged: bool,
}

/// Search state: distribution, optimizer and shaping bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pgpe {
    config: PgpeConfig,
    distribution: SearchDistribution,
    optimizer: Optimizer,
    f_max: FmaxTracker,
}

impl Pgpe {
    pub fn new(config: PgpeConfig, initial: SearchDistribution) -> Result<Self> {
        config.validate()?;
        let optimizer = config.optimizer.build(initial.dimension());
        Ok(Pgpe { config, distribution: initial, optimizer, f_max: FmaxTracker::tracked() })
    }

    /// Use a known fitness ceiling instead of tracking the best seen value
    /// (only relevant to reward-normalized shaping).
    pub fn with_known_f_max(mut self, f_max: f64) -> Self {
        self.f_max = FmaxTracker::known(f_max);
        self
    }

    pub fn config(&self) -> &PgpeConfig {
        &self.config
    }

    pub fn distribution(&self) -> &SearchDistribution {
        &self.distribution
    }

    pub fn optimizer(&self) -> &Optimizer {
        &self.optimizer
    }

    pub fn f_max(&self) -> &FmaxTracker {
        &self.f_max
    }

    /// Consume a fully evaluated population: shape fitnesses, estimate
    /// gradients, update the distribution, and report iteration telemetry.
    pub fn process(&mut self, population: &DirectionPopulation) -> Result<IterationOutcome> {
        let raw = population.raw_pair_fitness()?;
        if raw.is_empty() {
            return Err(Error::TooFewFitnesses { min: 2, got: 0 });
        }

        let (gradients, shaped) = match self.config.fitness_shaping {
            FitnessShaping::Raw => {
                let grads = standard_gradients(population, &raw, &self.distribution)?;
                (grads, raw.clone())
            }
            FitnessShaping::CenteredRank => {
                let shaped = rank_pairs(&raw)?;
                let grads = standard_gradients(population, &shaped, &self.distribution)?;
                (grads, shaped)
            }
            FitnessShaping::RewardNorm => {
                self.f_max.observe_all(raw.plus.iter().chain(&raw.minus).copied());
                let grads =
                    reward_normalized_gradients(population, &raw, &self.distribution, &self.f_max)?;
                (grads, raw.clone())
            }
        };

        let (next, ascent) =
            update_distribution(&self.distribution, &gradients, &mut self.optimizer, &self.config)?;
        let outcome = IterationOutcome {
            lambda_used: population.solution_count(),
            timesteps: population.total_timesteps(),
            raw_best: raw.best(),
            raw_mean: raw.mean(),
            shaped_best: shaped.best(),
            shaped_mean: shaped.mean(),
            speed: l2_norm(&ascent.update),
            sigma_norm: next.sigma_norm(),
            clip_engaged: ascent.clipped,
        };
        self.distribution = next;
        Ok(outcome)
    }

    /// One complete iteration against an objective, at the base population
    /// size (no adaptive growth — the experiment runner owns that, along with
    /// scheduling-independent seeding and parallel evaluation).
    ///
    /// Evaluation seeds are drawn from `rng`, so the result is deterministic
    /// given the generator state.
    pub fn iterate_on<R: Rng + ?Sized>(
        &mut self,
        problem: &dyn Objective,
        rng: &mut R,
    ) -> Result<IterationOutcome> {
        if problem.dimension() != self.distribution.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.distribution.dimension(),
                actual: problem.dimension(),
            });
        }
        let pair_count = self.config.population_size / 2;
        let mut population = sample_population(&self.distribution, pair_count, rng);
        for i in 0..pair_count {
            for sign in [Sign::Plus, Sign::Minus] {
                let solution = self.member(&population, i, sign);
                let seed = rng.random::<u64>();
                let outcome = problem.evaluate(&solution, &EvalRequest::seeded(seed))?;
                population.record(
                    i,
                    sign,
                    Evaluation { fitness: outcome.fitness, timesteps: outcome.timesteps },
                )?;
            }
        }
        self.process(&population)
    }

    /// The solution vector for one half of a pair: `mean +/- delta`.
    pub fn member(&self, population: &DirectionPopulation, pair: usize, sign: Sign) -> Vec<f64> {
        let delta = population.pairs()[pair].delta();
        let s = match sign {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        };
        self.distribution.mean.iter().zip(delta).map(|(m, d)| m + s * d).collect()
    }
}
