//! Gradient estimators over mirrored populations and the distribution update.

use super::{DirectionPopulation, PairFitness, SearchDistribution};
use crate::algorithm::shaping::FmaxTracker;
use crate::algorithm::PgpeConfig;
use crate::error::{Error, Result};
use crate::optimizers::{AscentDirection, Optimizer};

/// Estimated gradients of expected fitness for one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub grad_mean: Vec<f64>,
    pub grad_sigma: Vec<f64>,
    /// Mean of all fitness values used for the sigma baseline.
    pub baseline: f64,
}

fn check_alignment(population: &DirectionPopulation, fitness: &PairFitness) -> Result<usize> {
    let n = population.pair_count();
    if n == 0 {
        return Err(Error::TooFewFitnesses { min: 2, got: 0 });
    }
    if fitness.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: fitness.len() });
    }
    Ok(n)
}

/// Mean gradient: average of `(f_plus - f_minus) / 2 * delta` over all pairs.
pub fn estimate_grad_mean(
    population: &DirectionPopulation,
    fitness: &PairFitness,
) -> Result<Vec<f64>> {
    let n = check_alignment(population, fitness)?;
    let dim = population.pairs()[0].delta().len();
    let mut grad = vec![0.0; dim];
    for (i, pair) in population.pairs().iter().enumerate() {
        let weight = (fitness.plus[i] - fitness.minus[i]) / 2.0;
        for (g, &d) in grad.iter_mut().zip(pair.delta()) {
            *g += weight * d;
        }
    }
    for g in grad.iter_mut() {
        *g /= n as f64;
    }
    Ok(grad)
}

/// Standard-deviation gradient: average of
/// `((f_plus + f_minus) / 2 - baseline) * (delta^2 - sigma^2) / sigma`,
/// where the baseline is the mean of all `2n` fitness values.
/// Returns the gradient together with that baseline.
pub fn estimate_grad_sigma(
    population: &DirectionPopulation,
    fitness: &PairFitness,
    dist: &SearchDistribution,
) -> Result<(Vec<f64>, f64)> {
    let n = check_alignment(population, fitness)?;
    let baseline = fitness.mean();
    let sigma = dist.stdev();
    let mut grad = vec![0.0; dist.dimension()];
    for (i, pair) in population.pairs().iter().enumerate() {
        if pair.delta().len() != sigma.len() {
            return Err(Error::DimensionMismatch {
                expected: sigma.len(),
                actual: pair.delta().len(),
            });
        }
        let advantage = (fitness.plus[i] + fitness.minus[i]) / 2.0 - baseline;
        for (j, (g, &d)) in grad.iter_mut().zip(pair.delta()).enumerate() {
            *g += advantage * (d * d - sigma[j] * sigma[j]) / sigma[j];
        }
    }
    for g in grad.iter_mut() {
        *g /= n as f64;
    }
    Ok((grad, baseline))
}

/// Both gradients from already-shaped fitness values.
pub fn standard_gradients(
    population: &DirectionPopulation,
    fitness: &PairFitness,
    dist: &SearchDistribution,
) -> Result<GradientEstimate> {
    let grad_mean = estimate_grad_mean(population, fitness)?;
    let (grad_sigma, baseline) = estimate_grad_sigma(population, fitness, dist)?;
    Ok(GradientEstimate { grad_mean, grad_sigma, baseline })
}

/// Gradients from raw fitnesses with distance-to-best normalization:
/// each pair's mean-gradient term is divided by `f_max - pair_mean`, and the
/// sigma gradient by `f_max - baseline`. Both denominators must be positive;
/// the error names the offending pair.
pub fn reward_normalized_gradients(
    population: &DirectionPopulation,
    fitness: &PairFitness,
    dist: &SearchDistribution,
    tracker: &FmaxTracker,
) -> Result<GradientEstimate> {
    let n = check_alignment(population, fitness)?;
    let f_max = tracker.value()?;
    let baseline = fitness.mean();
    let sigma = dist.stdev();

    let sigma_denom = f_max - baseline;
    if !(sigma_denom > 0.0) {
        return Err(Error::RewardNormBaseline { f_max, baseline });
    }

    let mut grad_mean = vec![0.0; dist.dimension()];
    let mut grad_sigma = vec![0.0; dist.dimension()];
    for (i, pair) in population.pairs().iter().enumerate() {
        if pair.delta().len() != sigma.len() {
            return Err(Error::DimensionMismatch {
                expected: sigma.len(),
                actual: pair.delta().len(),
            });
        }
        let pair_mean = (fitness.plus[i] + fitness.minus[i]) / 2.0;
        let pair_denom = f_max - pair_mean;
        if !(pair_denom > 0.0) {
            return Err(Error::RewardNormPair { pair: i, f_max, pair_mean });
        }
        let mean_weight = (fitness.plus[i] - fitness.minus[i]) / 2.0 / pair_denom;
        let sigma_weight = (pair_mean - baseline) / sigma_denom;
        for (j, &d) in pair.delta().iter().enumerate() {
            grad_mean[j] += mean_weight * d;
            grad_sigma[j] += sigma_weight * (d * d - sigma[j] * sigma[j]) / sigma[j];
        }
    }
    for g in grad_mean.iter_mut().chain(grad_sigma.iter_mut()) {
        *g /= n as f64;
    }
    Ok(GradientEstimate { grad_mean, grad_sigma, baseline })
}

/// Smallest standard deviation a dimension can reach; the update floors at
/// this value because the sigma-gradient estimator divides by sigma.
pub const SIGMA_FLOOR: f64 = 1e-8;

/// Apply one update: the optimizer moves the mean along `grad_mean`, and the
/// standard deviation takes a `sigma_learning_rate * grad_sigma` step with
/// each component's change clamped to `sigma_max_change` times its current
/// value, then floored at [`SIGMA_FLOOR`]. Returns the updated distribution
/// and the mean's ascent step.
pub fn update_distribution(
    dist: &SearchDistribution,
    gradients: &GradientEstimate,
    optimizer: &mut Optimizer,
    config: &PgpeConfig,
) -> Result<(SearchDistribution, AscentDirection)> {
    for (index, &value) in gradients.grad_sigma.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteGradient { index, value });
        }
    }
    if gradients.grad_sigma.len() != dist.dimension() {
        return Err(Error::DimensionMismatch {
            expected: dist.dimension(),
            actual: gradients.grad_sigma.len(),
        });
    }

    let ascent = optimizer.step(&gradients.grad_mean)?;
    let mean = crate::vecops::add(dist.mean(), &ascent.update);

    let stdev = dist
        .stdev()
        .iter()
        .zip(&gradients.grad_sigma)
        .map(|(&s, &g)| {
            let bound = config.sigma_max_change * s;
            (s + (config.sigma_learning_rate * g).clamp(-bound, bound)).max(SIGMA_FLOOR)
        })
        .collect();

    Ok((SearchDistribution::new(mean, stdev)?, ascent))
}
