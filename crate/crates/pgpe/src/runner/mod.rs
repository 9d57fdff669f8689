//! Experiment orchestration: drives the search loop against a configured
//! problem with parallel evaluation, adaptive population growth, per-iteration
//! scoring of the distribution mean, telemetry files, and checkpointing.
//!
//! Record streams are reproducible: solutions are evaluated in parallel but
//! results (and observation statistics) are folded in sampling order, so the
//! same config and seed give the same bytes regardless of worker count.

pub mod checkpoint;
pub mod config;
pub mod presets;
pub mod record;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algorithm::{sample_population, DirectionPopulation, Evaluation, Pgpe, Sign};
use crate::error::{Error, Result};
use crate::problems::{EvalRequest, Objective};
use crate::seeds;
use crate::stats::{ObsNormalizer, RunningStats};
use crate::vecops;

use checkpoint::{Checkpoint, CHECKPOINT_FILE, CHECKPOINT_VERSION};
use config::ExperimentConfig;
use record::{repetition_dir, IterationRecord, RecordWriter};

/// Environment variable controlling the evaluation worker count.
pub const WORKERS_ENV: &str = "PGPE_WORKERS";

/// Resolve the worker count: explicit request, then the environment variable,
/// then all available cores.
pub fn worker_count(requested: Option<usize>) -> usize {
    requested
        .or_else(|| {
            std::env::var(WORKERS_ENV).ok().and_then(|s| s.parse().ok()).filter(|&n| n > 0)
        })
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(workers))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))
}

/// One repetition of an experiment in flight.
pub struct ExperimentRun {
    config: ExperimentConfig,
    problem: Arc<dyn Objective>,
    algorithm: Pgpe,
    stats: RunningStats,
    rng: ChaCha8Rng,
    pool: rayon::ThreadPool,
    repetition: u64,
    run_seed: u64,
    iteration: u64,
    timesteps_total: u64,
}

impl ExperimentRun {
    pub fn new(config: ExperimentConfig, repetition: u64, workers: Option<usize>) -> Result<Self> {
        config.validate()?;
        let problem = config.problem.build()?;
        let resolved = config.resolve(problem.dimension())?;
        let distribution =
            crate::algorithm::SearchDistribution::new(resolved.x0, resolved.sigma0)?;
        let mut algorithm = Pgpe::new(resolved.pgpe, distribution)?;
        if let Some(f_max) = resolved.f_max {
            algorithm = algorithm.with_known_f_max(f_max);
        }
        let run_seed = seeds::run_seed(config.run.seed, repetition, config.run.seed_stride);
        let stats = RunningStats::new(problem.observation_dim().unwrap_or(0));
        let pool = build_pool(workers)?;
        Ok(ExperimentRun {
            config,
            problem,
            algorithm,
            stats,
            rng: ChaCha8Rng::seed_from_u64(run_seed),
            pool,
            repetition,
            run_seed,
            iteration: 0,
            timesteps_total: 0,
        })
    }

    /// Restore a run exactly where [`Self::make_checkpoint`] captured it.
    pub fn from_checkpoint(checkpoint: Checkpoint, workers: Option<usize>) -> Result<Self> {
        checkpoint.config.validate()?;
        let problem = checkpoint.config.problem.build()?;
        let pool = build_pool(workers)?;
        Ok(ExperimentRun {
            problem,
            algorithm: checkpoint.algorithm,
            stats: checkpoint.stats,
            rng: checkpoint.rng,
            pool,
            repetition: checkpoint.repetition,
            run_seed: checkpoint.run_seed,
            iteration: checkpoint.iteration,
            timesteps_total: checkpoint.timesteps_total,
            config: checkpoint.config,
        })
    }

    pub fn make_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            repetition: self.repetition,
            run_seed: self.run_seed,
            iteration: self.iteration,
            timesteps_total: self.timesteps_total,
            algorithm: self.algorithm.clone(),
            stats: self.stats.clone(),
            rng: self.rng.clone(),
        }
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn algorithm(&self) -> &Pgpe {
        &self.algorithm
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn run_seed(&self) -> u64 {
        self.run_seed
    }

    pub fn repetition(&self) -> u64 {
        self.repetition
    }

    /// Execute one search iteration: evaluate a (possibly grown) population,
    /// update the distribution, fold observation statistics, and score the
    /// new mean on held-out episodes.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let k = self.iteration;
        let collect = self.config.problem.obs_norm;
        // Normalization is frozen for the whole iteration: every solution is
        // judged under the same statistics, which stay untouched until after
        // the update barrier below.
        let normalizer = collect.then(|| self.stats.normalizer());
        let (population, observations) =
            self.evaluate_population(k, normalizer.as_ref(), collect)?;

        let outcome = self.algorithm.process(&population)?;
        self.timesteps_total += outcome.timesteps;
        if collect {
            self.stats.push_flat(&observations)?;
        }

        let eval_score = self.evaluate_mean(k)?;
        self.iteration = k + 1;
        Ok(IterationRecord {
            k,
            lambda: outcome.lambda_used,
            timesteps_total: self.timesteps_total,
            raw_best: outcome.raw_best,
            raw_mean: outcome.raw_mean,
            shaped_best: outcome.shaped_best,
            shaped_mean: outcome.shaped_mean,
            eval_score,
            speed: outcome.speed,
            sigma_norm: outcome.sigma_norm,
            clip_engaged: outcome.clip_engaged,
        })
    }

    /// Sample and evaluate the population for iteration `k`, growing it in
    /// half-population blocks while the timestep budget is unmet and the
    /// population cap allows.
    fn evaluate_population(
        &mut self,
        k: u64,
        normalizer: Option<&ObsNormalizer>,
        collect: bool,
    ) -> Result<(DirectionPopulation, Vec<f64>)> {
        let base_pairs = self.algorithm.config().population_size / 2;
        let max_solutions = self.algorithm.config().max_population;
        let budget = self.algorithm.config().timestep_budget;

        let mut population = DirectionPopulation::from_deltas(Vec::new());
        let mut observations = Vec::new();
        let mut timesteps: u64 = 0;

        loop {
            let block = sample_population(self.algorithm.distribution(), base_pairs, &mut self.rng);
            let offset = population.pair_count();
            population.append(block);
            timesteps += self.evaluate_pairs(
                &mut population,
                offset,
                k,
                normalizer,
                collect,
                &mut observations,
            )?;
            let can_grow = budget > 0
                && timesteps < budget
                && population.solution_count() < max_solutions;
            if !can_grow {
                break;
            }
        }
        Ok((population, observations))
    }

    /// Evaluate pairs `offset..` of `population` in parallel and record the
    /// results in sampling order. Returns the simulator timesteps consumed.
    fn evaluate_pairs(
        &self,
        population: &mut DirectionPopulation,
        offset: usize,
        k: u64,
        normalizer: Option<&ObsNormalizer>,
        collect: bool,
        observations: &mut Vec<f64>,
    ) -> Result<u64> {
        let mean = self.algorithm.distribution().mean();
        let mut tasks = Vec::with_capacity((population.pair_count() - offset) * 2);
        for (index, pair) in population.pairs().iter().enumerate().skip(offset) {
            for sign in [Sign::Plus, Sign::Minus] {
                let direction: f64 = if sign == Sign::Plus { 1.0 } else { -1.0 };
                let solution: Vec<f64> = mean
                    .iter()
                    .zip(pair.delta())
                    .map(|(m, d)| m + direction * d)
                    .collect();
                let seed =
                    seeds::training_seed(self.run_seed, k, index as u64, sign.index() as u64);
                tasks.push((index, sign, solution, seed));
            }
        }

        let problem = &self.problem;
        let outcomes = self.pool.install(|| {
            tasks
                .par_iter()
                .map(|(_, _, solution, seed)| {
                    let request = EvalRequest {
                        seed: *seed,
                        normalizer,
                        collect_observations: collect,
                    };
                    problem.evaluate(solution, &request)
                })
                .collect::<Result<Vec<_>>>()
        })?;

        let mut timesteps = 0;
        for ((index, sign, _, _), outcome) in tasks.iter().zip(outcomes) {
            timesteps += outcome.timesteps;
            observations.extend_from_slice(&outcome.observations);
            population.record(
                *index,
                *sign,
                Evaluation { fitness: outcome.fitness, timesteps: outcome.timesteps },
            )?;
        }
        Ok(timesteps)
    }

    /// Score the current distribution mean: the average fitness over the
    /// configured number of fixed-seed episodes. These evaluations are
    /// measurement only — they use post-update state and do not count against
    /// the timestep budget.
    fn evaluate_mean(&self, k: u64) -> Result<f64> {
        let episodes = self.config.run.eval_episodes;
        let normalizer = self.config.problem.obs_norm.then(|| self.stats.normalizer());
        let mean = self.algorithm.distribution().mean().to_vec();
        let problem = &self.problem;
        let run_seed = self.run_seed;
        let scores = self.pool.install(|| {
            (0..episodes)
                .into_par_iter()
                .map(|episode| {
                    let request = EvalRequest {
                        seed: seeds::eval_seed(run_seed, k, u64::from(episode)),
                        normalizer: normalizer.as_ref(),
                        collect_observations: false,
                    };
                    problem.evaluate(&mean, &request).map(|o| o.fitness)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(scores.iter().sum::<f64>() / f64::from(episodes))
    }

    /// Run iterations until `target`, writing each record through `writer`.
    pub fn run_to(
        &mut self,
        target: u64,
        writer: &mut RecordWriter,
        mut on_record: impl FnMut(&IterationRecord),
    ) -> Result<Vec<IterationRecord>> {
        let mut records = Vec::new();
        while self.iteration < target {
            let record = self.step()?;
            writer.write(&record)?;
            writer.flush()?;
            on_record(&record);
            records.push(record);
        }
        Ok(records)
    }
}

/// One finished repetition: where its files are and what it recorded.
#[derive(Clone, Debug)]
pub struct RepetitionResult {
    pub repetition: u64,
    pub run_seed: u64,
    pub dir: PathBuf,
    pub records: Vec<IterationRecord>,
}

impl RepetitionResult {
    pub fn final_eval(&self) -> f64 {
        self.records.last().map(|r| r.eval_score).unwrap_or(f64::NEG_INFINITY)
    }

    pub fn best_eval(&self) -> f64 {
        self.records.iter().map(|r| r.eval_score).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Run every repetition of `config`, writing records and a final checkpoint
/// per repetition under `output_dir/repNNN/`.
pub fn run_experiment(
    config: &ExperimentConfig,
    workers: Option<usize>,
    mut on_record: impl FnMut(u64, &IterationRecord),
) -> Result<Vec<RepetitionResult>> {
    config.validate()?;
    let mut results = Vec::new();
    for repetition in 0..config.run.repetitions {
        let mut run = ExperimentRun::new(config.clone(), repetition, workers)?;
        let dir = repetition_dir(&config.run.output_dir, repetition);
        let mut writer = RecordWriter::create(&dir)?;
        let records =
            run.run_to(config.run.iterations, &mut writer, |r| on_record(repetition, r))?;
        run.make_checkpoint().save(&dir.join(CHECKPOINT_FILE))?;
        results.push(RepetitionResult {
            repetition,
            run_seed: run.run_seed(),
            dir,
            records,
        });
    }
    Ok(results)
}

/// Run all repetitions without touching the filesystem; presets use this.
pub fn run_in_memory(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<Vec<RepetitionResult>> {
    config.validate()?;
    let mut results = Vec::new();
    for repetition in 0..config.run.repetitions {
        let mut run = ExperimentRun::new(config.clone(), repetition, workers)?;
        let mut records = Vec::new();
        while run.iteration() < config.run.iterations {
            records.push(run.step()?);
        }
        results.push(RepetitionResult {
            repetition,
            run_seed: run.run_seed(),
            dir: PathBuf::new(),
            records,
        });
    }
    Ok(results)
}

/// Pick up a checkpointed run and continue to the configured iteration count
/// plus `extra_iterations`. Records append to the files next to the
/// checkpoint, which is rewritten at the new stopping point.
pub fn resume(
    checkpoint_path: &Path,
    extra_iterations: u64,
    workers: Option<usize>,
    on_record: impl FnMut(&IterationRecord),
) -> Result<Vec<IterationRecord>> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let target = checkpoint.config.run.iterations + extra_iterations;
    let mut run = ExperimentRun::from_checkpoint(checkpoint, workers)?;
    let dir = checkpoint_path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let mut writer = RecordWriter::append_to(&dir)?;
    let records = run.run_to(target, &mut writer, on_record)?;
    run.make_checkpoint().save(checkpoint_path)?;
    Ok(records)
}

/// Largest change between two mean vectors; handy when comparing runs.
pub fn mean_drift(a: &Pgpe, b: &Pgpe) -> f64 {
    vecops::max_abs_diff(a.distribution().mean(), b.distribution().mean())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::EvalOutcome;

    /// Negated squared norm with a fixed per-episode cost, for growth tests.
    struct FixedCost {
        dimension: usize,
        steps: u64,
    }

    impl Objective for FixedCost {
        fn dimension(&self) -> usize {
            self.dimension
        }

        fn evaluate(&self, solution: &[f64], _request: &EvalRequest) -> Result<EvalOutcome> {
            Ok(EvalOutcome {
                fitness: -solution.iter().map(|x| x * x).sum::<f64>(),
                timesteps: self.steps,
                observations: Vec::new(),
            })
        }
    }

    fn sphere_config(extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"
            [problem]
            kind = "sphere"
            dimension = 4

            [pgpe]
            lambda = 8
            sigma0 = 0.5
            {extra}

            [optimizer]
            kind = "clipup"
            v_max = 0.2
            alpha = 0.1

            [run]
            iterations = 5
            seed = 11
        "#
        );
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    fn growth_run(lambda: usize, lambda_max: usize, budget: u64, steps: u64) -> ExperimentRun {
        let text = format!(
            r#"
            [problem]
            kind = "sphere"
            dimension = 4

            [pgpe]
            lambda = {lambda}
            lambda_max = {lambda_max}
            T = {budget}
            sigma0 = 0.5

            [optimizer]
            kind = "clipup"
            v_max = 0.2
            alpha = 0.1

            [run]
            iterations = 1
            seed = 5
        "#
        );
        let config = ExperimentConfig::from_toml_str(&text).unwrap();
        let mut run = ExperimentRun::new(config, 0, Some(2)).unwrap();
        run.problem = Arc::new(FixedCost { dimension: 4, steps });
        run
    }

    #[test]
    fn population_grows_until_the_budget_is_met() {
        // 100 solutions at 500 steps each = 50k < 75k, so one growth block
        // lands the iteration at 200 solutions and 100k steps.
        let mut run = growth_run(100, 800, 75_000, 500);
        let record = run.step().unwrap();
        assert_eq!(record.lambda, 200);
        assert_eq!(record.timesteps_total, 100_000);
    }

    #[test]
    fn growth_stops_at_the_population_cap() {
        // 1-step episodes never meet a 100-step budget, so the population
        // climbs in blocks of 2 pairs until the cap of 12 solutions.
        let mut run = growth_run(4, 12, 100, 1);
        let record = run.step().unwrap();
        assert_eq!(record.lambda, 12);
        assert_eq!(record.timesteps_total, 12);
    }

    #[test]
    fn zero_budget_disables_growth() {
        let mut run = growth_run(4, 12, 0, 1);
        let record = run.step().unwrap();
        assert_eq!(record.lambda, 4);
    }

    #[test]
    fn records_do_not_depend_on_worker_count() {
        let config = sphere_config("");
        let mut solo = ExperimentRun::new(config.clone(), 0, Some(1)).unwrap();
        let mut pooled = ExperimentRun::new(config, 0, Some(3)).unwrap();
        for _ in 0..5 {
            assert_eq!(solo.step().unwrap(), pooled.step().unwrap());
        }
    }

    #[test]
    fn checkpoint_resume_matches_an_uninterrupted_run() {
        let config = sphere_config("");
        let mut straight = ExperimentRun::new(config.clone(), 0, Some(1)).unwrap();
        let mut first_half = ExperimentRun::new(config, 0, Some(1)).unwrap();
        for _ in 0..3 {
            straight.step().unwrap();
            first_half.step().unwrap();
        }
        let checkpoint = first_half.make_checkpoint();
        let mut second_half = ExperimentRun::from_checkpoint(checkpoint, Some(2)).unwrap();
        for _ in 3..6 {
            assert_eq!(straight.step().unwrap(), second_half.step().unwrap());
        }
    }

    #[test]
    fn zero_seed_stride_makes_repetitions_identical() {
        let mut config = sphere_config("");
        config.run.repetitions = 3;
        config.run.seed_stride = 0;
        config.run.iterations = 3;
        let results = run_in_memory(&config, Some(1)).unwrap();
        assert_eq!(results[0].records, results[1].records);
        assert_eq!(results[0].records, results[2].records);

        config.run.seed_stride = 1;
        let spread = run_in_memory(&config, Some(1)).unwrap();
        assert_ne!(spread[0].records, spread[1].records);
    }

    #[test]
    fn eval_episodes_do_not_count_against_the_budget() {
        let mut few = ExperimentRun::new(
            {
                let mut c = sphere_config("");
                c.run.eval_episodes = 1;
                c
            },
            0,
            Some(1),
        )
        .unwrap();
        let mut many = ExperimentRun::new(
            {
                let mut c = sphere_config("");
                c.run.eval_episodes = 8;
                c
            },
            0,
            Some(1),
        )
        .unwrap();
        let a = few.step().unwrap();
        let b = many.step().unwrap();
        assert_eq!(a.timesteps_total, b.timesteps_total);
        // Sphere evaluations are deterministic, so the scores still agree.
        assert_eq!(a.eval_score, b.eval_score);
    }

    #[test]
    fn observation_statistics_accumulate_when_enabled() {
        let text = r#"
            [problem]
            kind = "point_reach"
            obs_norm = true

            [pgpe]
            lambda = 4
            sigma0 = 0.1

            [optimizer]
            kind = "clipup"
            v_max = 0.15
            alpha = 0.075

            [run]
            iterations = 2
            seed = 3
            eval_episodes = 2
        "#;
        let config = ExperimentConfig::from_toml_str(text).unwrap();
        let mut run = ExperimentRun::new(config, 0, Some(2)).unwrap();
        assert_eq!(run.stats.count(), 0);
        let record = run.step().unwrap();
        // Four solutions, every step of every episode contributes one
        // observation row.
        assert_eq!(run.stats.count(), record.timesteps_total);
        assert!(run.stats.count() > 0);
    }

    #[test]
    fn sphere_run_improves_and_files_land_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = sphere_config("");
        config.run.output_dir = dir.path().to_path_buf();
        config.run.iterations = 40;
        config.pgpe.x0 = 1.0;
        let results = run_experiment(&config, Some(2), |_, _| {}).unwrap();
        assert_eq!(results.len(), 1);
        let records = &results[0].records;
        assert!(
            records.last().unwrap().eval_score > records.first().unwrap().eval_score,
            "search should make progress on the sphere"
        );

        let rep_dir = repetition_dir(dir.path(), 0);
        let rows = record::read_csv(&rep_dir.join(record::CSV_FILE)).unwrap();
        assert_eq!(rows.len(), 40);
        let full = record::read_jsonl(&rep_dir.join(record::JSONL_FILE)).unwrap();
        assert_eq!(full.len(), 40);
        assert!(rep_dir.join(CHECKPOINT_FILE).exists());
    }

    #[test]
    fn resume_extends_the_record_files_in_place() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = sphere_config("");
        config.run.output_dir = dir.path().to_path_buf();
        config.run.iterations = 4;
        run_experiment(&config, Some(1), |_, _| {}).unwrap();

        let rep_dir = repetition_dir(dir.path(), 0);
        let checkpoint_path = rep_dir.join(CHECKPOINT_FILE);
        let appended = resume(&checkpoint_path, 3, Some(1), |_| {}).unwrap();
        assert_eq!(appended.len(), 3);
        assert_eq!(appended[0].k, 4);

        let rows = record::read_csv(&rep_dir.join(record::CSV_FILE)).unwrap();
        assert_eq!(rows.len(), 7);
        assert_eq!(rows.last().unwrap().k, 6);

        // The rewritten checkpoint continues from the new stopping point.
        let reloaded = Checkpoint::load(&checkpoint_path).unwrap();
        assert_eq!(reloaded.iteration, 7);
    }

    #[test]
    fn worker_count_prefers_explicit_over_env() {
        assert_eq!(worker_count(Some(3)), 3);
        assert!(worker_count(None) >= 1);
    }
}
