//! Command-line experiment harness for the search library.
//!
//! Subcommands map onto the runner: `run` executes one config, `sweep` runs a
//! cartesian grid of config overrides, `preset-scale` and `preset-clip`
//! produce the canned comparison grids, `resume` continues from a checkpoint,
//! and `report` summarizes record files after the fact.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pgpe::runner::config::ExperimentConfig;
use pgpe::runner::presets::{
    run_clip_grid, run_scale_table, ClipGridOptions, ScaleTableOptions,
};
use pgpe::runner::record::{self, IterationRecord};
use pgpe::runner;

#[derive(Parser)]
#[command(
    name = "pgpe",
    about = "Distribution-based search experiments",
    long_about = "Runs distribution-based evolutionary search experiments from TOML configs.\n\
                  Evaluation parallelism defaults to all cores; override with --workers\n\
                  or the PGPE_WORKERS environment variable."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonRunArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Evaluation worker threads (default: PGPE_WORKERS or all cores).
    #[arg(short, long)]
    workers: Option<usize>,
    /// Suppress per-iteration progress lines.
    #[arg(short, long)]
    quiet: bool,
}

impl CommonRunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::from_path(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        if let Some(output) = &self.output {
            config.run.output_dir = output.clone();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config (all repetitions).
    Run(CommonRunArgs),
    /// Run a grid of configs produced by `--set key=v1,v2` overrides.
    Sweep {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Config override `table.key=value1,value2,...`; repeat for a grid.
        #[arg(long = "set", value_name = "KEY=V1,V2,...", required = true)]
        sets: Vec<String>,
    },
    /// Fitness-scale sensitivity table: rank shaping vs raw at x1, x1000, /1000.
    PresetScale {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Add an Adam column with this step size (repeatable).
        #[arg(long = "adam-alpha")]
        adam_alphas: Vec<f64>,
        /// Add a plain-ascent column with this step size.
        #[arg(long = "plain-alpha")]
        plain_alpha: Option<f64>,
    },
    /// ClipUp vs NoClip grid over step sizes and population sizes.
    PresetClip {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Step sizes to test (repeatable; required).
        #[arg(long = "alpha", required = true)]
        alphas: Vec<f64>,
        /// Population sizes to test (repeatable; default: the config's).
        #[arg(long = "lambda")]
        lambdas: Vec<usize>,
        /// Count a repetition as solved when its best evaluation reaches this.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Continue a checkpointed run where it stopped.
    Resume {
        /// Path to a checkpoint.json written by `run`.
        checkpoint: PathBuf,
        /// Iterations to run beyond the config's target.
        #[arg(long, default_value_t = 0)]
        extra: u64,
        #[arg(short, long)]
        workers: Option<usize>,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Summarize the record files under a run's output directory.
    Report {
        /// Output directory passed to `run` (or a single repetition directory).
        dir: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(common) => run(common),
        Command::Sweep { common, sets } => sweep(common, &sets),
        Command::PresetScale { common, adam_alphas, plain_alpha } => {
            preset_scale(common, adam_alphas, plain_alpha)
        }
        Command::PresetClip { common, alphas, lambdas, threshold } => {
            preset_clip(common, alphas, lambdas, threshold)
        }
        Command::Resume { checkpoint, extra, workers, quiet } => {
            resume(&checkpoint, extra, workers, quiet)
        }
        Command::Report { dir } => report(&dir),
    }
}

fn progress_line(repetition: Option<u64>, record: &IterationRecord) -> String {
    format!(
        "{}k {:>4}  lambda {:>5}  eval {:>14.6}  raw_best {:>14.6}  \
         speed {:>10.6}  sigma {:>10.6}{}",
        repetition.map(|r| format!("rep {r} ")).unwrap_or_default(),
        record.k,
        record.lambda,
        record.eval_score,
        record.raw_best,
        record.speed,
        record.sigma_norm,
        if record.clip_engaged { "  [clip]" } else { "" },
    )
}

fn run(common: CommonRunArgs) -> Result<()> {
    let config = common.load()?;
    let quiet = common.quiet;
    let results = runner::run_experiment(&config, common.workers, |rep, record| {
        if !quiet {
            println!("{}", progress_line(Some(rep), record));
        }
    })?;
    for result in &results {
        println!(
            "rep {} done: seed {}, final eval {:.6}, best eval {:.6} -> {}",
            result.repetition,
            result.run_seed,
            result.final_eval(),
            result.best_eval(),
            result.dir.display(),
        );
    }
    let mean_final =
        results.iter().map(|r| r.final_eval()).sum::<f64>() / results.len() as f64;
    println!("mean final eval over {} repetition(s): {mean_final:.6}", results.len());
    Ok(())
}

/// One `--set` flag: a dotted config path and the values to sweep over.
struct SweepAxis {
    key: Vec<String>,
    raw_values: Vec<String>,
}

fn parse_axis(spec: &str) -> Result<SweepAxis> {
    let (key, values) = spec
        .split_once('=')
        .with_context(|| format!("--set needs key=v1,v2,... , got `{spec}`"))?;
    let key: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    let raw_values: Vec<String> =
        values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if key.iter().any(|part| part.is_empty()) || raw_values.is_empty() {
        bail!("--set needs key=v1,v2,... , got `{spec}`");
    }
    Ok(SweepAxis { key, raw_values })
}

/// Parse an override value with TOML literal syntax, falling back to a string
/// (so `lambda=20`, `alpha=0.1`, `ranking=false` and `kind=adam` all work).
fn parse_toml_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(root: &mut toml::Value, key: &[String], value: toml::Value) -> Result<()> {
    let mut node = root;
    for part in &key[..key.len() - 1] {
        node = node
            .as_table_mut()
            .with_context(|| format!("config has no table `{part}`"))?
            .entry(part.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .with_context(|| format!("`{}` is not a table", key[..key.len() - 1].join(".")))?
        .insert(key.last().expect("non-empty key").clone(), value);
    Ok(())
}

fn sweep(common: CommonRunArgs, sets: &[String]) -> Result<()> {
    let base = common.load()?;
    let axes: Vec<SweepAxis> = sets.iter().map(|s| parse_axis(s)).collect::<Result<_>>()?;
    let base_value =
        toml::Value::try_from(&base).context("re-encoding the base config for overrides")?;
    let base_dir = base.run.output_dir.clone();

    // Walk the cartesian product with a mixed-radix counter.
    let mut indices = vec![0usize; axes.len()];
    let total: usize = axes.iter().map(|a| a.raw_values.len()).product();
    println!("sweep: {total} cell(s)");
    let mut cell = 0usize;
    loop {
        let mut value = base_value.clone();
        let mut label_parts = Vec::new();
        for (axis, &index) in axes.iter().zip(&indices) {
            let raw = &axis.raw_values[index];
            set_path(&mut value, &axis.key, parse_toml_literal(raw))?;
            label_parts.push(format!("{}={raw}", axis.key.join(".")));
        }
        let label = label_parts.join("_").replace('/', "-");
        let mut config: ExperimentConfig = value
            .try_into()
            .with_context(|| format!("cell `{label}` is not a valid config"))?;
        config.run.output_dir = base_dir.join(&label);
        config.validate().with_context(|| format!("cell `{label}`"))?;

        let results = runner::run_experiment(&config, common.workers, |_, _| {})?;
        let mean_final =
            results.iter().map(|r| r.final_eval()).sum::<f64>() / results.len() as f64;
        cell += 1;
        println!("[{cell}/{total}] {label}: mean final eval {mean_final:.6}");

        // Increment the counter; done once it wraps.
        let mut done = true;
        for (slot, axis) in indices.iter_mut().zip(&axes) {
            *slot += 1;
            if *slot < axis.raw_values.len() {
                done = false;
                break;
            }
            *slot = 0;
        }
        if done {
            break;
        }
    }
    Ok(())
}

fn preset_scale(
    common: CommonRunArgs,
    adam_alphas: Vec<f64>,
    plain_alpha: Option<f64>,
) -> Result<()> {
    let config = common.load()?;
    let table = run_scale_table(
        &config,
        &ScaleTableOptions { adam_alphas, plain_alpha, workers: common.workers },
    )?;
    print!("{}", table.render());
    std::fs::create_dir_all(&config.run.output_dir)?;
    let csv_path = config.run.output_dir.join("scale_table.csv");
    table.write_csv(&csv_path)?;
    println!("written: {}", csv_path.display());
    Ok(())
}

fn preset_clip(
    common: CommonRunArgs,
    alphas: Vec<f64>,
    lambdas: Vec<usize>,
    threshold: Option<f64>,
) -> Result<()> {
    let config = common.load()?;
    let grid = run_clip_grid(
        &config,
        &ClipGridOptions { alphas, lambdas, solve_threshold: threshold, workers: common.workers },
    )?;
    print!("{}", grid.render());
    grid.write_csv(&config.run.output_dir)?;
    println!("written: {}", config.run.output_dir.join("summary.csv").display());
    Ok(())
}

fn resume(checkpoint: &Path, extra: u64, workers: Option<usize>, quiet: bool) -> Result<()> {
    let records = runner::resume(checkpoint, extra, workers, |record| {
        if !quiet {
            println!("{}", progress_line(None, record));
        }
    })?;
    match records.last() {
        Some(last) => println!(
            "resumed through k {} (eval {:.6}); checkpoint rewritten",
            last.k, last.eval_score
        ),
        None => println!("checkpoint already at its target; nothing to do"),
    }
    Ok(())
}

fn report(dir: &Path) -> Result<()> {
    let mut rep_dirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("rep"))
                    .unwrap_or(false)
        })
        .collect();
    rep_dirs.sort();
    if rep_dirs.is_empty() {
        // Allow pointing straight at one repetition directory.
        rep_dirs.push(dir.to_path_buf());
    }

    let mut finals = Vec::new();
    for rep_dir in &rep_dirs {
        let csv_path = rep_dir.join(record::CSV_FILE);
        let rows = record::read_csv(&csv_path)
            .with_context(|| format!("reading {}", csv_path.display()))?;
        let summary = record::summarize(&rows)?;
        println!(
            "{}: {} iteration(s), {} timesteps, final eval {:.6}, best eval {:.6}, \
             final sigma {:.6}, max speed {:.6}, clipped {}x",
            rep_dir.display(),
            summary.iterations,
            summary.total_timesteps,
            summary.final_eval,
            summary.best_eval,
            summary.final_sigma_norm,
            summary.max_speed,
            summary.clipped_iterations,
        );
        finals.push(summary.final_eval);
    }
    if finals.len() > 1 {
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!("mean final eval over {} repetition(s): {mean:.6}", finals.len());
    }
    Ok(())
}
