//! Canned experiment grids built on top of the runner.
//!
//! Two presets ship with the CLI:
//!
//! * **Scale table** — reruns one base config under rank shaping and under
//!   raw fitnesses at three reward scales (x1, x1000, /1000), across a column
//!   per optimizer. Rank shaping should hold steady while raw updates swing
//!   with the scale.
//! * **Clip grid** — crosses ClipUp against its unclipped twin over a list of
//!   step sizes and population sizes, reporting final-score bands and speed
//!   traces so the value of the speed clip is visible.
//!
//! Both presets reuse the base config's seeds for every cell, so cells are
//! paired: cell A and cell B see identical start states and episode noise.

use std::path::Path;

use serde::Serialize;

use crate::algorithm::FitnessShaping;
use crate::error::{Error, Result};
use crate::problems::ScaleMode;
use crate::runner::config::{ExperimentConfig, OptimizerKind};
use crate::runner::{run_in_memory, RepetitionResult};

/// Column variants for the scale table.
#[derive(Clone, Debug)]
enum OptimizerColumn {
    /// The base config's own optimizer, untouched.
    Base(String),
    Adam { alpha: f64 },
    Plain { alpha: f64 },
}

impl OptimizerColumn {
    fn label(&self) -> String {
        match self {
            OptimizerColumn::Base(kind) => kind.clone(),
            OptimizerColumn::Adam { alpha } => format!("adam a={alpha}"),
            OptimizerColumn::Plain { alpha } => format!("plain a={alpha}"),
        }
    }

    fn apply(&self, config: &mut ExperimentConfig) {
        match self {
            OptimizerColumn::Base(_) => {}
            OptimizerColumn::Adam { alpha } => {
                config.optimizer.kind = OptimizerKind::Adam;
                config.optimizer.alpha = Some(*alpha);
                config.optimizer.v_max = None;
            }
            OptimizerColumn::Plain { alpha } => {
                config.optimizer.kind = OptimizerKind::Plain;
                config.optimizer.alpha = Some(*alpha);
                config.optimizer.v_max = None;
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScaleTableOptions {
    /// Extra Adam columns, one per step size.
    pub adam_alphas: Vec<f64>,
    /// Optional plain-ascent column.
    pub plain_alpha: Option<f64>,
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleCell {
    pub row: String,
    pub column: String,
    /// Final evaluation score per repetition, mapped back to native fitness
    /// units so rows at different reward scales are comparable.
    pub per_rep: Vec<f64>,
    pub mean: f64,
    pub stdev: f64,
    /// This cell's mean as a percentage of the rank-shaped cell in the same
    /// column; 100 means scaling changed nothing.
    pub pct_of_ranking: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleTable {
    pub columns: Vec<String>,
    pub rows: Vec<String>,
    pub cells: Vec<ScaleCell>,
}

const SCALE_ROWS: [(&str, FitnessShaping, ScaleMode); 4] = [
    ("rank", FitnessShaping::CenteredRank, ScaleMode::Identity),
    ("raw", FitnessShaping::Raw, ScaleMode::Identity),
    ("raw_x1000", FitnessShaping::Raw, ScaleMode::Times1000),
    ("raw_div1000", FitnessShaping::Raw, ScaleMode::Div1000),
];

/// Run the reward-scale sensitivity grid for `base`.
pub fn run_scale_table(
    base: &ExperimentConfig,
    options: &ScaleTableOptions,
) -> Result<ScaleTable> {
    base.validate()?;
    let mut template = base.clone();
    // Columns swap optimizers, so pin the heuristic-derived settings first.
    template.materialize_heuristics();

    let mut columns = vec![OptimizerColumn::Base(template.optimizer.kind.as_str().into())];
    columns.extend(options.adam_alphas.iter().map(|&alpha| OptimizerColumn::Adam { alpha }));
    if let Some(alpha) = options.plain_alpha {
        columns.push(OptimizerColumn::Plain { alpha });
    }

    let mut cells = Vec::new();
    for column in &columns {
        let mut rank_mean = f64::NAN;
        for (row_label, shaping, scale) in SCALE_ROWS {
            let mut config = template.clone();
            column.apply(&mut config);
            config.pgpe.ranking = shaping.into();
            config.problem.scale = scale;
            config.validate()?;

            let results = run_in_memory(&config, options.workers)?;
            // Report in native units so a x1000 row is not trivially 1000x.
            let per_rep: Vec<f64> =
                results.iter().map(|r| r.final_eval() / scale.factor()).collect();
            let mean = mean_of(&per_rep);
            if shaping == FitnessShaping::CenteredRank {
                rank_mean = mean;
            }
            cells.push(ScaleCell {
                row: row_label.to_string(),
                column: column.label(),
                stdev: stdev_of(&per_rep, mean),
                pct_of_ranking: 100.0 * mean / rank_mean,
                per_rep,
                mean,
            });
        }
    }
    Ok(ScaleTable {
        columns: columns.iter().map(|c| c.label()).collect(),
        rows: SCALE_ROWS.iter().map(|(label, _, _)| label.to_string()).collect(),
        cells,
    })
}

impl ScaleTable {
    pub fn cell(&self, row: &str, column: &str) -> Option<&ScaleCell> {
        self.cells.iter().find(|c| c.row == row && c.column == column)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["row", "column", "mean", "stdev", "pct_of_ranking", "per_rep"])?;
        for cell in &self.cells {
            let reps =
                cell.per_rep.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
            writer.write_record([
                cell.row.as_str(),
                cell.column.as_str(),
                &cell.mean.to_string(),
                &cell.stdev.to_string(),
                &cell.pct_of_ranking.to_string(),
                &reps,
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Fixed-width terminal rendering: `mean (pct%)` per cell.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<14}", "row"));
        for column in &self.columns {
            out.push_str(&format!("{column:>24}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{row:<14}"));
            for column in &self.columns {
                match self.cell(row, column) {
                    Some(cell) => out.push_str(&format!(
                        "{:>24}",
                        format!("{:.4} ({:.1}%)", cell.mean, cell.pct_of_ranking)
                    )),
                    None => out.push_str(&format!("{:>24}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Spread statistics over repetitions for one reported quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Band {
    pub mean: f64,
    pub stdev: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

pub fn band(values: &[f64]) -> Band {
    let mean = mean_of(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Band {
        mean,
        stdev: stdev_of(values, mean),
        median,
        min: sorted[0],
        max: sorted[n - 1],
    }
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn stdev_of(values: &[f64], mean: f64) -> f64 {
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

#[derive(Clone, Debug)]
pub struct ClipGridOptions {
    /// Step sizes to cross with each optimizer.
    pub alphas: Vec<f64>,
    /// Population sizes to cross; empty means "keep the base config's".
    pub lambdas: Vec<usize>,
    /// A run counts as solved when its best evaluation reaches this.
    pub solve_threshold: Option<f64>,
    pub workers: Option<usize>,
}

/// Per-iteration spread across repetitions.
#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub k: u64,
    pub eval: Band,
    pub speed: Band,
}

/// One (optimizer, alpha, lambda) cell of the clip grid.
#[derive(Clone, Debug, Serialize)]
pub struct ClipCombo {
    pub optimizer: String,
    pub alpha: f64,
    pub lambda: usize,
    pub final_eval: Band,
    pub best_eval: Band,
    /// Fraction of repetitions whose best evaluation met the threshold.
    pub solved_fraction: Option<f64>,
    /// Largest mean-update norm seen anywhere in the cell.
    pub max_speed: f64,
    /// Iterations with the clip engaged, averaged over repetitions.
    pub mean_clipped_iterations: f64,
    pub curves: Vec<CurvePoint>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClipGrid {
    pub combos: Vec<ClipCombo>,
}

/// Cross ClipUp/NoClip with the given step sizes and population sizes.
pub fn run_clip_grid(base: &ExperimentConfig, options: &ClipGridOptions) -> Result<ClipGrid> {
    base.validate()?;
    if options.alphas.is_empty() {
        return Err(Error::InvalidConfig("clip grid needs at least one alpha".into()));
    }
    let mut template = base.clone();
    template.materialize_heuristics();
    if !matches!(template.optimizer.kind, OptimizerKind::Clipup | OptimizerKind::Noclip) {
        return Err(Error::InvalidConfig(
            "the clip grid compares clipup/noclip; start from a clipup base config".into(),
        ));
    }
    // Growth settings scale with lambda; remember the cap as a multiplier.
    let growth_factor = template
        .pgpe
        .lambda_max
        .map(|max| max / template.pgpe.lambda)
        .unwrap_or(1);

    let lambdas: Vec<usize> = if options.lambdas.is_empty() {
        vec![template.pgpe.lambda]
    } else {
        options.lambdas.clone()
    };

    let mut combos = Vec::new();
    for kind in [OptimizerKind::Clipup, OptimizerKind::Noclip] {
        for &alpha in &options.alphas {
            for &lambda in &lambdas {
                let mut config = template.clone();
                config.optimizer.kind = kind;
                config.optimizer.alpha = Some(alpha);
                config.pgpe.lambda = lambda;
                config.pgpe.lambda_max = Some(lambda * growth_factor);
                config.validate()?;
                let results = run_in_memory(&config, options.workers)?;
                combos.push(summarize_combo(kind, alpha, lambda, &results, options));
            }
        }
    }
    Ok(ClipGrid { combos })
}

fn summarize_combo(
    kind: OptimizerKind,
    alpha: f64,
    lambda: usize,
    results: &[RepetitionResult],
    options: &ClipGridOptions,
) -> ClipCombo {
    let finals: Vec<f64> = results.iter().map(|r| r.final_eval()).collect();
    let bests: Vec<f64> = results.iter().map(|r| r.best_eval()).collect();
    let solved_fraction = options.solve_threshold.map(|threshold| {
        bests.iter().filter(|&&b| b >= threshold).count() as f64 / bests.len() as f64
    });
    let iterations = results.iter().map(|r| r.records.len()).min().unwrap_or(0);
    let curves = (0..iterations)
        .map(|k| {
            let evals: Vec<f64> = results.iter().map(|r| r.records[k].eval_score).collect();
            let speeds: Vec<f64> = results.iter().map(|r| r.records[k].speed).collect();
            CurvePoint { k: k as u64, eval: band(&evals), speed: band(&speeds) }
        })
        .collect();
    let max_speed = results
        .iter()
        .flat_map(|r| r.records.iter().map(|rec| rec.speed))
        .fold(0.0, f64::max);
    let mean_clipped_iterations = results
        .iter()
        .map(|r| r.records.iter().filter(|rec| rec.clip_engaged).count() as f64)
        .sum::<f64>()
        / results.len() as f64;
    ClipCombo {
        optimizer: kind.as_str().to_string(),
        alpha,
        lambda,
        final_eval: band(&finals),
        best_eval: band(&bests),
        solved_fraction,
        max_speed,
        mean_clipped_iterations,
        curves,
    }
}

impl ClipCombo {
    /// Filesystem-safe cell tag, e.g. `clipup_a0p1_l20`.
    pub fn tag(&self) -> String {
        format!("{}_a{}_l{}", self.optimizer, self.alpha, self.lambda).replace('.', "p")
    }
}

impl ClipGrid {
    /// One summary row per combo plus a per-combo curve file.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut summary = csv::Writer::from_path(dir.join("summary.csv"))?;
        summary.write_record([
            "optimizer",
            "alpha",
            "lambda",
            "final_mean",
            "final_stdev",
            "final_median",
            "final_min",
            "final_max",
            "best_mean",
            "solved_fraction",
            "max_speed",
            "mean_clipped_iterations",
        ])?;
        for combo in &self.combos {
            summary.write_record([
                combo.optimizer.clone(),
                combo.alpha.to_string(),
                combo.lambda.to_string(),
                combo.final_eval.mean.to_string(),
                combo.final_eval.stdev.to_string(),
                combo.final_eval.median.to_string(),
                combo.final_eval.min.to_string(),
                combo.final_eval.max.to_string(),
                combo.best_eval.mean.to_string(),
                combo.solved_fraction.map(|f| f.to_string()).unwrap_or_default(),
                combo.max_speed.to_string(),
                combo.mean_clipped_iterations.to_string(),
            ])?;
        }
        summary.flush()?;

        for combo in &self.combos {
            let mut curves =
                csv::Writer::from_path(dir.join(format!("curves_{}.csv", combo.tag())))?;
            curves.write_record([
                "k",
                "eval_mean",
                "eval_stdev",
                "eval_median",
                "eval_min",
                "eval_max",
                "speed_mean",
                "speed_max",
            ])?;
            for point in &combo.curves {
                curves.write_record([
                    point.k.to_string(),
                    point.eval.mean.to_string(),
                    point.eval.stdev.to_string(),
                    point.eval.median.to_string(),
                    point.eval.min.to_string(),
                    point.eval.max.to_string(),
                    point.speed.mean.to_string(),
                    point.speed.max.to_string(),
                ])?;
            }
            curves.flush()?;
        }
        Ok(())
    }

    /// Terminal summary, one line per combo.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<8} {:>10} {:>8} {:>14} {:>14} {:>12} {:>10}\n",
            "opt", "alpha", "lambda", "final(mean)", "final(median)", "stdev", "solved"
        ));
        for combo in &self.combos {
            out.push_str(&format!(
                "{:<8} {:>10} {:>8} {:>14.4} {:>14.4} {:>12.4} {:>10}\n",
                combo.optimizer,
                combo.alpha,
                combo.lambda,
                combo.final_eval.mean,
                combo.final_eval.median,
                combo.final_eval.stdev,
                combo
                    .solved_fraction
                    .map(|f| format!("{f:.2}"))
                    .unwrap_or_else(|| "-".to_string()),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_base() -> ExperimentConfig {
        ExperimentConfig::from_toml_str(
            r#"
            [problem]
            kind = "sphere"
            dimension = 4

            [pgpe]
            lambda = 8
            x0 = 1.0

            [optimizer]
            kind = "clipup"
            v_max = 0.2
            q = 10

            [run]
            iterations = 6
            seed = 21
            repetitions = 2
        "#,
        )
        .unwrap()
    }

    #[test]
    fn scale_table_pins_rank_rows_at_100_percent() {
        let table = run_scale_table(
            &tiny_base(),
            &ScaleTableOptions {
                adam_alphas: vec![0.05],
                plain_alpha: None,
                workers: Some(1),
            },
        )
        .unwrap();
        assert_eq!(table.columns, vec!["clipup".to_string(), "adam a=0.05".to_string()]);
        assert_eq!(table.cells.len(), 8, "4 rows x 2 columns");
        for column in &table.columns {
            let rank = table.cell("rank", column).unwrap();
            assert!((rank.pct_of_ranking - 100.0).abs() < 1e-9);
            assert_eq!(rank.per_rep.len(), 2);
        }
        assert!(table.cells.iter().all(|c| c.mean.is_finite()));
    }

    #[test]
    fn rank_rows_ignore_reward_scale_entirely() {
        // Shaping discards magnitudes, so a rank-shaped run at x1000 must
        // match the identity-scale run bit for bit (after unit conversion).
        let mut scaled = tiny_base();
        scaled.materialize_heuristics();
        scaled.problem.scale = ScaleMode::Times1000;
        let plain = {
            let mut c = tiny_base();
            c.materialize_heuristics();
            c
        };
        let a = run_in_memory(&plain, Some(1)).unwrap();
        let b = run_in_memory(&scaled, Some(1)).unwrap();
        for (ra, rb) in a[0].records.iter().zip(&b[0].records) {
            assert_eq!(ra.speed, rb.speed);
            assert_eq!(ra.sigma_norm, rb.sigma_norm);
            // Unit conversion commutes with the episode average only up to
            // rounding, so this one is a relative comparison.
            let diff = (ra.eval_score * 1000.0 - rb.eval_score).abs();
            assert!(diff <= 1e-12 * rb.eval_score.abs());
        }
    }

    #[test]
    fn clip_grid_covers_both_optimizers() {
        let grid = run_clip_grid(
            &tiny_base(),
            &ClipGridOptions {
                alphas: vec![0.1, 0.4],
                lambdas: vec![],
                solve_threshold: Some(-1e9),
                workers: Some(1),
            },
        )
        .unwrap();
        assert_eq!(grid.combos.len(), 4, "2 optimizers x 2 alphas x 1 lambda");
        let clipup: Vec<_> =
            grid.combos.iter().filter(|c| c.optimizer == "clipup").collect();
        assert_eq!(clipup.len(), 2);
        for combo in &clipup {
            assert!(
                combo.max_speed <= 0.2 + 1e-12,
                "clipup speed capped at v_max, got {}",
                combo.max_speed
            );
        }
        assert!(grid.combos.iter().all(|c| c.solved_fraction == Some(1.0)));
        assert!(grid.combos.iter().all(|c| c.curves.len() == 6));
    }

    #[test]
    fn band_statistics_are_correct_on_a_small_sample() {
        let b = band(&[3.0, 1.0, 2.0, 4.0]);
        assert_eq!(b.mean, 2.5);
        assert_eq!(b.median, 2.5);
        assert_eq!(b.min, 1.0);
        assert_eq!(b.max, 4.0);
        assert!((b.stdev - (1.25f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn grid_csv_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let grid = run_clip_grid(
            &tiny_base(),
            &ClipGridOptions {
                alphas: vec![0.1],
                lambdas: vec![8],
                solve_threshold: None,
                workers: Some(1),
            },
        )
        .unwrap();
        grid.write_csv(dir.path()).unwrap();
        assert!(dir.path().join("summary.csv").exists());
        assert!(dir.path().join("curves_clipup_a0p1_l8.csv").exists());

        let table = run_scale_table(
            &tiny_base(),
            &ScaleTableOptions { adam_alphas: vec![], plain_alpha: Some(0.02), workers: Some(1) },
        )
        .unwrap();
        let path = dir.path().join("scale.csv");
        table.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("row,column,mean,stdev,pct_of_ranking,per_rep"));
        assert!(!table.render().is_empty());
        assert!(!grid.render().is_empty());
    }
}
