//! Experiment configuration: file schema, validation, and resolution into
//! ready-to-run search state.
//!
//! The on-disk format is TOML with four tables: `[problem]`, `[pgpe]`,
//! `[optimizer]` and `[run]`. Optimizer hyperparameters can be given
//! explicitly (`alpha` plus an initial-sigma source `radius`/`sigma0`), or
//! derived from the tuning heuristics by setting `q` alongside `v_max` —
//! exactly one of the two styles per config.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algorithm::{
    derive_heuristics, sigma_from_radius, FitnessShaping, HeuristicInputs, PgpeConfig,
};
use crate::error::{Error, Result};
use crate::optimizers::{AdamConfig, ClipUpConfig, OptimizerSpec};
use crate::problems::{
    scaled_objective, AnalyticFunction, AnalyticObjective, Objective, PointReachConfig,
    PointReachObjective, PolicySpec, ScaleMode,
};

/// A complete experiment description, as parsed from a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub pgpe: PgpeSection,
    pub optimizer: OptimizerSection,
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.pgpe.validate()?;
        self.optimizer.validate(&self.pgpe)?;
        self.run.validate()?;
        if self.problem.obs_norm && !self.problem.has_observations() {
            return Err(Error::InvalidConfig(
                "obs_norm = true needs a problem that produces observations".into(),
            ));
        }
        if self.pgpe.f_max.is_some() && self.pgpe.ranking.shaping() != FitnessShaping::RewardNorm
        {
            return Err(Error::InvalidConfig(
                "f_max only applies to ranking = \"reward_norm\"".into(),
            ));
        }
        Ok(())
    }

    /// Rewrite a heuristic-style optimizer section (`v_max` + `q`) into the
    /// equivalent explicit one (`alpha` + `radius`). No-op if already explicit.
    /// Presets use this before swapping optimizers between grid cells.
    pub fn materialize_heuristics(&mut self) {
        if let Some(q) = self.optimizer.q.take() {
            let v_max = self.optimizer.v_max.expect("validated: heuristic mode has v_max");
            self.optimizer.alpha = Some(v_max / 2.0);
            self.pgpe.radius = Some(q * v_max);
        }
    }

    /// Resolve the optimizer spec and initial distribution for a problem of
    /// the given dimension. Assumes `validate` passed.
    pub fn resolve(&self, dimension: usize) -> Result<ResolvedExperiment> {
        let (optimizer, sigma0) = self.optimizer.resolve(&self.pgpe, dimension)?;
        let pgpe = PgpeConfig {
            population_size: self.pgpe.lambda,
            max_population: self.pgpe.lambda_max.unwrap_or(self.pgpe.lambda),
            timestep_budget: self.pgpe.timestep_budget,
            sigma_learning_rate: self.pgpe.omega,
            sigma_max_change: self.pgpe.sigma_max_change,
            fitness_shaping: self.pgpe.ranking.shaping(),
            optimizer,
        };
        pgpe.validate()?;
        Ok(ResolvedExperiment {
            pgpe,
            x0: vec![self.pgpe.x0; dimension],
            sigma0,
            f_max: self.pgpe.f_max,
        })
    }
}

/// Problem selection and its knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Search-space dimension; analytic problems only (the control task's
    /// dimension follows from the policy shape).
    #[serde(default)]
    pub dimension: Option<usize>,
    /// Fitness-scale wrapper applied to every evaluation.
    #[serde(default)]
    pub scale: ScaleMode,
    /// Normalize observations with frozen per-iteration running statistics.
    #[serde(default)]
    pub obs_norm: bool,
    /// Policy shape for the control task.
    #[serde(default)]
    pub policy: PolicyKind,
    /// Hidden width when `policy = "mlp"`.
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    /// Give the linear policy a bias term.
    #[serde(default)]
    pub bias: bool,
    /// Control-task geometry; every field has a sensible default.
    #[serde(default)]
    pub env: PointReachConfig,
}

fn default_hidden() -> usize {
    64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Sphere,
    Rastrigin,
    Rosenbrock,
    PointReach,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Linear,
    Mlp,
}

impl ProblemConfig {
    fn analytic_function(&self) -> Option<AnalyticFunction> {
        match self.kind {
            ProblemKind::Sphere => Some(AnalyticFunction::Sphere),
            ProblemKind::Rastrigin => Some(AnalyticFunction::Rastrigin),
            ProblemKind::Rosenbrock => Some(AnalyticFunction::Rosenbrock),
            ProblemKind::PointReach => None,
        }
    }

    pub fn has_observations(&self) -> bool {
        self.kind == ProblemKind::PointReach
    }

    /// Policy shape used for the control task.
    pub fn policy_spec(&self) -> PolicySpec {
        match self.policy {
            PolicyKind::Linear => PolicySpec::Linear { obs_dim: 4, act_dim: 2, bias: self.bias },
            PolicyKind::Mlp => {
                PolicySpec::Mlp { obs_dim: 4, hidden_dim: self.hidden, act_dim: 2 }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ProblemKind::PointReach => {
                if self.dimension.is_some() {
                    return Err(Error::InvalidConfig(
                        "point_reach derives its dimension from the policy; \
                         remove `dimension`"
                            .into(),
                    ));
                }
                if self.policy == PolicyKind::Mlp && self.hidden == 0 {
                    return Err(Error::InvalidConfig("hidden must be >= 1".into()));
                }
                self.env.validate()
            }
            _ => match self.dimension {
                None => Err(Error::InvalidConfig(
                    "analytic problems need `dimension`".into(),
                )),
                Some(0) => Err(Error::InvalidConfig("dimension must be >= 1".into())),
                Some(_) => Ok(()),
            },
        }
    }

    /// Instantiate the objective (with any scale wrapper applied).
    pub fn build(&self) -> Result<Arc<dyn Objective>> {
        let inner: Arc<dyn Objective> = match self.analytic_function() {
            Some(function) => Arc::new(AnalyticObjective::new(
                function,
                self.dimension.expect("validated"),
            )?),
            None => Arc::new(PointReachObjective::new(self.env, self.policy_spec())?),
        };
        Ok(scaled_objective(inner, self.scale))
    }
}

/// Search-loop hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PgpeSection {
    /// Base population size (solutions per iteration).
    pub lambda: usize,
    /// Adaptive-growth ceiling; defaults to `lambda` (growth disabled).
    #[serde(default)]
    pub lambda_max: Option<usize>,
    /// Per-iteration simulator timestep budget; 0 disables growth.
    #[serde(rename = "T", default)]
    pub timestep_budget: u64,
    /// Standard-deviation learning rate.
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Per-dimension cap on sigma change, as a fraction of sigma.
    #[serde(default = "default_sigma_max_change")]
    pub sigma_max_change: f64,
    /// Fitness shaping: `true`/`"centered_rank"`, `false`/`"raw"`, or `"reward_norm"`.
    #[serde(default)]
    pub ranking: ShapingChoice,
    /// Initial search radius `||sigma0||` (explicit mode).
    #[serde(default, with = "crate::serde_ext::opt_float_or_inf")]
    pub radius: Option<f64>,
    /// Uniform per-component initial sigma (explicit-mode alternative to `radius`).
    #[serde(default)]
    pub sigma0: Option<f64>,
    /// Initial mean, broadcast across all dimensions.
    #[serde(default)]
    pub x0: f64,
    /// Known fitness ceiling for `ranking = "reward_norm"`; tracked when absent.
    #[serde(default)]
    pub f_max: Option<f64>,
}

fn default_omega() -> f64 {
    0.1
}

fn default_sigma_max_change() -> f64 {
    0.2
}

impl PgpeSection {
    pub fn validate(&self) -> Result<()> {
        if let (Some(_), Some(_)) = (self.radius, self.sigma0) {
            return Err(Error::InvalidConfig(
                "give `radius` or `sigma0`, not both".into(),
            ));
        }
        for (name, value) in [("radius", self.radius), ("sigma0", self.sigma0)] {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} must be finite and > 0, got {v}"
                    )));
                }
            }
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidConfig("x0 must be finite".into()));
        }
        Ok(())
    }
}

/// `ranking` accepts a bool (`true` = centered rank, `false` = raw) or a
/// shaping name, so configs can spell the common cases tersely.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShapingChoice {
    Flag(bool),
    Named(FitnessShaping),
}

impl Default for ShapingChoice {
    fn default() -> Self {
        ShapingChoice::Flag(true)
    }
}

impl ShapingChoice {
    pub fn shaping(&self) -> FitnessShaping {
        match self {
            ShapingChoice::Flag(true) => FitnessShaping::CenteredRank,
            ShapingChoice::Flag(false) => FitnessShaping::Raw,
            ShapingChoice::Named(s) => *s,
        }
    }
}

impl From<FitnessShaping> for ShapingChoice {
    fn from(shaping: FitnessShaping) -> Self {
        ShapingChoice::Named(shaping)
    }
}

/// Optimizer choice plus hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub kind: OptimizerKind,
    /// Maximum update speed (ClipUp required; may be `inf` for NoClip).
    #[serde(default, with = "crate::serde_ext::opt_float_or_inf")]
    pub v_max: Option<f64>,
    /// Step size (explicit mode).
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Velocity momentum for ClipUp/NoClip.
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    /// Radius factor: setting it selects heuristic mode
    /// (`alpha = v_max/2`, `radius = q * v_max`).
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_epsilon() -> f64 {
    1e-8
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Clipup,
    Noclip,
    Adam,
    Plain,
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Clipup => "clipup",
            OptimizerKind::Noclip => "noclip",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Plain => "plain",
        }
    }
}

impl OptimizerSection {
    /// Heuristic mode is selected by the presence of `q`.
    pub fn is_heuristic(&self) -> bool {
        self.q.is_some()
    }

    pub fn validate(&self, pgpe: &PgpeSection) -> Result<()> {
        if self.is_heuristic() {
            if !matches!(self.kind, OptimizerKind::Clipup | OptimizerKind::Noclip) {
                return Err(Error::InvalidConfig(
                    "heuristic mode (`q`) only derives ClipUp/NoClip settings".into(),
                ));
            }
            match self.v_max {
                Some(v) if v.is_finite() && v > 0.0 => {}
                Some(v) => {
                    return Err(Error::InvalidConfig(format!(
                        "heuristic mode needs finite v_max > 0, got {v}"
                    )))
                }
                None => {
                    return Err(Error::InvalidConfig(
                        "heuristic mode needs `v_max` next to `q`".into(),
                    ))
                }
            }
            if self.alpha.is_some() {
                return Err(Error::InvalidConfig(
                    "give `q` (heuristic) or `alpha` (explicit), not both".into(),
                ));
            }
            if pgpe.radius.is_some() || pgpe.sigma0.is_some() {
                return Err(Error::InvalidConfig(
                    "heuristic mode derives the radius; remove `radius`/`sigma0`".into(),
                ));
            }
            let q = self.q.unwrap();
            if !(q.is_finite() && q > 0.0) {
                return Err(Error::InvalidConfig(format!("q must be finite and > 0, got {q}")));
            }
        } else {
            let alpha = self.alpha.ok_or_else(|| {
                Error::InvalidConfig("explicit mode needs `alpha` (or set `q` for heuristics)".into())
            })?;
            let alpha_floor_ok = match self.kind {
                OptimizerKind::Plain => alpha >= 0.0,
                _ => alpha > 0.0,
            };
            if !(alpha.is_finite() && alpha_floor_ok) {
                return Err(Error::InvalidConfig(format!("alpha out of range: {alpha}")));
            }
            if pgpe.radius.is_none() && pgpe.sigma0.is_none() {
                return Err(Error::InvalidConfig(
                    "explicit mode needs an initial sigma: set `radius` or `sigma0`".into(),
                ));
            }
            match self.kind {
                OptimizerKind::Clipup => {
                    let v = self.v_max.ok_or_else(|| {
                        Error::InvalidConfig("clipup needs `v_max` (inf disables the clip)".into())
                    })?;
                    if !(v > 0.0) {
                        return Err(Error::InvalidConfig(format!("v_max must be > 0, got {v}")));
                    }
                }
                OptimizerKind::Noclip => {
                    if let Some(v) = self.v_max {
                        if !(v > 0.0) {
                            return Err(Error::InvalidConfig(format!(
                                "v_max must be > 0, got {v}"
                            )));
                        }
                    }
                }
                OptimizerKind::Adam | OptimizerKind::Plain => {
                    if self.v_max.is_some() {
                        return Err(Error::InvalidConfig(format!(
                            "v_max does not apply to {}",
                            self.kind.as_str()
                        )));
                    }
                }
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        // beta1/beta2/epsilon are checked by AdamConfig when Adam is selected.
        Ok(())
    }

    /// Produce the optimizer spec and the initial sigma vector.
    fn resolve(&self, pgpe: &PgpeSection, dimension: usize) -> Result<(OptimizerSpec, Vec<f64>)> {
        if let Some(q) = self.q {
            let v_max = self.v_max.expect("validated");
            let derived = derive_heuristics(
                &HeuristicInputs::new(v_max, dimension).with_radius_factor(q),
            )?;
            let clipup = ClipUpConfig {
                step_size: derived.step_size,
                max_speed: v_max,
                momentum: self.momentum,
            };
            let spec = match self.kind {
                OptimizerKind::Clipup => OptimizerSpec::ClipUp(clipup),
                OptimizerKind::Noclip => OptimizerSpec::NoClip(clipup),
                _ => unreachable!("validated"),
            };
            return Ok((spec, derived.sigma0));
        }

        let alpha = self.alpha.expect("validated");
        let sigma0 = match (pgpe.radius, pgpe.sigma0) {
            (Some(radius), None) => sigma_from_radius(radius, dimension),
            (None, Some(s)) => vec![s; dimension],
            _ => unreachable!("validated"),
        };
        let spec = match self.kind {
            OptimizerKind::Clipup => OptimizerSpec::ClipUp(ClipUpConfig {
                step_size: alpha,
                max_speed: self.v_max.expect("validated"),
                momentum: self.momentum,
            }),
            OptimizerKind::Noclip => OptimizerSpec::NoClip(ClipUpConfig {
                step_size: alpha,
                max_speed: self.v_max.unwrap_or(f64::INFINITY),
                momentum: self.momentum,
            }),
            OptimizerKind::Adam => OptimizerSpec::Adam(AdamConfig {
                step_size: alpha,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            }),
            OptimizerKind::Plain => OptimizerSpec::Plain { step_size: alpha },
        };
        spec.validate()?;
        Ok((spec, sigma0))
    }
}

/// Execution parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub iterations: u64,
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: u64,
    /// Per-repetition seed offset; 0 gives every repetition the same seed.
    #[serde(default = "default_seed_stride")]
    pub seed_stride: u64,
    /// Episodes averaged when scoring the distribution mean each iteration.
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: u32,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_repetitions() -> u64 {
    1
}

fn default_seed_stride() -> u64 {
    1
}

fn default_eval_episodes() -> u32 {
    16
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunSection {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be >= 1".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::InvalidConfig("eval_episodes must be >= 1".into()));
        }
        Ok(())
    }
}

/// What a config resolves to once the problem dimension is known.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedExperiment {
    pub pgpe: PgpeConfig,
    pub x0: Vec<f64>,
    pub sigma0: Vec<f64>,
    pub f_max: Option<f64>,
}
