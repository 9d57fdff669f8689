//! Linear and one-hidden-layer policies mapped to and from flat parameter vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a policy, independent of any particular parameter values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    /// `action = obs . W (+ b)`.
    Linear { obs_dim: usize, act_dim: usize, bias: bool },
    /// `action = tanh(obs . W1 + b1) . W2 + b2`.
    Mlp { obs_dim: usize, hidden_dim: usize, act_dim: usize },
}

impl PolicySpec {
    /// Number of parameters in the flattened vector for this shape.
    pub fn param_count(&self) -> usize {
        match *self {
            PolicySpec::Linear { obs_dim, act_dim, bias } => {
                obs_dim * act_dim + if bias { act_dim } else { 0 }
            }
            PolicySpec::Mlp { obs_dim, hidden_dim, act_dim } => {
                obs_dim * hidden_dim + hidden_dim + hidden_dim * act_dim + act_dim
            }
        }
    }

    pub fn obs_dim(&self) -> usize {
        match *self {
            PolicySpec::Linear { obs_dim, .. } | PolicySpec::Mlp { obs_dim, .. } => obs_dim,
        }
    }

    pub fn act_dim(&self) -> usize {
        match *self {
            PolicySpec::Linear { act_dim, .. } | PolicySpec::Mlp { act_dim, .. } => act_dim,
        }
    }

    /// Build a policy from a flat parameter vector.
    ///
    /// Layout: weight matrices row-major (observation-major), each followed by
    /// its bias vector. `flatten` inverts this exactly.
    pub fn unflatten(&self, params: &[f64]) -> Result<Policy> {
        let expected = self.param_count();
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, actual: params.len() });
        }
        match *self {
            PolicySpec::Linear { obs_dim, act_dim, bias } => {
                let (w, rest) = params.split_at(obs_dim * act_dim);
                Ok(Policy::Linear(LinearPolicy {
                    obs_dim,
                    act_dim,
                    weights: w.to_vec(),
                    bias: bias.then(|| rest.to_vec()),
                }))
            }
            PolicySpec::Mlp { obs_dim, hidden_dim, act_dim } => {
                let (w1, rest) = params.split_at(obs_dim * hidden_dim);
                let (b1, rest) = rest.split_at(hidden_dim);
                let (w2, b2) = rest.split_at(hidden_dim * act_dim);
                Ok(Policy::Mlp(MlpPolicy {
                    obs_dim,
                    hidden_dim,
                    act_dim,
                    w1: w1.to_vec(),
                    b1: b1.to_vec(),
                    w2: w2.to_vec(),
                    b2: b2.to_vec(),
                }))
            }
        }
    }
}

/// A concrete policy: parameters arranged for fast evaluation.
#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Linear(LinearPolicy),
    Mlp(MlpPolicy),
}

impl Policy {
    /// Map an observation to an action; no squashing is applied to the output.
    pub fn act(&self, obs: &[f64]) -> Vec<f64> {
        match self {
            Policy::Linear(p) => p.act(obs),
            Policy::Mlp(p) => p.act(obs),
        }
    }

    /// Flatten back to the parameter vector `unflatten` was given.
    pub fn flatten(&self) -> Vec<f64> {
        match self {
            Policy::Linear(p) => {
                let mut out = p.weights.clone();
                if let Some(b) = &p.bias {
                    out.extend_from_slice(b);
                }
                out
            }
            Policy::Mlp(p) => {
                let mut out = p.w1.clone();
                out.extend_from_slice(&p.b1);
                out.extend_from_slice(&p.w2);
                out.extend_from_slice(&p.b2);
                out
            }
        }
    }

    pub fn spec(&self) -> PolicySpec {
        match self {
            Policy::Linear(p) => PolicySpec::Linear {
                obs_dim: p.obs_dim,
                act_dim: p.act_dim,
                bias: p.bias.is_some(),
            },
            Policy::Mlp(p) => PolicySpec::Mlp {
                obs_dim: p.obs_dim,
                hidden_dim: p.hidden_dim,
                act_dim: p.act_dim,
            },
        }
    }
}

/// Affine map from observations to actions.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPolicy {
    obs_dim: usize,
    act_dim: usize,
    /// Row-major `obs_dim x act_dim`.
    weights: Vec<f64>,
    bias: Option<Vec<f64>>,
}

impl LinearPolicy {
    fn act(&self, obs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(obs.len(), self.obs_dim);
        let mut action = match &self.bias {
            Some(b) => b.clone(),
            None => vec![0.0; self.act_dim],
        };
        for (i, &o) in obs.iter().enumerate() {
            let row = &self.weights[i * self.act_dim..(i + 1) * self.act_dim];
            for (a, &w) in action.iter_mut().zip(row) {
                *a += o * w;
            }
        }
        action
    }
}

/// One tanh hidden layer, linear readout.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpPolicy {
    obs_dim: usize,
    hidden_dim: usize,
    act_dim: usize,
    /// Row-major `obs_dim x hidden_dim`.
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// Row-major `hidden_dim x act_dim`.
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl MlpPolicy {
    fn act(&self, obs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(obs.len(), self.obs_dim);
        let mut hidden = self.b1.clone();
        for (i, &o) in obs.iter().enumerate() {
            let row = &self.w1[i * self.hidden_dim..(i + 1) * self.hidden_dim];
            for (h, &w) in hidden.iter_mut().zip(row) {
                *h += o * w;
            }
        }
        for h in hidden.iter_mut() {
            *h = h.tanh();
        }
        let mut action = self.b2.clone();
        for (i, &h) in hidden.iter().enumerate() {
            let row = &self.w2[i * self.act_dim..(i + 1) * self.act_dim];
            for (a, &w) in action.iter_mut().zip(row) {
                *a += h * w;
            }
        }
        action
    }
}
