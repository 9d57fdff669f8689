//! Momentum ascent on the normalized gradient, with an update-norm speed limit.

use serde::{Deserialize, Serialize};

use super::{ensure_gradient, AscentDirection};
use crate::error::{Error, Result};
use crate::vecops::l2_norm;

/// ClipUp hyperparameters.
///
/// Because the gradient is normalized before use, `step_size` and `max_speed`
/// are both expressed directly in solution-space distance: fitness scale never
/// leaks into the update magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipUpConfig {
    /// Norm of the gradient term added to the velocity each step.
    pub step_size: f64,
    /// Upper bound on the norm of any returned update.
    /// May be `+inf`, which disables clipping entirely.
    #[serde(with = "crate::serde_ext::float_or_inf")]
    pub max_speed: f64,
    /// Momentum factor in `[0, 1)` applied to the previous velocity.
    pub momentum: f64,
}

impl ClipUpConfig {
    /// Rule-of-thumb configuration from the speed limit alone:
    /// step size `max_speed / 2`, momentum `0.9`.
    pub fn from_max_speed(max_speed: f64) -> Self {
        ClipUpConfig { step_size: max_speed / 2.0, max_speed, momentum: 0.9 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step size must be finite and > 0, got {}",
                self.step_size
            )));
        }
        if !(self.max_speed > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "max speed must be > 0 (inf allowed), got {}",
                self.max_speed
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }

    /// Supremum of reachable velocity norms when clipping is off:
    /// `step_size / (1 - momentum)`.
    pub fn velocity_bound(&self) -> f64 {
        self.step_size / (1.0 - self.momentum)
    }
}

/// ClipUp mutable state: the velocity carried between steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipUpState {
    velocity: Vec<f64>,
}

impl ClipUpState {
    pub fn new(dimension: usize) -> Self {
        ClipUpState { velocity: vec![0.0; dimension] }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn dimension(&self) -> usize {
        self.velocity.len()
    }
}

/// One ClipUp step.
///
/// The velocity becomes `momentum * v + step_size * g / ||g||`, rescaled onto
/// the sphere of radius `max_speed` whenever it leaves it; the new velocity is
/// returned as the update. A zero gradient contributes nothing, so the
/// velocity simply decays.
pub fn clipup_step(
    state: &mut ClipUpState,
    config: &ClipUpConfig,
    gradient: &[f64],
) -> Result<AscentDirection> {
    step_impl(state, config, gradient, true)
}

/// ClipUp with the speed limit disabled; everything else is identical.
pub fn noclip_step(
    state: &mut ClipUpState,
    config: &ClipUpConfig,
    gradient: &[f64],
) -> Result<AscentDirection> {
    step_impl(state, config, gradient, false)
}

fn step_impl(
    state: &mut ClipUpState,
    config: &ClipUpConfig,
    gradient: &[f64],
    clip: bool,
) -> Result<AscentDirection> {
    ensure_gradient(gradient, state.dimension())?;

    let gradient_norm = l2_norm(gradient);
    for v in state.velocity.iter_mut() {
        *v *= config.momentum;
    }
    if gradient_norm > 0.0 {
        let scale = config.step_size / gradient_norm;
        for (v, g) in state.velocity.iter_mut().zip(gradient) {
            *v += scale * g;
        }
    }

    let mut clipped = false;
    if clip {
        let speed = l2_norm(&state.velocity);
        if speed > config.max_speed {
            let ratio = config.max_speed / speed;
            for v in state.velocity.iter_mut() {
                *v *= ratio;
            }
            clipped = true;
        }
    }

    Ok(AscentDirection { update: state.velocity.clone(), clipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecops::max_abs_diff;
    use proptest::prelude::*;

    const CONFIG: ClipUpConfig = ClipUpConfig { step_size: 0.15, max_speed: 0.3, momentum: 0.9 };

    #[test]
    fn first_step_moves_along_the_normalized_gradient() {
        let mut state = ClipUpState::new(2);
        let dir = clipup_step(&mut state, &CONFIG, &[3.0, 4.0]).unwrap();
        // ||g|| = 5, so the update is 0.15 * (0.6, 0.8).
        assert!(max_abs_diff(&dir.update, &[0.09, 0.12]) < 1e-15, "got {:?}", dir.update);
        assert!(!dir.clipped, "||v|| = 0.15 is inside the 0.3 limit");
    }

    #[test]
    fn momentum_buildup_triggers_the_clip() {
        let mut state = ClipUpState { velocity: vec![0.28, 0.0] };
        let dir = clipup_step(&mut state, &CONFIG, &[2.0, 0.0]).unwrap();
        // 0.9 * 0.28 + 0.15 = 0.402 exceeds 0.3, so the velocity is rescaled.
        assert!(dir.clipped);
        assert!((dir.update[0] - 0.3).abs() < 1e-12, "got {:?}", dir.update);
        assert_eq!(dir.update[1], 0.0);
    }

    #[test]
    fn zero_gradient_just_decays_the_velocity() {
        let mut state = ClipUpState { velocity: vec![0.1, -0.2] };
        let dir = clipup_step(&mut state, &CONFIG, &[0.0, 0.0]).unwrap();
        assert_eq!(dir.update, vec![0.9 * 0.1, 0.9 * -0.2]);
        assert!(!dir.clipped);
    }

    #[test]
    fn noclip_matches_clipup_while_under_the_limit() {
        let mut clipped = ClipUpState::new(3);
        let mut unclipped = ClipUpState::new(3);
        let g = [1.0, -2.0, 0.5];
        let a = clipup_step(&mut clipped, &CONFIG, &g).unwrap();
        let b = noclip_step(&mut unclipped, &CONFIG, &g).unwrap();
        assert_eq!(a.update, b.update, "first step is far below the speed limit");
    }

    #[test]
    fn noclip_exceeds_the_limit_when_step_size_outruns_it() {
        // step_size / (1 - momentum) = 1.5 > max_speed, and a constant
        // gradient direction lets the velocity accumulate all the way there.
        let mut state = ClipUpState::new(1);
        let mut broke_limit = false;
        for _ in 0..100 {
            let dir = noclip_step(&mut state, &CONFIG, &[1.0]).unwrap();
            if l2_norm(&dir.update) > CONFIG.max_speed {
                broke_limit = true;
            }
        }
        assert!(broke_limit, "NoClip should pass ||v|| = 0.3 on a constant gradient");
        assert!(l2_norm(state.velocity()) < CONFIG.velocity_bound());
    }

    #[test]
    fn update_depends_only_on_gradient_direction() {
        let g = [0.3, -1.2, 0.7, 2.2];
        let scaled: Vec<f64> = g.iter().map(|x| x * 1000.0).collect();
        let mut a = ClipUpState::new(4);
        let mut b = ClipUpState::new(4);
        for _ in 0..5 {
            let da = clipup_step(&mut a, &CONFIG, &g).unwrap();
            let db = clipup_step(&mut b, &CONFIG, &scaled).unwrap();
            assert!(
                max_abs_diff(&da.update, &db.update) <= 1e-12 * l2_norm(&da.update).max(1.0),
                "scaling the gradient by 1000 changed the update: {da:?} vs {db:?}"
            );
        }
    }

    #[test]
    fn heuristic_config_halves_the_speed_limit() {
        let c = ClipUpConfig::from_max_speed(0.3);
        assert_eq!(c.step_size, 0.15);
        assert_eq!(c.momentum, 0.9);
        assert_eq!(c.max_speed, 0.3);
        c.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_ranges() {
        let bad_momentum = ClipUpConfig { momentum: 1.0, ..CONFIG };
        assert!(bad_momentum.validate().is_err(), "momentum 1.0 must be rejected");
        let bad_step = ClipUpConfig { step_size: 0.0, ..CONFIG };
        assert!(bad_step.validate().is_err(), "zero step size must be rejected");
        let inf_speed = ClipUpConfig { max_speed: f64::INFINITY, ..CONFIG };
        assert!(inf_speed.validate().is_ok(), "infinite max speed is the no-clip sentinel");
    }

    proptest! {
        /// ||update|| <= max_speed always holds for ClipUp, whatever the gradients.
        #[test]
        fn speed_limit_always_holds(
            grads in proptest::collection::vec(
                proptest::collection::vec(-1e6f64..1e6, 3),
                1..60,
            )
        ) {
            let mut state = ClipUpState::new(3);
            for g in &grads {
                let dir = clipup_step(&mut state, &CONFIG, g).unwrap();
                prop_assert!(
                    l2_norm(&dir.update) <= CONFIG.max_speed * (1.0 + 1e-12),
                    "speed {} exceeded the {} limit",
                    l2_norm(&dir.update),
                    CONFIG.max_speed,
                );
            }
        }

        /// Without clipping the velocity still respects step_size / (1 - momentum).
        #[test]
        fn noclip_velocity_respects_the_geometric_bound(
            grads in proptest::collection::vec(
                proptest::collection::vec(-1e3f64..1e3, 2),
                1..200,
            )
        ) {
            let mut state = ClipUpState::new(2);
            for g in &grads {
                noclip_step(&mut state, &CONFIG, g).unwrap();
                prop_assert!(
                    l2_norm(state.velocity()) <= CONFIG.velocity_bound() * (1.0 + 1e-12)
                );
            }
        }
    }
}
