//! Rule-of-thumb hyperparameter derivation from the maximum update speed.
//!
//! Once a speed limit is chosen, the remaining knobs follow mechanically:
//! the step size is half the limit, the initial search radius is a fixed
//! multiple of it, and the initial standard deviation is the uniform vector
//! whose norm equals that radius.

use crate::error::{Error, Result};

/// Radius factor that works well across problems; 10-20 are all reasonable.
pub const DEFAULT_RADIUS_FACTOR: f64 = 15.0;

/// Inputs to the tuning rules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeuristicInputs {
    /// The chosen maximum update speed.
    pub max_speed: f64,
    /// Ratio of initial search radius to maximum speed.
    pub radius_factor: f64,
    /// Dimensionality of the search space.
    pub dimension: usize,
}

impl HeuristicInputs {
    pub fn new(max_speed: f64, dimension: usize) -> Self {
        HeuristicInputs { max_speed, radius_factor: DEFAULT_RADIUS_FACTOR, dimension }
    }

    pub fn with_radius_factor(mut self, radius_factor: f64) -> Self {
        self.radius_factor = radius_factor;
        self
    }
}

/// Values derived from [`HeuristicInputs`].
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedHyperparams {
    /// Optimizer step size: half the maximum speed.
    pub step_size: f64,
    /// Initial search radius: `radius_factor * max_speed`.
    pub radius: f64,
    /// Uniform initial standard deviation with L2 norm equal to the radius.
    pub sigma0: Vec<f64>,
}

/// Apply the tuning rules.
pub fn derive_heuristics(inputs: &HeuristicInputs) -> Result<DerivedHyperparams> {
    if !(inputs.max_speed.is_finite() && inputs.max_speed > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "heuristics need a finite max speed > 0, got {}",
            inputs.max_speed
        )));
    }
    if !(inputs.radius_factor.is_finite() && inputs.radius_factor > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "radius factor must be finite and > 0, got {}",
            inputs.radius_factor
        )));
    }
    if inputs.dimension == 0 {
        return Err(Error::InvalidConfig("dimension must be >= 1".into()));
    }
    let radius = inputs.radius_factor * inputs.max_speed;
    Ok(DerivedHyperparams {
        step_size: inputs.max_speed / 2.0,
        radius,
        sigma0: sigma_from_radius(radius, inputs.dimension),
    })
}

/// The uniform standard-deviation vector whose L2 norm equals `radius`.
pub fn sigma_from_radius(radius: f64, dimension: usize) -> Vec<f64> {
    vec![radius / (dimension as f64).sqrt(); dimension]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecops::l2_norm;

    #[test]
    fn step_size_is_half_the_speed_limit() {
        let derived = derive_heuristics(&HeuristicInputs::new(0.3, 10)).unwrap();
        assert_eq!(derived.step_size, 0.15);
    }

    #[test]
    fn default_radius_is_fifteen_speed_limits() {
        let derived = derive_heuristics(&HeuristicInputs::new(0.3, 10)).unwrap();
        assert_eq!(derived.radius, 4.5);
    }

    #[test]
    fn radius_three_in_nine_dimensions_gives_unit_sigma() {
        let sigma = sigma_from_radius(3.0, 9);
        assert_eq!(sigma, vec![1.0; 9]);
    }

    #[test]
    fn sigma_norm_equals_the_radius() {
        for dimension in [1, 2, 7, 100, 3985] {
            let derived = derive_heuristics(
                &HeuristicInputs::new(0.15, dimension).with_radius_factor(18.0),
            )
            .unwrap();
            assert!(
                (l2_norm(&derived.sigma0) - derived.radius).abs() < 1e-9 * derived.radius,
                "dimension {dimension}: |sigma0| = {} vs radius {}",
                l2_norm(&derived.sigma0),
                derived.radius
            );
        }
    }

    #[test]
    fn custom_radius_factor_is_respected() {
        let derived =
            derive_heuristics(&HeuristicInputs::new(0.015, 100).with_radius_factor(15.0)).unwrap();
        assert!((derived.radius - 0.225).abs() < 1e-15);
        assert!((derived.sigma0[0] - 0.0225).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(derive_heuristics(&HeuristicInputs::new(0.0, 4)).is_err());
        assert!(derive_heuristics(&HeuristicInputs::new(f64::INFINITY, 4)).is_err());
        assert!(derive_heuristics(&HeuristicInputs::new(0.1, 0)).is_err());
        assert!(derive_heuristics(
            &HeuristicInputs::new(0.1, 4).with_radius_factor(-1.0)
        )
        .is_err());
    }
}
