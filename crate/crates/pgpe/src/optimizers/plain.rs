//! Plain gradient ascent with a fixed step size.

use super::{ensure_finite, AscentDirection};
use crate::error::Result;

/// `update = step_size * gradient`. A step size of zero is allowed and
/// produces a zero update, which is occasionally useful as a frozen baseline.
pub fn plain_step(step_size: f64, gradient: &[f64]) -> Result<AscentDirection> {
    ensure_finite(gradient)?;
    let update = gradient.iter().map(|g| step_size * g).collect();
    Ok(AscentDirection { update, clipped: false })
}
