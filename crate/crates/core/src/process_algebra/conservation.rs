use serde::{Deserialize, Serialize};

use super::{Leg, ModeGraph};
use crate::error::{Error, Result};

/// Phase-matching outcome for one monomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    /// Σ m over annihilation legs minus Σ m over creation legs.
    pub momentum_sum: i64,
    /// Σ ω over annihilation legs minus Σ ω over creation legs [rad/s].
    pub energy_mismatch: f64,
    pub tolerance: f64,
    pub passes: bool,
}

/// Half the smallest linewidth among the modes the legs touch.
pub fn default_energy_tolerance(graph: &ModeGraph, legs: &[Leg]) -> Result<f64> {
    let mut min_kappa = f64::INFINITY;
    for leg in legs {
        min_kappa = min_kappa.min(graph.require(&leg.mode)?.kappa);
    }
    if min_kappa.is_finite() {
        Ok(0.5 * min_kappa)
    } else {
        Ok(0.0)
    }
}

/// Checks angular-momentum and energy conservation of a monomial.
///
/// Momentum is exact integer arithmetic; energy passes when
/// `|mismatch| <= tolerance`. A `None` tolerance uses
/// [`default_energy_tolerance`].
pub fn check_conservation(graph: &ModeGraph, legs: &[Leg], tolerance: Option<f64>) -> Result<ConservationReport> {
    let mut momentum_sum: i64 = 0;
    let mut energy_in = 0.0;
    let mut energy_out = 0.0;
    for leg in legs {
        let mode = graph.require(&leg.mode)?;
        if leg.dagger {
            momentum_sum -= i64::from(mode.m);
            energy_out += mode.omega;
        } else {
            momentum_sum += i64::from(mode.m);
            energy_in += mode.omega;
        }
    }
    let tolerance = match tolerance {
        Some(t) if t < 0.0 || !t.is_finite() => {
            return Err(Error::Domain(format!("energy tolerance must be >= 0, got {t}")))
        }
        Some(t) => t,
        None => default_energy_tolerance(graph, legs)?,
    };
    let energy_mismatch = energy_in - energy_out;
    Ok(ConservationReport {
        momentum_sum,
        energy_mismatch,
        tolerance,
        passes: momentum_sum == 0 && energy_mismatch.abs() <= tolerance,
    })
}
