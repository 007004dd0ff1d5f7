use serde::{Deserialize, Serialize};

use super::gaussian::GaussianState;
use super::lindblad::QuantumState;
use super::space::HilbertSpace;
use crate::error::Result;

/// Output photon fluxes of the two members of a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFlux {
    pub x: String,
    pub y: String,
    /// `κ_ext,x ⟨n_x⟩` [photons/s].
    pub flux_x: f64,
    pub flux_y: f64,
    /// `|flux_x − flux_y| / max(flux_x, flux_y)`, zero when both vanish.
    pub mismatch: f64,
}

impl PairFlux {
    fn new(x: &str, y: &str, flux_x: f64, flux_y: f64) -> Self {
        let top = flux_x.abs().max(flux_y.abs());
        PairFlux {
            x: x.to_owned(),
            y: y.to_owned(),
            flux_x,
            flux_y,
            mismatch: if top > 0.0 { (flux_x - flux_y).abs() / top } else { 0.0 },
        }
    }

    /// The reported pair flux, taken from mode x.
    pub fn flux(&self) -> f64 {
        self.flux_x
    }
}

pub fn pair_flux(space: &HilbertSpace, state: &QuantumState, x: &str, y: &str) -> Result<PairFlux> {
    let (xi, yi) = (space.mode_index(x)?, space.mode_index(y)?);
    let modes = space.modes();
    Ok(PairFlux::new(
        x,
        y,
        modes[xi].kappa_ext * state.number(space, xi),
        modes[yi].kappa_ext * state.number(space, yi),
    ))
}

pub fn gaussian_pair_flux(state: &GaussianState, x: &str, y: &str) -> Result<PairFlux> {
    let (xi, yi) = (state.model.index_of(x)?, state.model.index_of(y)?);
    Ok(PairFlux::new(x, y, state.flux(xi), state.flux(yi)))
}
