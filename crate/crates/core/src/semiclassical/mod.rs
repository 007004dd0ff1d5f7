//! Classical coupled-mode steady states, pump-power sweeps and power-law
//! fits.

mod cme;
mod sweep;

pub use cme::{cme_steady_state, transmission_spectrum, AmplitudeState, CmeOptions, CoupledModes, Drive};
pub use sweep::{power_law_fit, sweep_power, PowerLawFit, Sweep, SweepPoint, SyntheticPairSource};
