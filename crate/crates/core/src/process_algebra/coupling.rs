use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A known coupling rate used to fix the proportionality constant of
/// `g_n ∝ χ⁽ⁿ⁾ / V_m^{(n−1)/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingReference {
    pub order: u32,
    /// Coupling rate [rad/s].
    pub g: f64,
    /// Susceptibility in (V/m)^{order−1}.
    pub chi: f64,
    /// Mode volume [m³].
    pub v_m: f64,
}

/// Scales a reference coupling to another order, susceptibility and mode
/// volume.
pub fn estimate_intrinsic_coupling(order: u32, chi: f64, v_m: f64, reference: &CouplingReference) -> Result<f64> {
    if order < 2 || reference.order < 2 {
        return Err(Error::Domain(format!(
            "nonlinear order must be >= 2, got {order} (reference {})",
            reference.order
        )));
    }
    if !(v_m > 0.0) || !(reference.v_m > 0.0) {
        return Err(Error::Domain(format!(
            "mode volume must be positive, got {v_m} (reference {})",
            reference.v_m
        )));
    }
    if reference.chi == 0.0 {
        return Err(Error::Domain("reference susceptibility is zero".into()));
    }
    let exponent = |n: u32| 0.5 * (f64::from(n) - 1.0);
    // ratios in log space: the volume factors span tens of decades
    let log_volume = exponent(reference.order) * reference.v_m.ln() - exponent(order) * v_m.ln();
    Ok(reference.g * (chi / reference.chi) * log_volume.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    const REF: CouplingReference = CouplingReference {
        order: 3,
        g: 2.0e3,
        chi: 1e-20,
        v_m: 1e-16,
    };

    #[test]
    fn identity_at_reference() {
        let g = estimate_intrinsic_coupling(3, REF.chi, REF.v_m, &REF).unwrap();
        assert!((g - REF.g).abs() < 1e-9 * REF.g);
    }

    #[test]
    fn halving_volume_doubles_chi3_rate() {
        let g = estimate_intrinsic_coupling(3, REF.chi, 0.5 * REF.v_m, &REF).unwrap();
        assert!((g / REF.g - 2.0).abs() < 1e-12);
    }

    #[test]
    fn one_order_up_costs_five_decades() {
        // χ drops 10 decades per order; V_m = 1e-10 gives 10^5 enhancement per order.
        let reference = CouplingReference {
            order: 2,
            g: 1.0,
            chi: 1e-10,
            v_m: 1e-10,
        };
        let g3 = estimate_intrinsic_coupling(3, 1e-20, 1e-10, &reference).unwrap();
        assert!((g3.log10() - (-5.0)).abs() < 1e-9);
        let g4 = estimate_intrinsic_coupling(4, 1e-30, 1e-10, &reference).unwrap();
        assert!((g4.log10() - (-10.0)).abs() < 1e-9);
    }

    #[test]
    fn nonpositive_volume_rejected() {
        assert!(matches!(
            estimate_intrinsic_coupling(3, 1.0, 0.0, &REF),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            estimate_intrinsic_coupling(3, 1.0, -1.0, &REF),
            Err(Error::Domain(_))
        ));
    }
}
