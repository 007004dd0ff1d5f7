use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{gaussian_pair_flux, GaussianState, HermitianPolicy, QuadraticModel};
use crate::process_algebra::{
    classical_pump_reduce, synthesize_effective, EffectiveProcess, InteractionVertex, Mode, Term,
};

/// `value = A · P^N` with one-sigma uncertainty on N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub exponent: f64,
    pub sigma_exponent: f64,
    pub points: usize,
}

/// Least-squares line through `(ln P, ln value)`. Needs at least three
/// points spanning half a decade in P.
pub fn power_law_fit(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if let Some(p) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0) || !(*y > 0.0) || !x.is_finite() || !y.is_finite())
    {
        return Err(Error::Domain(format!("power-law fit needs positive data, got {p:?}")));
    }
    if points.len() < 3 {
        return Err(Error::Domain(format!(
            "power-law fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    let (lo, hi) = points
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), (x, _)| (lo.min(*x), hi.max(*x)));
    if (hi / lo).log10() < 0.5 - 1e-12 {
        return Err(Error::Domain(format!(
            "power-law fit needs half a decade of span, got {:.3} decades",
            (hi / lo).log10()
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let sigma = if points.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(PowerLawFit {
        prefactor: intercept.exp(),
        exponent: slope,
        sigma_exponent: sigma,
        points: points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Pump power [W].
    pub power: f64,
    pub value: Option<f64>,
    pub error: Option<String>,
}

/// Per-point results in input order. Failed points are kept with their
/// error so a sweep never aborts halfway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
}

impl Sweep {
    pub fn successes(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.value.map(|v| (p.power, v)))
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.value.is_none()).count()
    }

    pub fn fit(&self) -> Result<PowerLawFit> {
        power_law_fit(&self.successes())
    }
}

pub fn sweep_power<F>(powers: &[f64], mut observable: F) -> Result<Sweep>
where
    F: FnMut(f64) -> Result<f64>,
{
    if powers.len() < 3 {
        return Err(Error::Domain(format!(
            "a sweep needs >= 3 powers, got {}",
            powers.len()
        )));
    }
    if let Some(p) = powers.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
        return Err(Error::Domain(format!("sweep powers must be positive, got {p}")));
    }
    let points = powers
        .iter()
        .map(|&power| match observable(power) {
            Ok(v) => SweepPoint {
                power,
                value: Some(v),
                error: None,
            },
            Err(e) => SweepPoint {
                power,
                value: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(Sweep { points })
}

/// Pair source built on a synthesized process: intrinsic vertices, virtual
/// modes eliminated, and a classical pump set by the input power.
#[derive(Debug, Clone)]
pub struct SyntheticPairSource {
    pub modes: Vec<Mode>,
    pub vertices: Vec<InteractionVertex>,
    pub pump: String,
    pub virtual_modes: Vec<String>,
    pub pair: (String, String),
}

impl SyntheticPairSource {
    fn mode(&self, label: &str) -> Result<&Mode> {
        self.modes
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::Structural(format!("mode `{label}` is not declared")))
    }

    pub fn effective(&self) -> Result<EffectiveProcess> {
        let virt = self
            .virtual_modes
            .iter()
            .map(|l| self.mode(l).cloned())
            .collect::<Result<Vec<_>>>()?;
        let lambdas: Vec<C64> = virt.iter().map(Mode::lambda).collect();
        synthesize_effective(&self.vertices, &virt, &lambdas)
    }

    /// Undepleted intracavity pump photon number at `power`.
    pub fn pump_photons(&self, power: f64) -> Result<f64> {
        Ok(self.mode(&self.pump)?.photon_number(power))
    }

    /// The bilinear pair term at pump power `power`.
    pub fn pumped_term(&self, power: f64) -> Result<Term> {
        let pump = self.mode(&self.pump)?.clone();
        let reduced = classical_pump_reduce(&self.effective()?, &pump, self.pump_photons(power)?)?;
        if reduced.legs.len() != 2 {
            return Err(Error::Structural(format!(
                "pump reduction leaves {} instead of a pair term",
                reduced.monomial()
            )));
        }
        Ok(Term::from(&reduced))
    }

    pub fn gaussian_state(&self, power: f64) -> Result<GaussianState> {
        let term = self.pumped_term(power)?;
        let modes = vec![self.mode(&self.pair.0)?.clone(), self.mode(&self.pair.1)?.clone()];
        QuadraticModel::new(&modes, &[term], HermitianPolicy::ConjugatePartner)?.steady_state()
    }

    /// Output pair flux `κ_ext ⟨n⟩` of the first pair member [pairs/s].
    pub fn pair_flux(&self, power: f64) -> Result<f64> {
        let st = self.gaussian_state(power)?;
        Ok(gaussian_pair_flux(&st, &self.pair.0, &self.pair.1)?.flux())
    }
}
