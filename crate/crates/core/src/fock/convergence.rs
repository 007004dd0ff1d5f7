use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::correlation::zero_delay_g2;
use super::flux::{gaussian_pair_flux, pair_flux};
use super::gaussian::QuadraticModel;
use super::hamiltonian::{build_hamiltonian, HermitianPolicy};
use super::lindblad::{steady_state, QuantumState};
use super::space::{configured_max_dim, HilbertSpace, SparseOperator};
use crate::error::{Error, Result};
use crate::process_algebra::{
    classical_pump_reduce, synthesize_staged, EffectiveProcess, InteractionVertex, Mode, Term,
};

/// Starting photon-number cutoff for near-vacuum pair sources.
pub const DEFAULT_CUTOFF: usize = 5;

/// One cutoff-doubling comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffCheck {
    pub cutoffs: Vec<usize>,
    pub numbers: Vec<f64>,
    pub g2_zero: Option<f64>,
    /// Largest relative change against the previous (half) cutoff.
    pub max_change: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergedRun {
    pub space: HilbertSpace,
    pub hamiltonian: SparseOperator,
    pub losses: Vec<f64>,
    pub state: QuantumState,
    pub checks: Vec<CutoffCheck>,
    /// False when the dimension cap stopped the doubling before the change
    /// fell below tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffOptions {
    pub initial: usize,
    /// Accepted relative change of ⟨n⟩ and g⁽²⁾(0) per doubling.
    pub tolerance: f64,
    pub max_dim: usize,
}

impl Default for CutoffOptions {
    fn default() -> Self {
        CutoffOptions {
            initial: DEFAULT_CUTOFF,
            tolerance: 0.01,
            max_dim: configured_max_dim(),
        }
    }
}

fn all_quadratic(terms: &[Term]) -> bool {
    terms.iter().all(|t| t.legs.len() == 2)
}

/// Solves the steady state at the initial cutoff, then keeps doubling every
/// cutoff until ⟨n⟩ per mode (and g⁽²⁾(0) of `pair`) change by less than
/// the tolerance. Hitting the dimension cap is reported, not hidden.
pub fn converge_cutoffs(
    modes: &[Mode],
    terms: &[Term],
    policy: HermitianPolicy,
    pair: Option<(&str, &str)>,
    options: CutoffOptions,
) -> Result<ConvergedRun> {
    if all_quadratic(terms) {
        QuadraticModel::new(modes, terms, policy)?.check_threshold()?;
    }
    let losses: Vec<f64> = modes.iter().map(|m| m.kappa).collect();
    let solve = |cutoff: usize| -> Result<(HilbertSpace, SparseOperator, QuantumState, CutoffCheck)> {
        let space = HilbertSpace::with_limit(modes.to_vec(), vec![cutoff; modes.len()], options.max_dim)?;
        let h = build_hamiltonian(&space, terms, policy)?;
        let state = steady_state(&space, &h, &losses)?;
        let numbers: Vec<f64> = (0..modes.len()).map(|j| state.number(&space, j)).collect();
        let g2_zero = match pair {
            Some((x, y)) => Some(zero_delay_g2(
                &space,
                &state,
                space.mode_index(x)?,
                space.mode_index(y)?,
            )?),
            None => None,
        };
        let check = CutoffCheck {
            cutoffs: space.cutoffs().to_vec(),
            numbers,
            g2_zero,
            max_change: f64::NAN,
        };
        Ok((space, h, state, check))
    };

    let mut cutoff = options.initial.max(1);
    let (mut space, mut h, mut state, first) = solve(cutoff)?;
    let mut checks = vec![first];
    loop {
        let next = match solve(2 * cutoff) {
            Ok(r) => r,
            Err(Error::DimensionLimit { .. }) => {
                return Ok(ConvergedRun {
                    space,
                    hamiltonian: h,
                    losses,
                    state,
                    checks,
                    converged: false,
                })
            }
            Err(e) => return Err(e),
        };
        let prev = checks.last().unwrap();
        let mut change: f64 = 0.0;
        for (a, b) in prev.numbers.iter().zip(&next.3.numbers) {
            change = change.max(relative_change(*a, *b));
        }
        if let (Some(a), Some(b)) = (prev.g2_zero, next.3.g2_zero) {
            change = change.max(relative_change(a, b));
        }
        let mut check = next.3;
        check.max_change = change;
        checks.push(check);
        space = next.0;
        h = next.1;
        state = next.2;
        cutoff *= 2;
        if change < options.tolerance {
            return Ok(ConvergedRun {
                space,
                hamiltonian: h,
                losses,
                state,
                checks,
                converged: true,
            });
        }
    }
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-14 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Engine used for both sides of the elimination comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    Gaussian,
    /// Fock engine with one cutoff per mode of the full model, in mode
    /// order; the effective model uses the cutoffs of its surviving modes.
    Fock {
        cutoffs: Vec<usize>,
    },
}

/// Full model with an explicit intermediate mode, plus what the sweep holds
/// fixed.
#[derive(Debug, Clone)]
pub struct VirtualModeSetup {
    /// All cavity modes, including the virtual one and the pump.
    pub modes: Vec<Mode>,
    pub vertices: Vec<InteractionVertex>,
    pub pump: String,
    pub n_pump: f64,
    pub virtual_mode: String,
    /// Pair whose flux is compared; the flux of the first member is used.
    /// Pick the member reached only through the eliminated mode: the other
    /// also collects unpaired photons left behind when the virtual mode
    /// decays, a loss channel absent from the Hamiltonian reduction.
    pub pair: (String, String),
    /// Effective coupling magnitude `|∏G / Λ|` held fixed across the sweep.
    pub g_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// `|Λ|` in units of the largest other rate.
    pub multiple: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    /// Pumped bilinear couplings of the full model.
    pub couplings: Vec<f64>,
    pub flux_full: f64,
    pub flux_effective: f64,
    pub ratio: f64,
}

impl ConvergenceRow {
    pub fn deviation(&self) -> f64 {
        (self.ratio - 1.0).abs()
    }
}

impl VirtualModeSetup {
    fn mode(&self, label: &str) -> Result<&Mode> {
        self.modes
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::Structural(format!("mode `{label}` is not declared")))
    }

    /// Largest rate other than the virtual mode's detuning: linewidths,
    /// external detunings and the effective coupling.
    pub fn rate_scale(&self) -> f64 {
        self.modes
            .iter()
            .filter(|m| m.label != self.pump)
            .flat_map(|m| {
                let d = if m.label == self.virtual_mode {
                    0.0
                } else {
                    m.delta.abs()
                };
                [m.kappa, d]
            })
            .fold(self.g_eff, f64::max)
    }

    /// Bilinear parts after pump reduction, rescaled so that
    /// `|∏G| = g_eff |Λ|`.
    fn pumped_parts(&self, lambda: C64) -> Result<Vec<EffectiveProcess>> {
        let pump = self.mode(&self.pump)?.clone();
        let mut parts = Vec::new();
        for v in &self.vertices {
            let lifted = EffectiveProcess::from(v);
            parts.push(classical_pump_reduce(&lifted, &pump, self.n_pump)?);
        }
        let product: f64 = parts.iter().map(|p| p.g_eff.norm()).product();
        if product == 0.0 {
            return Err(Error::Domain("a pumped coupling vanishes".into()));
        }
        let scale = (self.g_eff * lambda.norm() / product).powf(1.0 / parts.len() as f64);
        for p in &mut parts {
            p.g_eff *= scale;
        }
        Ok(parts)
    }

    fn full_model(&self, lambda: C64) -> Result<(Vec<Mode>, Vec<Term>, Vec<f64>)> {
        let parts = self.pumped_parts(lambda)?;
        let mut modes: Vec<Mode> = self.modes.iter().filter(|m| m.label != self.pump).cloned().collect();
        for m in &mut modes {
            if m.label == self.virtual_mode {
                m.delta = lambda.re;
            }
        }
        let couplings = parts.iter().map(|p| p.g_eff.norm()).collect();
        let terms = parts.iter().map(Term::from).collect();
        Ok((modes, terms, couplings))
    }

    /// Two-mode reduction: the synthesized pair process plus the
    /// second-order frequency pulls `δ' = δ − |G|² Re(1/Λ)` on each external
    /// mode coupled to the virtual one.
    fn effective_model(&self, lambda: C64) -> Result<(Vec<Mode>, Vec<Term>)> {
        let parts = self.pumped_parts(lambda)?;
        let virt = self.mode(&self.virtual_mode)?.clone();
        let process = synthesize_staged(&parts, &[virt], &[lambda])?;
        let mut modes: Vec<Mode> = self
            .modes
            .iter()
            .filter(|m| m.label != self.pump && m.label != self.virtual_mode)
            .cloned()
            .collect();
        for p in &parts {
            if p.legs.len() != 2 {
                continue;
            }
            let external: Vec<_> = p.legs.iter().filter(|l| l.mode != self.virtual_mode).collect();
            if external.len() == 1 {
                if let Some(m) = modes.iter_mut().find(|m| m.label == external[0].mode) {
                    m.delta -= p.g_eff.norm_sqr() * (1.0 / lambda).re;
                }
            }
        }
        Ok((modes, vec![Term::from(&process)]))
    }
}

fn flux_with(
    solver: &SolverChoice,
    modes: &[Mode],
    terms: &[Term],
    cutoffs: &[usize],
    pair: &(String, String),
) -> Result<f64> {
    let policy = HermitianPolicy::ConjugatePartner;
    match solver {
        SolverChoice::Gaussian => {
            let st = QuadraticModel::new(modes, terms, policy)?.steady_state()?;
            Ok(gaussian_pair_flux(&st, &pair.0, &pair.1)?.flux())
        }
        SolverChoice::Fock { .. } => {
            QuadraticModel::new(modes, terms, policy)?.check_threshold()?;
            let space = HilbertSpace::new(modes.to_vec(), cutoffs.to_vec())?;
            let h = build_hamiltonian(&space, terms, policy)?;
            let losses: Vec<f64> = modes.iter().map(|m| m.kappa).collect();
            let st = steady_state(&space, &h, &losses)?;
            Ok(pair_flux(&space, &st, &pair.0, &pair.1)?.flux())
        }
    }
}

/// Compares the pair flux of the full model against its adiabatically
/// eliminated reduction while `|Λ|` of the virtual mode sweeps over
/// `multiples` of [`VirtualModeSetup::rate_scale`], holding `g_eff` fixed.
pub fn virtual_mode_convergence(
    setup: &VirtualModeSetup,
    multiples: &[f64],
    solver: &SolverChoice,
) -> Result<Vec<ConvergenceRow>> {
    let virt = setup.mode(&setup.virtual_mode)?;
    let scale = setup.rate_scale();
    let full_modes: Vec<&Mode> = setup.modes.iter().filter(|m| m.label != setup.pump).collect();
    let cutoffs_full: Vec<usize> = match solver {
        SolverChoice::Fock { cutoffs } => {
            if cutoffs.len() != full_modes.len() {
                return Err(Error::Structural(format!(
                    "{} cutoffs for {} non-pump modes",
                    cutoffs.len(),
                    full_modes.len()
                )));
            }
            cutoffs.clone()
        }
        SolverChoice::Gaussian => vec![0; full_modes.len()],
    };
    let cutoffs_eff: Vec<usize> = full_modes
        .iter()
        .zip(&cutoffs_full)
        .filter(|(m, _)| m.label != setup.virtual_mode)
        .map(|(_, &c)| c)
        .collect();

    let mut rows = Vec::with_capacity(multiples.len());
    for &mult in multiples {
        let target = mult * scale;
        let half = 0.5 * virt.kappa;
        if !(target > half) {
            return Err(Error::Domain(format!(
                "|Λ| = {target:.3e} is below the virtual linewidth κ/2 = {half:.3e}"
            )));
        }
        let lambda = C64::new((target * target - half * half).sqrt(), -half);
        let (modes, terms, couplings) = setup.full_model(lambda)?;
        let flux_full = flux_with(solver, &modes, &terms, &cutoffs_full, &setup.pair)?;
        let (emodes, eterms) = setup.effective_model(lambda)?;
        let flux_effective = flux_with(solver, &emodes, &eterms, &cutoffs_eff, &setup.pair)?;
        if flux_effective <= 0.0 {
            return Err(Error::Normalization("effective model produces no pair flux".into()));
        }
        rows.push(ConvergenceRow {
            multiple: mult,
            lambda_re: lambda.re,
            lambda_im: lambda.im,
            couplings,
            flux_full,
            flux_effective,
            ratio: flux_full / flux_effective,
        });
    }
    Ok(rows)
}
