use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process_algebra::{InteractionVertex, Mode, HBAR};

/// Coherent drive into one mode's bus port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub mode: String,
    /// Input amplitude `s_in` [√(photons/s)]; `|s_in|² = P/(ħω)`.
    pub amplitude: C64,
}

impl Drive {
    pub fn from_power(mode: &Mode, power: f64, phase: f64) -> Result<Self> {
        if !(power >= 0.0) || !power.is_finite() {
            return Err(Error::Domain(format!(
                "drive power must be finite and >= 0, got {power}"
            )));
        }
        let mag = (power / (HBAR * mode.omega)).sqrt();
        Ok(Drive {
            mode: mode.label.clone(),
            amplitude: C64::from_polar(mag, phase),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmeOptions {
    pub damping: f64,
    /// Scaled residual below which the fixed point hands over to Newton.
    pub newton_switch: f64,
    /// Converged when `‖dα/dt‖ ≤ tolerance · κ_max · ‖α‖`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for CmeOptions {
    fn default() -> Self {
        CmeOptions {
            damping: 0.5,
            newton_switch: 1e-3,
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

/// Steady intracavity amplitudes, normalized so `|α|²` is the photon number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeState {
    pub labels: Vec<String>,
    pub alpha: Vec<C64>,
    pub drives: Vec<C64>,
    pub kappa_ext: Vec<f64>,
    /// Scaled residual `‖dα/dt‖ / (κ_max ‖α‖)`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// A restart from a different initial guess reached another solution.
    pub multistable: bool,
    /// The linearization around the solution is stable.
    pub stable: bool,
}

impl AmplitudeState {
    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Structural(format!("mode `{label}` is not in the state")))
    }

    pub fn photons(&self, label: &str) -> Result<f64> {
        Ok(self.alpha[self.index_of(label)?].norm_sqr())
    }

    /// `s_out = s_in − √κ_ext α`.
    pub fn output_amplitude(&self, k: usize) -> C64 {
        self.drives[k] - self.kappa_ext[k].sqrt() * self.alpha[k]
    }

    /// Photon flux leaving through the bus port [photons/s].
    pub fn output_flux(&self, label: &str) -> Result<f64> {
        Ok(self.output_amplitude(self.index_of(label)?).norm_sqr())
    }

    /// Net flux taken out of the input beam, `|s_in|² − |s_out|²`.
    pub fn absorbed_flux(&self, label: &str) -> Result<f64> {
        let k = self.index_of(label)?;
        Ok(self.drives[k].norm_sqr() - self.output_amplitude(k).norm_sqr())
    }
}

/// One monomial `c Π z_i` of the classical Hamiltonian, `z = α` or `α*`.
#[derive(Debug, Clone)]
struct Monomial {
    coeff: C64,
    factors: Vec<(usize, bool)>,
}

impl Monomial {
    fn product_except(&self, alpha: &[C64], skip: &[usize]) -> C64 {
        self.factors
            .iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .fold(self.coeff, |acc, (_, &(m, conj))| {
                acc * if conj { alpha[m].conj() } else { alpha[m] }
            })
    }
}

/// Classical coupled-mode system in the pump frame:
/// `dα_k/dt = −(iδ_k + κ_k/2) α_k − i ∂H/∂α_k* + √κ_ext,k s_in,k`.
#[derive(Debug, Clone)]
pub struct CoupledModes {
    labels: Vec<String>,
    linear: Vec<C64>,
    kappa: Vec<f64>,
    kappa_ext: Vec<f64>,
    monomials: Vec<Monomial>,
    drive: Vec<C64>,
}

impl CoupledModes {
    pub fn new(modes: &[Mode], vertices: &[InteractionVertex], drives: &[Drive]) -> Result<Self> {
        for m in modes {
            m.validate()?;
        }
        let index = |label: &str| {
            modes
                .iter()
                .position(|m| m.label == label)
                .ok_or_else(|| Error::Structural(format!("mode `{label}` is not declared")))
        };
        let mut monomials = Vec::new();
        for v in vertices {
            v.validate()?;
            let factors = v
                .legs
                .iter()
                .map(|l| Ok((index(&l.mode)?, l.dagger)))
                .collect::<Result<Vec<_>>>()?;
            let conj = factors.iter().map(|&(m, c)| (m, !c)).collect();
            monomials.push(Monomial { coeff: v.g, factors });
            monomials.push(Monomial {
                coeff: v.g.conj(),
                factors: conj,
            });
        }
        let mut drive = vec![C64::default(); modes.len()];
        for d in drives {
            let k = index(&d.mode)?;
            if !d.amplitude.re.is_finite() || !d.amplitude.im.is_finite() {
                return Err(Error::Domain(format!("drive on `{}` is not finite", d.mode)));
            }
            drive[k] += d.amplitude;
        }
        Ok(CoupledModes {
            labels: modes.iter().map(|m| m.label.clone()).collect(),
            linear: modes.iter().map(|m| C64::new(0.5 * m.kappa, m.delta)).collect(),
            kappa: modes.iter().map(|m| m.kappa).collect(),
            kappa_ext: modes.iter().map(|m| m.kappa_ext).collect(),
            monomials,
            drive,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `∂H/∂α_k*` for every k.
    fn force(&self, alpha: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::default(); self.len()];
        for mono in &self.monomials {
            for (i, &(m, conj)) in mono.factors.iter().enumerate() {
                if conj {
                    out[m] += mono.product_except(alpha, &[i]);
                }
            }
        }
        out
    }

    fn driven(&self) -> Vec<C64> {
        self.drive
            .iter()
            .zip(&self.kappa_ext)
            .map(|(s, k)| k.sqrt() * s)
            .collect()
    }

    /// `dα/dt`.
    pub fn rate(&self, alpha: &[C64]) -> Vec<C64> {
        let force = self.force(alpha);
        let drive = self.driven();
        (0..self.len())
            .map(|k| -self.linear[k] * alpha[k] - C64::new(0.0, 1.0) * force[k] + drive[k])
            .collect()
    }

    fn scaled_residual(&self, alpha: &[C64]) -> f64 {
        let r = norm_inf(&self.rate(alpha));
        let a = norm_inf(alpha);
        let kmax = self.kappa.iter().cloned().fold(0.0, f64::max);
        if a == 0.0 {
            return r / kmax;
        }
        r / (kmax * a)
    }

    /// Wirtinger Jacobians `(∂f/∂α, ∂f/∂α*)` of the rate.
    fn jacobians(&self, alpha: &[C64]) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
        let n = self.len();
        let mi = C64::new(0.0, -1.0);
        let mut ja = vec![vec![C64::default(); n]; n];
        let mut jc = vec![vec![C64::default(); n]; n];
        for k in 0..n {
            ja[k][k] = -self.linear[k];
        }
        for mono in &self.monomials {
            for (i, &(k, conj_i)) in mono.factors.iter().enumerate() {
                if !conj_i {
                    continue;
                }
                // ∂/∂z_j of the k-th force contribution with z_i removed
                for (j, &(m, conj_j)) in mono.factors.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let v = mi * mono.product_except(alpha, &[i, j]);
                    if conj_j {
                        jc[k][m] += v;
                    } else {
                        ja[k][m] += v;
                    }
                }
            }
        }
        (ja, jc)
    }

    /// Real Jacobian on `(Re α, Im α)`.
    fn real_jacobian(&self, alpha: &[C64]) -> Mat<f64> {
        let n = self.len();
        let (ja, jc) = self.jacobians(alpha);
        // δf = (Jα + Jc) δu + i(Jα − Jc) δv
        Mat::from_fn(2 * n, 2 * n, |r, c| {
            let (k, m) = (r % n, c % n);
            let a = ja[k][m] + jc[k][m];
            let b = C64::new(0.0, 1.0) * (ja[k][m] - jc[k][m]);
            let v = if c < n { a } else { b };
            if r < n {
                v.re
            } else {
                v.im
            }
        })
    }

    fn is_stable(&self, alpha: &[C64]) -> bool {
        match self.real_jacobian(alpha).eigenvalues() {
            Ok(eig) => eig.iter().all(|z| z.re < 0.0),
            Err(_) => false,
        }
    }

    /// Linear-cavity amplitudes, ignoring every vertex.
    pub fn linear_guess(&self) -> Vec<C64> {
        self.driven().iter().zip(&self.linear).map(|(d, l)| d / l).collect()
    }

    fn solve_from(&self, mut alpha: Vec<C64>, opts: &CmeOptions) -> Result<(Vec<C64>, usize, f64)> {
        let drive = self.driven();
        let mut iterations = 0;
        let mut residual = self.scaled_residual(&alpha);
        // damped fixed point: α_k = (s_k − i∂H/∂α_k*) / (iδ_k + κ_k/2)
        while residual > opts.newton_switch && residual > opts.tolerance {
            if iterations >= opts.max_iterations {
                return Err(Error::Convergence { iterations, residual });
            }
            let force = self.force(&alpha);
            for k in 0..self.len() {
                let target = (drive[k] - C64::new(0.0, 1.0) * force[k]) / self.linear[k];
                alpha[k] = (1.0 - opts.damping) * alpha[k] + opts.damping * target;
            }
            iterations += 1;
            residual = self.scaled_residual(&alpha);
            if !residual.is_finite() {
                return Err(Error::Convergence { iterations, residual });
            }
        }
        let n = self.len();
        while residual > opts.tolerance {
            if iterations >= opts.max_iterations {
                return Err(Error::Convergence { iterations, residual });
            }
            let f = self.rate(&alpha);
            let jac = self.real_jacobian(&alpha);
            let rhs = Mat::from_fn(2 * n, 1, |r, _| if r < n { -f[r].re } else { -f[r - n].im });
            let step = jac.partial_piv_lu().solve(&rhs);
            for k in 0..n {
                alpha[k] += C64::new(step[(k, 0)], step[(n + k, 0)]);
            }
            iterations += 1;
            let next = self.scaled_residual(&alpha);
            if !next.is_finite() {
                return Err(Error::Convergence {
                    iterations,
                    residual: next,
                });
            }
            if next >= residual && next > opts.tolerance && iterations > 50 {
                return Err(Error::Convergence {
                    iterations,
                    residual: next,
                });
            }
            residual = next;
        }
        Ok((alpha, iterations, residual))
    }

    /// Steady state from the linear-cavity guess, with a second solve from
    /// a perturbed guess to detect multistability.
    pub fn steady_state(&self, opts: &CmeOptions) -> Result<AmplitudeState> {
        let guess = self.linear_guess();
        let (alpha, iterations, residual) = self.solve_from(guess.clone(), opts)?;
        let scale = norm_inf(&alpha).max(1e-300);
        let alt: Vec<C64> = guess
            .iter()
            .enumerate()
            .map(|(k, g)| g * 4.0 + C64::new(0.0, 0.25 * scale * ((k + 1) as f64)))
            .collect();
        let multistable = match self.solve_from(alt, opts) {
            Ok((other, _, _)) => {
                let diff = alpha
                    .iter()
                    .zip(&other)
                    .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).abs())
                    .fold(0.0, f64::max);
                diff > 1e-6 * scale * scale
            }
            Err(_) => false,
        };
        let stable = self.is_stable(&alpha);
        Ok(AmplitudeState {
            labels: self.labels.clone(),
            alpha,
            drives: self.drive.clone(),
            kappa_ext: self.kappa_ext.clone(),
            residual,
            iterations,
            converged: true,
            multistable,
            stable,
        })
    }
}

fn norm_inf(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn cme_steady_state(modes: &[Mode], vertices: &[InteractionVertex], drives: &[Drive]) -> Result<AmplitudeState> {
    CoupledModes::new(modes, vertices, drives)?.steady_state(&CmeOptions::default())
}

/// Bus transmission `|1 − κ_ext/(iΔ + κ/2)|²` at each detuning.
pub fn transmission_spectrum(mode: &Mode, detunings: &[f64]) -> Result<Vec<f64>> {
    mode.validate()?;
    Ok(detunings
        .iter()
        .map(|&d| (C64::new(1.0, 0.0) - mode.kappa_ext / C64::new(0.5 * mode.kappa, d)).norm_sqr())
        .collect())
}
