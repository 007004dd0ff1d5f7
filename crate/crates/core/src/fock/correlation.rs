use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::gaussian::GaussianState;
use super::lindblad::{Liouvillian, QuantumState};
use super::space::{HilbertSpace, SparseOperator};
use crate::error::{Error, Result};

/// Normalized cross-correlation `g⁽²⁾_xy(τ)` on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGrid {
    pub x: String,
    pub y: String,
    /// Delays [s]; positive τ means y is detected after x.
    pub tau: Vec<f64>,
    pub g2: Vec<f64>,
}

impl CorrelationGrid {
    pub fn new(x: impl Into<String>, y: impl Into<String>, tau: Vec<f64>, g2: Vec<f64>) -> Result<Self> {
        if tau.len() != g2.len() {
            return Err(Error::Internal("grid and value lengths differ".into()));
        }
        validate_grid(&tau)?;
        if let Some(v) = g2.iter().find(|v| !v.is_finite()) {
            return Err(Error::Normalization(format!("non-finite g2 value {v}")));
        }
        Ok(CorrelationGrid {
            x: x.into(),
            y: y.into(),
            tau,
            g2,
        })
    }

    pub fn peak(&self) -> (f64, f64) {
        self.tau.iter().zip(&self.g2).fold(
            (f64::NAN, f64::NEG_INFINITY),
            |acc, (&t, &g)| if g > acc.1 { (t, g) } else { acc },
        )
    }

    /// Largest `|g(τ) − g(−τ)| / max(g(τ), g(−τ))` over mirrored grid points.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &t) in self.tau.iter().enumerate() {
            if t <= 0.0 {
                continue;
            }
            let mirror = self.tau.iter().position(|&u| (u + t).abs() <= 1e-9 * t.abs());
            if let Some(j) = mirror {
                let (a, b) = (self.g2[i], self.g2[j]);
                worst = worst.max((a - b).abs() / a.max(b));
            }
        }
        worst
    }

    /// Exponential decay constants `(τ_left, τ_right)` of `g⁽²⁾ − 1`, from a
    /// log-linear fit on each side of zero. Points below `floor` times the
    /// peak excess are ignored.
    pub fn wing_time_constants(&self, floor: f64) -> Result<(f64, f64)> {
        let peak = self.g2.iter().map(|g| g - 1.0).fold(0.0, f64::max);
        if peak <= 0.0 {
            return Err(Error::Normalization("g2 has no bunching peak to fit".into()));
        }
        let fit = |sign: f64| -> Result<f64> {
            let pts: Vec<(f64, f64)> = self
                .tau
                .iter()
                .zip(&self.g2)
                .filter(|(t, g)| **t * sign > 0.0 && **g - 1.0 > floor * peak)
                .map(|(t, g)| (t.abs(), (g - 1.0).ln()))
                .collect();
            if pts.len() < 2 {
                return Err(Error::Normalization("too few wing points above the floor".into()));
            }
            let slope = ols_slope(&pts);
            if slope >= 0.0 {
                return Err(Error::Normalization("wing does not decay".into()));
            }
            Ok(-1.0 / slope)
        };
        Ok((fit(-1.0)?, fit(1.0)?))
    }
}

fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn validate_grid(tau: &[f64]) -> Result<()> {
    if tau.is_empty() {
        return Err(Error::Domain("empty delay grid".into()));
    }
    if tau.iter().any(|t| !t.is_finite()) || tau.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "delay grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `g⁽²⁾_xy(τ)` by the quantum regression theorem on the truncated basis.
///
/// For τ ≥ 0, `σ(0) = x ρ x†` is propagated with the Lindblad generator and
/// `G(τ) = Tr(y†y σ(τ))`; for τ < 0 the roles of x and y are swapped.
pub fn cross_correlation(
    space: &HilbertSpace,
    h: &SparseOperator,
    losses: &[f64],
    steady: &QuantumState,
    x: &str,
    y: &str,
    tau: &[f64],
) -> Result<CorrelationGrid> {
    validate_grid(tau)?;
    let (xi, yi) = (space.mode_index(x)?, space.mode_index(y)?);
    let (nx, ny) = (steady.number(space, xi), steady.number(space, yi));
    if !(nx > 0.0 && ny > 0.0) {
        return Err(Error::Normalization(format!(
            "steady photon numbers are ⟨n_{x}⟩ = {nx:.3e}, ⟨n_{y}⟩ = {ny:.3e}; g2 is undefined"
        )));
    }
    let mut g = vec![0.0; tau.len()];

    let branch = |from: usize, to: usize, idx: Vec<usize>, g: &mut Vec<f64>| -> Result<()> {
        if idx.is_empty() {
            return Ok(());
        }
        let sigma = jump(space, &steady.rho, from);
        let seeds: Vec<_> = sigma.triplets().into_iter().map(|(r, c, _)| (r, c)).collect();
        if seeds.is_empty() {
            return Ok(());
        }
        let liouv = Liouvillian::reachable(space, h, losses, &seeds)?;
        let mut v = liouv.pack(&sigma)?;
        let mut t = 0.0;
        for i in idx {
            let target = tau[i].abs();
            liouv.propagate(&mut v, target - t);
            t = target;
            let state = liouv.unpack(&v);
            let mut acc = 0.0;
            for s in 0..space.dim() {
                let n = space.occupation(s, to);
                if n > 0 {
                    acc += n as f64 * state.get(s, s).re;
                }
            }
            g[i] = acc / (nx * ny);
        }
        Ok(())
    };
    let positive: Vec<usize> = (0..tau.len()).filter(|&i| tau[i] >= 0.0).collect();
    let negative: Vec<usize> = (0..tau.len()).rev().filter(|&i| tau[i] < 0.0).collect();
    branch(xi, yi, positive, &mut g)?;
    branch(yi, xi, negative, &mut g)?;
    CorrelationGrid::new(x, y, tau.to_vec(), g)
}

/// `a ρ a†` for mode `mode`.
fn jump(space: &HilbertSpace, rho: &SparseOperator, mode: usize) -> SparseOperator {
    let t = rho
        .triplets()
        .into_iter()
        .filter_map(|(r, c, v)| {
            let (r2, ar) = space.apply_leg(r, mode, false)?;
            let (c2, ac) = space.apply_leg(c, mode, false)?;
            Some((r2, c2, v * C64::new(ar * ac, 0.0)))
        })
        .collect();
    SparseOperator::from_triplets(rho.dim(), t)
}

/// Zero-delay `g⁽²⁾_xy(0) = ⟨x†y†yx⟩ / (⟨x†x⟩⟨y†y⟩)`.
pub fn zero_delay_g2(space: &HilbertSpace, state: &QuantumState, x: usize, y: usize) -> Result<f64> {
    let (nx, ny) = (state.number(space, x), state.number(space, y));
    if !(nx > 0.0 && ny > 0.0) {
        return Err(Error::Normalization("zero steady photon number".into()));
    }
    let mut acc = 0.0;
    for s in 0..space.dim() {
        let (a, b) = (space.occupation(s, x) as f64, space.occupation(s, y) as f64);
        let joint = if x == y { a * (a - 1.0) } else { a * b };
        if joint != 0.0 {
            acc += joint * state.rho.get(s, s).re;
        }
    }
    Ok(acc / (nx * ny))
}

/// Same quantity from the Gaussian moments.
pub fn gaussian_cross_correlation(state: &GaussianState, x: &str, y: &str, tau: &[f64]) -> Result<CorrelationGrid> {
    validate_grid(tau)?;
    let (xi, yi) = (state.model.index_of(x)?, state.model.index_of(y)?);
    let (nx, ny) = (state.number(xi), state.number(yi));
    if !(nx > 0.0 && ny > 0.0) {
        return Err(Error::Normalization(format!(
            "⟨n_{x}⟩ = {nx:.3e}, ⟨n_{y}⟩ = {ny:.3e}; g2 is undefined"
        )));
    }
    let excess = state.excess_correlation(xi, yi, tau);
    let g2 = excess.into_iter().map(|e| 1.0 + e / (nx * ny)).collect();
    CorrelationGrid::new(x, y, tau.to_vec(), g2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_hamiltonian, gaussian_oracle, steady_state, HermitianPolicy};
    use crate::process_algebra::{Leg, Mode, Term};

    fn mode(label: &str, kappa: f64) -> Mode {
        Mode::new(label, 0, 1.0, kappa, kappa).unwrap()
    }

    fn symmetric_grid(half: f64, n: usize) -> Vec<f64> {
        (-(n as i64)..=n as i64).map(|i| half * i as f64 / n as f64).collect()
    }

    #[test]
    fn independent_drives_factorize() {
        let modes = vec![mode("a", 1.0), mode("b", 2.0)];
        let terms = vec![
            Term::new(C64::new(0.2, 0.0), vec![Leg::ann("a")], true),
            Term::new(C64::new(0.3, 0.0), vec![Leg::ann("b")], true),
        ];
        let space = HilbertSpace::new(modes, vec![6, 6]).unwrap();
        let h = build_hamiltonian(&space, &terms, HermitianPolicy::Strict).unwrap();
        let ss = steady_state(&space, &h, &[1.0, 2.0]).unwrap();
        let grid = cross_correlation(&space, &h, &[1.0, 2.0], &ss, "a", "b", &symmetric_grid(3.0, 6)).unwrap();
        for g in grid.g2 {
            assert!((g - 1.0).abs() < 1e-6, "{g}");
        }
    }

    #[test]
    fn squeezer_matches_gaussian_and_is_symmetric() {
        let k = 1.0;
        let modes = vec![mode("a", k), mode("b", k)];
        let terms = vec![Term::new(C64::new(0.05, 0.0), vec![Leg::ann("a"), Leg::ann("b")], true)];
        let space = HilbertSpace::new(modes.clone(), vec![6, 6]).unwrap();
        let h = build_hamiltonian(&space, &terms, HermitianPolicy::Strict).unwrap();
        let ss = steady_state(&space, &h, &[k, k]).unwrap();
        let tau = symmetric_grid(4.0, 8);
        let fock = cross_correlation(&space, &h, &[k, k], &ss, "a", "b", &tau).unwrap();
        let gauss = gaussian_oracle(&modes, &terms, HermitianPolicy::Strict).unwrap();
        let exact = gaussian_cross_correlation(&gauss, "a", "b", &tau).unwrap();
        for (f, e) in fock.g2.iter().zip(&exact.g2) {
            assert!((f - e).abs() < 1e-3 * e, "{f} vs {e}");
        }
        assert!(fock.max_asymmetry() < 1e-6);
        assert_eq!(fock.peak().0, 0.0);
    }

    #[test]
    fn low_gain_wings_follow_linewidths() {
        let (ka, kb) = (1.0, 3.0);
        let modes = vec![mode("a", ka), mode("b", kb)];
        let terms = vec![Term::new(C64::new(1e-3, 0.0), vec![Leg::ann("a"), Leg::ann("b")], true)];
        let st = gaussian_oracle(&modes, &terms, HermitianPolicy::Strict).unwrap();
        let grid = gaussian_cross_correlation(&st, "a", "b", &symmetric_grid(4.0, 40)).unwrap();
        let (left, right) = grid.wing_time_constants(1e-3).unwrap();
        // b is detected after a on the right: it decays at κ_b
        assert!((right * kb - 1.0).abs() < 1e-3, "{right}");
        assert!((left * ka - 1.0).abs() < 1e-3, "{left}");
        // field amplitude constant is twice the intensity one
        let sym = gaussian_cross_correlation(
            &gaussian_oracle(&[mode("a", ka), mode("b", ka)], &terms, HermitianPolicy::Strict).unwrap(),
            "a",
            "b",
            &[0.0, 2.0],
        )
        .unwrap();
        let amp_ratio = ((sym.g2[1] - 1.0) / (sym.g2[0] - 1.0)).sqrt();
        assert!((amp_ratio - (-2.0f64 / 2.0).exp()).abs() < 1e-3);
    }

    #[test]
    fn decorrelates_at_long_delay() {
        let modes = vec![mode("a", 1.0), mode("b", 2.0)];
        let terms = vec![Term::new(C64::new(0.1, 0.0), vec![Leg::ann("a"), Leg::ann("b")], true)];
        let st = gaussian_oracle(&modes, &terms, HermitianPolicy::Strict).unwrap();
        let grid = gaussian_cross_correlation(&st, "a", "b", &[-10.0, 10.0]).unwrap();
        for g in grid.g2 {
            assert!((g - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn vacuum_cannot_be_normalized() {
        let space = HilbertSpace::new(vec![mode("a", 1.0), mode("b", 1.0)], vec![2, 2]).unwrap();
        let h = build_hamiltonian(&space, &[], HermitianPolicy::Strict).unwrap();
        let ss = steady_state(&space, &h, &[1.0, 1.0]).unwrap();
        assert!(matches!(
            cross_correlation(&space, &h, &[1.0, 1.0], &ss, "a", "b", &[0.0]),
            Err(Error::Normalization(_))
        ));
    }
}
