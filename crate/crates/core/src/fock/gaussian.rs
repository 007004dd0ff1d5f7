use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;

use super::HermitianPolicy;
use crate::error::{Error, Result};
use crate::process_algebra::{format_monomial, Mode, Term};

/// Bilinear open-system model `H = Σ h_jk a_j†a_k + ½Σ (s_jk a_j†a_k† + h.c.)`
/// with per-mode decay, written in the pump rotating frame.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub labels: Vec<String>,
    pub kappa: Vec<f64>,
    pub kappa_ext: Vec<f64>,
    pub detuning: Vec<f64>,
    /// Hermitian coupling part of `h` (detunings excluded).
    pub h: Vec<Vec<C64>>,
    /// Symmetric pairing matrix.
    pub s: Vec<Vec<C64>>,
}

impl QuadraticModel {
    pub fn new(modes: &[Mode], terms: &[Term], policy: HermitianPolicy) -> Result<Self> {
        let n = modes.len();
        if n == 0 {
            return Err(Error::Structural("quadratic model needs at least one mode".into()));
        }
        for m in modes {
            m.validate()?;
        }
        let index = |label: &str| {
            modes
                .iter()
                .position(|m| m.label == label)
                .ok_or_else(|| Error::Structural(format!("mode `{label}` is not in the model")))
        };
        let zero = C64::default();
        let mut h = vec![vec![zero; n]; n];
        let mut s = vec![vec![zero; n]; n];
        for term in terms {
            let name = format_monomial(&term.legs);
            if term.non_hermitian && policy == HermitianPolicy::Strict {
                return Err(Error::Structural(format!(
                    "term {name} has a complex Λ product (non-Hermitian); opt in to use its conjugate partner"
                )));
            }
            if !term.is_hermitian() {
                return Err(Error::Structural(format!(
                    "term {name} is not Hermitian and has no h.c. partner"
                )));
            }
            match term.legs.len() {
                0 => continue,
                1 => {
                    return Err(Error::Domain(format!(
                        "linear term {name}: the covariance oracle handles zero-mean (pair-source) models only"
                    )))
                }
                2 => {}
                k => {
                    return Err(Error::Domain(format!(
                        "term {name} has {k} legs; reduce pumps to reach a bilinear form first"
                    )))
                }
            }
            let (l0, l1) = (&term.legs[0], &term.legs[1]);
            let (j, k) = (index(&l0.mode)?, index(&l1.mode)?);
            let g = term.g;
            // the h.c. partner is implied when hermitian_pair is set; a lone
            // self-adjoint term counts once
            let pair = if term.hermitian_pair { 1.0 } else { 0.5 };
            match (l0.dagger, l1.dagger) {
                (false, false) => {
                    // g a_j a_k + g* a_k† a_j†
                    let v = 2.0 * pair * g.conj();
                    add_pairing(&mut s, j, k, v);
                }
                (true, true) => {
                    let v = 2.0 * pair * g;
                    add_pairing(&mut s, j, k, v);
                }
                (true, false) | (false, true) => {
                    // a_j† a_k (or a_k a_j†, equal up to a constant)
                    let (c, a) = if l0.dagger { (j, k) } else { (k, j) };
                    if term.hermitian_pair {
                        h[c][a] += g;
                        h[a][c] += g.conj();
                    } else {
                        h[c][a] += g;
                    }
                }
            }
        }
        Ok(QuadraticModel {
            labels: modes.iter().map(|m| m.label.clone()).collect(),
            kappa: modes.iter().map(|m| m.kappa).collect(),
            kappa_ext: modes.iter().map(|m| m.kappa_ext).collect(),
            detuning: modes.iter().map(|m| m.delta).collect(),
            h,
            s,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Structural(format!("mode `{label}` is not in the model")))
    }

    /// Copy with every coupling (not detuning or loss) multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = self.clone();
        for row in out.h.iter_mut().chain(out.s.iter_mut()) {
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        out
    }

    /// Drift matrix of `d(a, a†)/dt = 𝒜 (a, a†) + noise`.
    pub fn drift(&self) -> Mat<C64> {
        let n = self.len();
        let mi = C64::new(0.0, -1.0);
        Mat::from_fn(2 * n, 2 * n, |r, c| {
            let (rb, ri) = (r / n, r % n);
            let (cb, ci) = (c / n, c % n);
            let mut a = mi * self.h[ri][ci];
            if ri == ci {
                a += C64::new(-0.5 * self.kappa[ri], -self.detuning[ri]);
            }
            match (rb, cb) {
                (0, 0) => a,
                (0, 1) => mi * self.s[ri][ci],
                (1, 0) => (mi * self.s[ri][ci]).conj(),
                _ => a.conj(),
            }
        })
    }

    /// Largest real part of the drift spectrum; negative means stable.
    pub fn max_growth_rate(&self) -> Result<f64> {
        let eig = self
            .drift()
            .eigenvalues()
            .map_err(|e| Error::Internal(format!("eigenvalue solver failed: {e:?}")))?;
        Ok(eig.into_iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
    }

    /// Factor by which the couplings exceed the parametric threshold:
    /// `1/s_c` where scaling all couplings by `s_c` puts the first drift
    /// eigenvalue on the imaginary axis. Zero if no scale destabilizes.
    pub fn gain_ratio(&self) -> Result<f64> {
        let unstable = |s: f64| -> Result<bool> { Ok(self.scaled(s).max_growth_rate()? >= 0.0) };
        let (mut lo, mut hi) = if unstable(1.0)? {
            (0.0, 1.0)
        } else {
            let mut hi = 2.0;
            while !unstable(hi)? {
                hi *= 2.0;
                if hi > 1e12 {
                    return Ok(0.0);
                }
            }
            (hi / 2.0, hi)
        };
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if unstable(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(1.0 / hi)
    }

    pub fn check_threshold(&self) -> Result<()> {
        if self.max_growth_rate()? >= 0.0 {
            return Err(Error::Threshold {
                gain_ratio: self.gain_ratio()?,
                detail: "linearized drift has a non-decaying eigenvalue".into(),
            });
        }
        Ok(())
    }

    /// Steady second moments from the Lyapunov equation, by direct linear
    /// algebra.
    pub fn steady_state(&self) -> Result<GaussianState> {
        self.check_threshold()?;
        let n = self.len();
        let drift = self.drift();
        // real quadrature drift Ar = T† 𝒜 T, r = (x, p)
        let t = quadrature_transform(n);
        let ar = t.adjoint() * &drift * &t;
        let mut noise = Mat::<C64>::zeros(2 * n, 2 * n);
        for j in 0..n {
            noise[(j, j)] = C64::new(0.5 * self.kappa[j], 0.0);
            noise[(n + j, n + j)] = C64::new(0.5 * self.kappa[j], 0.0);
        }
        let v = solve_lyapunov(&ar, &noise)?;
        let cov: Vec<Vec<f64>> = (0..2 * n).map(|r| (0..2 * n).map(|c| v[(r, c)].re).collect()).collect();

        let mut normal = vec![vec![C64::default(); n]; n];
        let mut anomalous = vec![vec![C64::default(); n]; n];
        for j in 0..n {
            for k in 0..n {
                let (xx, pp) = (cov[j][k], cov[n + j][n + k]);
                let (xp, px) = (cov[j][n + k], cov[n + j][k]);
                normal[j][k] = 0.5 * C64::new(xx + pp, xp - px) - if j == k { 0.5 } else { 0.0 };
                anomalous[j][k] = 0.5 * C64::new(xx - pp, xp + px);
            }
        }
        Ok(GaussianState {
            model: self.clone(),
            covariance: cov,
            normal,
            anomalous,
        })
    }
}

fn add_pairing(s: &mut [Vec<C64>], j: usize, k: usize, v: C64) {
    if j == k {
        s[j][j] += v;
    } else {
        s[j][k] += 0.5 * v;
        s[k][j] += 0.5 * v;
    }
}

/// `(a, a†) = T (x, p)`, unitary.
fn quadrature_transform(n: usize) -> Mat<C64> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Mat::from_fn(2 * n, 2 * n, |row, col| {
        if row % n != col % n {
            return C64::default();
        }
        match (row / n, col / n) {
            (0, 0) | (1, 0) => C64::new(r, 0.0),
            (0, 1) => C64::new(0.0, r),
            _ => C64::new(0.0, -r),
        }
    })
}

/// Solves `A X + X A† + Q = 0` by vectorization.
pub fn solve_lyapunov(a: &Mat<C64>, q: &Mat<C64>) -> Result<Mat<C64>> {
    let n = a.nrows();
    let m = n * n;
    let mut big = Mat::<C64>::zeros(m, m);
    let mut rhs = Mat::<C64>::zeros(m, 1);
    let idx = |r: usize, c: usize| r + c * n;
    for i in 0..n {
        for j in 0..n {
            let row = idx(i, j);
            for k in 0..n {
                big[(row, idx(k, j))] += a[(i, k)];
                big[(row, idx(i, k))] += a[(j, k)].conj();
            }
            rhs[(row, 0)] = -q[(i, j)];
        }
    }
    let sol = big.partial_piv_lu().solve(&rhs);
    let x = Mat::from_fn(n, n, |i, j| sol[(idx(i, j), 0)]);
    if (0..n).any(|i| (0..n).any(|j| !x[(i, j)].re.is_finite() || !x[(i, j)].im.is_finite())) {
        return Err(Error::Convergence {
            iterations: 1,
            residual: f64::INFINITY,
        });
    }
    Ok(x)
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(a: &Mat<C64>) -> Mat<C64> {
    let n = a.nrows();
    let norm = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * faer::Scale(C64::new(0.5f64.powi(squarings), 0.0));
    let mut result = Mat::<C64>::identity(n, n);
    let mut term = Mat::<C64>::identity(n, n);
    for k in 1..=18 {
        term = &term * &scaled * faer::Scale(C64::new(1.0 / k as f64, 0.0));
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Steady Gaussian state: quadrature covariance (x block then p block,
/// vacuum = I/2) and the normal/anomalous moment matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub model: QuadraticModel,
    pub covariance: Vec<Vec<f64>>,
    /// `⟨a_j† a_k⟩`.
    pub normal: Vec<Vec<C64>>,
    /// `⟨a_j a_k⟩`.
    pub anomalous: Vec<Vec<C64>>,
}

impl GaussianState {
    pub fn number(&self, mode: usize) -> f64 {
        self.normal[mode][mode].re
    }

    pub fn numbers(&self) -> Vec<f64> {
        (0..self.model.len()).map(|j| self.number(j)).collect()
    }

    /// Output photon flux `κ_ext ⟨n⟩` [photons/s].
    pub fn flux(&self, mode: usize) -> f64 {
        self.model.kappa_ext[mode] * self.number(mode)
    }

    /// `u = ⟨(a, a†) x⟩`, the initial vector of the regression equations.
    fn regression_seed(&self, x: usize) -> Mat<C64> {
        let n = self.model.len();
        Mat::from_fn(2 * n, 1, |r, _| {
            if r < n {
                self.anomalous[r][x]
            } else {
                self.normal[r - n][x]
            }
        })
    }

    /// Excess coincidence `G⁽²⁾_xy(τ) − ⟨n_x⟩⟨n_y⟩` on a τ grid; negative τ
    /// swaps the roles of x and y.
    pub fn excess_correlation(&self, x: usize, y: usize, taus: &[f64]) -> Vec<f64> {
        let drift = self.model.drift();
        let n = self.model.len();
        taus.iter()
            .map(|&tau| {
                let (from, to) = if tau >= 0.0 { (x, y) } else { (y, x) };
                let prop = expm(&(&drift * faer::Scale(C64::new(tau.abs(), 0.0))));
                let u = &prop * &self.regression_seed(from);
                u[(to, 0)].norm_sqr() + u[(n + to, 0)].norm_sqr()
            })
            .collect()
    }

    /// Integrals of the excess coincidence over τ ≥ 0 and τ ≤ 0.
    pub fn excess_integrals(&self, x: usize, y: usize) -> Result<(f64, f64)> {
        let drift = self.model.drift();
        let n = self.model.len();
        let side = |from: usize, to: usize| -> Result<f64> {
            let u = self.regression_seed(from);
            let q = &u * u.adjoint();
            let xm = solve_lyapunov(&drift, &q)?;
            Ok(xm[(to, to)].re + xm[(n + to, n + to)].re)
        };
        Ok((side(x, y)?, side(y, x)?))
    }

    /// Rate of detected-at-the-bus coincidences `κ_ext,x κ_ext,y ∫ excess dτ`
    /// [pairs/s].
    pub fn coincidence_rate(&self, x: usize, y: usize) -> Result<f64> {
        let (plus, minus) = self.excess_integrals(x, y)?;
        Ok(self.model.kappa_ext[x] * self.model.kappa_ext[y] * (plus + minus))
    }

    /// Effective wing widths `∫ excess / excess(0)` on each side [s].
    pub fn wing_widths(&self, x: usize, y: usize) -> Result<(f64, f64)> {
        let (plus, minus) = self.excess_integrals(x, y)?;
        let peak = self.excess_correlation(x, y, &[0.0])[0];
        if peak <= 0.0 {
            return Err(Error::Normalization("no excess correlation between the modes".into()));
        }
        Ok((minus / peak, plus / peak))
    }
}

/// Steady state of a bilinear model; see [`QuadraticModel::steady_state`].
pub fn gaussian_oracle(modes: &[Mode], terms: &[Term], policy: HermitianPolicy) -> Result<GaussianState> {
    QuadraticModel::new(modes, terms, policy)?.steady_state()
}
