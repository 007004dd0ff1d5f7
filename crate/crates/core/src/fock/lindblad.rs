use std::collections::{HashMap, VecDeque};

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64 as C64;

use super::space::{HilbertSpace, SparseOperator};
use crate::error::{Error, Result};

/// Reduced systems up to this size are solved with a dense LU; larger ones
/// use a sparse LU.
pub const DENSE_SOLVE_LIMIT: usize = 4000;

/// Cap on the number of density-matrix elements in a restricted
/// Liouvillian; larger systems are a dimension-limit error. LU fill grows
/// roughly as n^1.7 for three modes (18k elements already needs ~2.3 GB),
/// so this is set by memory, not by how large a matrix can be assembled.
pub const MAX_LIOUVILLE_SIZE: usize = 20_000;

/// Scaled residual accepted for a steady state.
pub const STEADY_TOLERANCE: f64 = 1e-8;

/// Density matrix on a truncated basis, stored sparsely, with the time it
/// refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub rho: SparseOperator,
    pub time: f64,
}

impl QuantumState {
    pub fn basis(dim: usize, state: usize) -> Self {
        QuantumState {
            rho: SparseOperator::from_triplets(dim, vec![(state, state, C64::new(1.0, 0.0))]),
            time: 0.0,
        }
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::basis(dim, 0)
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|s| self.rho.get(s, s)).sum()
    }

    /// `⟨a_j†a_j⟩`.
    pub fn number(&self, space: &HilbertSpace, mode: usize) -> f64 {
        self.rho
            .triplets()
            .into_iter()
            .filter(|&(r, c, _)| r == c)
            .map(|(s, _, v)| space.occupation(s, mode) as f64 * v.re)
            .sum()
    }

    /// `Tr(A ρ)`.
    pub fn expect(&self, op: &SparseOperator) -> C64 {
        trace_product(op, &self.rho)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.rho.hermiticity_error()
    }

    /// Smallest eigenvalue of ρ (dense diagonalization).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let dense = self.rho.to_dense();
        let n = self.dim();
        let m = Mat::<C64>::from_fn(n, n, |i, j| dense[i][j]);
        let eig = m
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::Internal(format!("eigenvalue solver failed: {e:?}")))?;
        Ok(eig.into_iter().fold(f64::INFINITY, f64::min))
    }
}

/// `Tr(A B)` for two sparse operators.
pub fn trace_product(a: &SparseOperator, b: &SparseOperator) -> C64 {
    let mut acc = C64::default();
    for r in 0..a.dim() {
        for (c, v) in a.row(r) {
            acc += v * b.get(c, r);
        }
    }
    acc
}

/// Lindblad generator `L ρ = −i[H, ρ] + Σ_j κ_j D[a_j] ρ`, restricted to the
/// density-matrix elements reachable from a seed set.
///
/// Vacuum-seeded pair sources only populate a few number sectors, so the
/// restriction is far smaller than the full `dim²` superoperator.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    elements: Vec<(usize, usize)>,
    lookup: HashMap<u64, usize>,
    matrix: SparseOperator,
    hamiltonian_bound: f64,
    kappa_max: f64,
}

impl Liouvillian {
    pub fn reachable(
        space: &HilbertSpace,
        h: &SparseOperator,
        losses: &[f64],
        seeds: &[(usize, usize)],
    ) -> Result<Self> {
        let dim = space.dim();
        if h.dim() != dim {
            return Err(Error::Structural(format!(
                "Hamiltonian dimension {} does not match the space ({dim})",
                h.dim()
            )));
        }
        validate_losses(space, losses)?;
        let key = |k: usize, l: usize| (k as u64) * (dim as u64) + l as u64;

        let mut elements = Vec::new();
        let mut lookup = HashMap::new();
        let mut queue = VecDeque::new();
        for &(k, l) in seeds {
            if lookup.insert(key(k, l), elements.len()).is_none() {
                elements.push((k, l));
                queue.push_back(elements.len() - 1);
            }
        }

        let minus_i = C64::new(0.0, -1.0);
        let mut triplets = Vec::new();
        let mut out: Vec<((usize, usize), C64)> = Vec::new();
        while let Some(src) = queue.pop_front() {
            let (k, l) = elements[src];
            out.clear();
            // −i H ρ: (i, l) ← H_ik ρ_kl, with H_ik = conj(H_ki)
            for (i, v) in h.row(k) {
                out.push(((i, l), minus_i * v.conj()));
            }
            // +i ρ H: (k, j) ← ρ_kl H_lj
            for (j, v) in h.row(l) {
                out.push(((k, j), -minus_i * v));
            }
            let mut diag = 0.0;
            for (m, &kappa) in losses.iter().enumerate() {
                if kappa == 0.0 {
                    continue;
                }
                diag -= 0.5 * kappa * (space.occupation(k, m) + space.occupation(l, m)) as f64;
                if let (Some((k2, ak)), Some((l2, al))) = (space.apply_leg(k, m, false), space.apply_leg(l, m, false)) {
                    out.push(((k2, l2), C64::new(kappa * ak * al, 0.0)));
                }
            }
            if diag != 0.0 {
                out.push(((k, l), C64::new(diag, 0.0)));
            }
            for &((r, c), v) in &out {
                if elements.len() > MAX_LIOUVILLE_SIZE {
                    return Err(Error::DimensionLimit {
                        dim: elements.len(),
                        limit: MAX_LIOUVILLE_SIZE,
                    });
                }
                let idx = *lookup.entry(key(r, c)).or_insert_with(|| {
                    elements.push((r, c));
                    queue.push_back(elements.len() - 1);
                    elements.len() - 1
                });
                triplets.push((idx, src, v));
            }
        }
        let matrix = SparseOperator::from_triplets(elements.len(), triplets);
        Ok(Liouvillian {
            dim,
            elements,
            lookup,
            matrix,
            hamiltonian_bound: h.gershgorin_bound(),
            kappa_max: losses.iter().cloned().fold(0.0, f64::max),
        })
    }

    /// Number of density-matrix elements in the restricted system.
    pub fn size(&self) -> usize {
        self.elements.len()
    }

    pub fn matrix(&self) -> &SparseOperator {
        &self.matrix
    }

    pub fn index_of(&self, k: usize, l: usize) -> Option<usize> {
        self.lookup.get(&((k as u64) * (self.dim as u64) + l as u64)).copied()
    }

    /// Scatters a density matrix into the reduced vector. Elements outside
    /// the reachable set are an error.
    pub fn pack(&self, rho: &SparseOperator) -> Result<Vec<C64>> {
        let mut x = vec![C64::default(); self.size()];
        for (r, c, v) in rho.triplets() {
            let idx = self
                .index_of(r, c)
                .ok_or_else(|| Error::Internal(format!("element ({r}, {c}) outside the reachable set")))?;
            x[idx] = v;
        }
        Ok(x)
    }

    pub fn unpack(&self, x: &[C64]) -> SparseOperator {
        let t = self.elements.iter().zip(x).map(|(&(r, c), &v)| (r, c, v)).collect();
        SparseOperator::from_triplets(self.dim, t)
    }

    /// Fixed RK4 step: at most `0.01 / max(‖H‖, κ_max)`.
    pub fn max_step(&self) -> f64 {
        let scale = self.hamiltonian_bound.max(self.kappa_max);
        if scale > 0.0 {
            0.01 / scale
        } else {
            f64::INFINITY
        }
    }

    /// Integrates `dx/dt = L x` over `duration` with fixed-step RK4.
    pub fn propagate(&self, x: &mut Vec<C64>, duration: f64) {
        if duration <= 0.0 {
            return;
        }
        let steps = (duration / self.max_step()).ceil().max(1.0) as usize;
        let h = duration / steps as f64;
        let n = x.len();
        let (mut k1, mut k2, mut k3, mut k4) = (
            vec![C64::default(); n],
            vec![C64::default(); n],
            vec![C64::default(); n],
            vec![C64::default(); n],
        );
        let mut tmp = vec![C64::default(); n];
        for _ in 0..steps {
            self.matrix.mul_vec_into(x, &mut k1);
            axpy_into(&mut tmp, x, 0.5 * h, &k1);
            self.matrix.mul_vec_into(&tmp, &mut k2);
            axpy_into(&mut tmp, x, 0.5 * h, &k2);
            self.matrix.mul_vec_into(&tmp, &mut k3);
            axpy_into(&mut tmp, x, h, &k3);
            self.matrix.mul_vec_into(&tmp, &mut k4);
            for i in 0..n {
                x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }

    /// `‖L x‖_∞ / (‖L‖ ‖x‖_∞)`.
    pub fn scaled_residual(&self, x: &[C64]) -> f64 {
        let r = self.matrix.mul_vec(x);
        let rn = r.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let xn = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let ln = self.matrix.gershgorin_bound();
        if xn == 0.0 || ln == 0.0 {
            return rn;
        }
        rn / (ln * xn)
    }

    /// Solves `L x = 0` with unit trace. Small systems replace the equation
    /// for the first diagonal element by the trace condition.
    pub fn steady_state(&self) -> Result<Vec<C64>> {
        let n = self.size();
        let diag: Vec<usize> = (0..n).filter(|&i| self.elements[i].0 == self.elements[i].1).collect();
        let Some(&pinned) = diag.first() else {
            return Err(Error::Structural("reachable set has no diagonal element".into()));
        };
        let x = if n <= DENSE_SOLVE_LIMIT {
            let mut a = Mat::<C64>::zeros(n, n);
            for (r, c, v) in self.matrix.triplets() {
                if r != pinned {
                    a[(r, c)] = v;
                }
            }
            for &d in &diag {
                a[(pinned, d)] = C64::new(1.0, 0.0);
            }
            let mut b = Mat::<C64>::zeros(n, 1);
            b[(pinned, 0)] = C64::new(1.0, 0.0);
            let sol = a.partial_piv_lu().solve(&b);
            (0..n).map(|i| sol[(i, 0)]).collect::<Vec<_>>()
        } else {
            // basis index 0 is the vacuum, populated in any damped steady state
            let vac = self.elements.iter().position(|&e| e == (0, 0)).unwrap_or(pinned);
            self.sparse_steady_state(vac, &diag)?
        };
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Convergence {
                iterations: 1,
                residual: f64::INFINITY,
            });
        }
        let residual = self.scaled_residual(&x);
        if residual > STEADY_TOLERANCE {
            return Err(Error::Convergence {
                iterations: 1,
                residual,
            });
        }
        Ok(x)
    }

    /// Sparse path. A trace row would touch every diagonal element and wreck
    /// the factor's sparsity, so ρ at `pinned` (the vacuum when it is
    /// reachable) is fixed to one instead and the result normalised after.
    fn sparse_steady_state(&self, pinned: usize, diag: &[usize]) -> Result<Vec<C64>> {
        use faer::sparse::{SparseColMat, Triplet};
        let n = self.size();
        let mut entries: Vec<Triplet<usize, usize, C64>> = self
            .matrix
            .triplets()
            .into_iter()
            .filter(|&(r, _, _)| r != pinned)
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        entries.push(Triplet::new(pinned, pinned, C64::new(1.0, 0.0)));
        let a = SparseColMat::<usize, C64>::try_new_from_triplets(n, n, &entries)
            .map_err(|e| Error::Internal(format!("sparse assembly failed: {e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| Error::Internal(format!("sparse LU failed: {e:?}")))?;
        let mut b = Mat::<C64>::zeros(n, 1);
        b[(pinned, 0)] = C64::new(1.0, 0.0);
        let sol = lu.solve(&b);
        let trace: C64 = diag.iter().map(|&d| sol[(d, 0)]).sum();
        if !(trace.norm() > 0.0) {
            return Err(Error::Convergence {
                iterations: 1,
                residual: f64::INFINITY,
            });
        }
        Ok((0..n).map(|i| sol[(i, 0)] / trace).collect())
    }
}

fn axpy_into(out: &mut [C64], x: &[C64], a: f64, y: &[C64]) {
    for i in 0..out.len() {
        out[i] = x[i] + a * y[i];
    }
}

fn validate_losses(space: &HilbertSpace, losses: &[f64]) -> Result<()> {
    if losses.len() != space.modes().len() {
        return Err(Error::Structural(format!(
            "{} loss rates for {} modes",
            losses.len(),
            space.modes().len()
        )));
    }
    if let Some(k) = losses.iter().find(|k| !(**k >= 0.0) || !k.is_finite()) {
        return Err(Error::Domain(format!("loss rate must be finite and >= 0, got {k}")));
    }
    Ok(())
}

/// What [`lindblad_solve`] should produce.
#[derive(Debug, Clone)]
pub enum LindbladTarget<'a> {
    /// States at each time of a nondecreasing grid, starting from `initial`.
    Trajectory {
        initial: &'a QuantumState,
        times: &'a [f64],
    },
    /// The steady state reached from vacuum.
    Steady,
}

pub fn lindblad_solve(
    space: &HilbertSpace,
    h: &SparseOperator,
    losses: &[f64],
    target: LindbladTarget<'_>,
) -> Result<Vec<QuantumState>> {
    match target {
        LindbladTarget::Steady => Ok(vec![steady_state(space, h, losses)?]),
        LindbladTarget::Trajectory { initial, times } => evolve(space, h, losses, initial, times),
    }
}

pub fn steady_state(space: &HilbertSpace, h: &SparseOperator, losses: &[f64]) -> Result<QuantumState> {
    let liouv = Liouvillian::reachable(space, h, losses, &[(0, 0)])?;
    let x = liouv.steady_state()?;
    Ok(QuantumState {
        rho: hermitize(&liouv.unpack(&x)),
        time: f64::INFINITY,
    })
}

pub fn evolve(
    space: &HilbertSpace,
    h: &SparseOperator,
    losses: &[f64],
    initial: &QuantumState,
    times: &[f64],
) -> Result<Vec<QuantumState>> {
    if initial.dim() != space.dim() {
        return Err(Error::Structural(
            "initial state dimension does not match the space".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < initial.time) {
        return Err(Error::Domain(
            "time grid must be nondecreasing and start at or after the initial time".into(),
        ));
    }
    let seeds: Vec<_> = initial.rho.triplets().into_iter().map(|(r, c, _)| (r, c)).collect();
    let liouv = Liouvillian::reachable(space, h, losses, &seeds)?;
    let mut x = liouv.pack(&initial.rho)?;
    let mut t = initial.time;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        liouv.propagate(&mut x, target - t);
        t = target;
        out.push(QuantumState {
            rho: liouv.unpack(&x),
            time: t,
        });
    }
    Ok(out)
}

fn hermitize(rho: &SparseOperator) -> SparseOperator {
    let mut t: Vec<_> = rho.triplets().into_iter().map(|(r, c, v)| (r, c, 0.5 * v)).collect();
    t.extend(rho.triplets().into_iter().map(|(r, c, v)| (c, r, 0.5 * v.conj())));
    SparseOperator::from_triplets(rho.dim(), t)
}
