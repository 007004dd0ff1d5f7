use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::process_algebra::{Leg, Mode};

/// Default cap on the truncated Hilbert-space dimension.
pub const DEFAULT_MAX_DIM: usize = 1_000_000;

/// Environment variable overriding [`DEFAULT_MAX_DIM`].
pub const MAX_DIM_ENV: &str = "SYNTHWAVE_MAX_DIM";

pub fn configured_max_dim() -> usize {
    std::env::var(MAX_DIM_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_DIM)
}

/// Tensor product of truncated Fock spaces, one per mode. Basis index is
/// mixed-radix with the last mode varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct HilbertSpace {
    modes: Vec<Mode>,
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    dim: usize,
}

impl HilbertSpace {
    pub fn new(modes: Vec<Mode>, cutoffs: Vec<usize>) -> Result<Self> {
        Self::with_limit(modes, cutoffs, configured_max_dim())
    }

    pub fn with_limit(modes: Vec<Mode>, cutoffs: Vec<usize>, max_dim: usize) -> Result<Self> {
        if modes.len() != cutoffs.len() {
            return Err(Error::Structural(format!(
                "{} modes but {} cutoffs",
                modes.len(),
                cutoffs.len()
            )));
        }
        if modes.is_empty() {
            return Err(Error::Structural("Hilbert space needs at least one mode".into()));
        }
        for (i, m) in modes.iter().enumerate() {
            m.validate()?;
            if modes[..i].iter().any(|o| o.label == m.label) {
                return Err(Error::Structural(format!("duplicate mode `{}`", m.label)));
            }
        }
        if let Some(pos) = cutoffs.iter().position(|&c| c < 1) {
            return Err(Error::Domain(format!("cutoff for `{}` must be >= 1", modes[pos].label)));
        }
        let mut dim: usize = 1;
        for &c in &cutoffs {
            dim = dim
                .checked_mul(c + 1)
                .filter(|&d| d <= max_dim)
                .ok_or(Error::DimensionLimit {
                    dim: usize::MAX,
                    limit: max_dim,
                })?;
        }
        if dim > max_dim {
            return Err(Error::DimensionLimit { dim, limit: max_dim });
        }
        let mut strides = vec![1; cutoffs.len()];
        for i in (0..cutoffs.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * (cutoffs[i + 1] + 1);
        }
        Ok(HilbertSpace {
            modes,
            cutoffs,
            strides,
            dim,
        })
    }

    pub fn uniform(modes: Vec<Mode>, cutoff: usize) -> Result<Self> {
        let n = modes.len();
        Self::new(modes, vec![cutoff; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn mode_index(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::Structural(format!("mode `{label}` is not in the Hilbert space")))
    }

    /// Occupation of mode `mode` in basis state `state`.
    #[inline]
    pub fn occupation(&self, state: usize, mode: usize) -> usize {
        (state / self.strides[mode]) % (self.cutoffs[mode] + 1)
    }

    pub fn occupations(&self, state: usize) -> Vec<usize> {
        (0..self.modes.len()).map(|j| self.occupation(state, j)).collect()
    }

    pub fn state_index(&self, occupations: &[usize]) -> usize {
        occupations.iter().zip(&self.strides).map(|(n, s)| n * s).sum()
    }

    /// Applies one ladder operator to a basis state. Returns the target state
    /// and matrix element, or `None` when the result leaves the truncation.
    #[inline]
    pub fn apply_leg(&self, state: usize, mode: usize, dagger: bool) -> Option<(usize, f64)> {
        let n = self.occupation(state, mode);
        if dagger {
            (n < self.cutoffs[mode]).then(|| (state + self.strides[mode], ((n + 1) as f64).sqrt()))
        } else {
            (n > 0).then(|| (state - self.strides[mode], (n as f64).sqrt()))
        }
    }

    /// Applies a leg product (rightmost leg acts first) to a basis state.
    pub fn apply_monomial(&self, state: usize, legs: &[(usize, bool)]) -> Option<(usize, f64)> {
        let mut s = state;
        let mut amp = 1.0;
        for &(mode, dagger) in legs.iter().rev() {
            let (next, a) = self.apply_leg(s, mode, dagger)?;
            s = next;
            amp *= a;
        }
        Some((s, amp))
    }

    pub fn resolve_legs(&self, legs: &[Leg]) -> Result<Vec<(usize, bool)>> {
        legs.iter().map(|l| Ok((self.mode_index(&l.mode)?, l.dagger))).collect()
    }

    pub fn annihilation(&self, mode: usize) -> SparseOperator {
        let mut triplets = Vec::with_capacity(self.dim);
        for s in 0..self.dim {
            if let Some((t, a)) = self.apply_leg(s, mode, false) {
                triplets.push((t, s, C64::new(a, 0.0)));
            }
        }
        SparseOperator::from_triplets(self.dim, triplets)
    }

    pub fn number_diagonal(&self, mode: usize) -> Vec<f64> {
        (0..self.dim).map(|s| self.occupation(s, mode) as f64).collect()
    }
}

/// Compressed-row sparse complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseOperator {
    /// Builds from (row, col, value) triplets, summing duplicates and
    /// dropping exact zeros.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; dim + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            indptr[r + 1] += indptr[r];
        }
        let mut op = SparseOperator {
            dim,
            indptr,
            indices,
            values,
        };
        op.prune();
        op
    }

    fn prune(&mut self) {
        if self.values.iter().all(|v| *v != C64::new(0.0, 0.0)) {
            return;
        }
        let mut indptr = vec![0; self.dim + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.dim {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != C64::new(0.0, 0.0) {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn zeros(dim: usize) -> Self {
        SparseOperator {
            dim,
            indptr: vec![0; dim + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map(|(_, v)| v)
            .unwrap_or_default()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        (0..self.dim)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        SparseOperator::from_triplets(self.dim, t)
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut out = vec![vec![C64::default(); self.dim]; self.dim];
        for (r, c, v) in self.triplets() {
            out[r][c] = v;
        }
        out
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::default(); self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::default();
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    /// Largest deviation from Hermiticity, max |A_rc − conj(A_cr)|.
    pub fn hermiticity_error(&self) -> f64 {
        self.triplets()
            .into_iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Gershgorin bound on the spectral radius.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}
