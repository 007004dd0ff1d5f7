//! Truncated-Fock open-system engine and the Gaussian covariance oracle.

mod convergence;
mod correlation;
mod flux;
mod gaussian;
mod hamiltonian;
mod lindblad;
mod space;

pub use convergence::{
    converge_cutoffs, virtual_mode_convergence, ConvergedRun, ConvergenceRow, CutoffCheck, CutoffOptions, SolverChoice,
    VirtualModeSetup, DEFAULT_CUTOFF,
};
pub use correlation::{cross_correlation, gaussian_cross_correlation, zero_delay_g2, CorrelationGrid};
pub use flux::{gaussian_pair_flux, pair_flux, PairFlux};
pub use gaussian::{expm, gaussian_oracle, solve_lyapunov, GaussianState, QuadraticModel};
pub use hamiltonian::{build_hamiltonian, HermitianPolicy};
pub use lindblad::{
    evolve, lindblad_solve, steady_state, trace_product, LindbladTarget, Liouvillian, QuantumState, DENSE_SOLVE_LIMIT,
    MAX_LIOUVILLE_SIZE, STEADY_TOLERANCE,
};
pub use space::{configured_max_dim, HilbertSpace, SparseOperator, DEFAULT_MAX_DIM, MAX_DIM_ENV};
