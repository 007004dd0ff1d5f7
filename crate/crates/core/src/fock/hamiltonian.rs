use num_complex::Complex64 as C64;

use super::space::{HilbertSpace, SparseOperator};
use crate::error::{Error, Result};
use crate::process_algebra::{format_monomial, Term};

/// How terms flagged non-Hermitian (complex Λ products) are admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HermitianPolicy {
    /// Reject flagged terms.
    #[default]
    Strict,
    /// Admit them with the conjugate-coupling partner, which makes the
    /// Hamiltonian Hermitian.
    ConjugatePartner,
}

/// Assembles `H = Σ δ_j a_j†a_j + Σ_terms (g X + h.c.)` on the truncated
/// basis. Leg products act right to left.
pub fn build_hamiltonian(space: &HilbertSpace, terms: &[Term], policy: HermitianPolicy) -> Result<SparseOperator> {
    let dim = space.dim();
    let mut triplets = Vec::new();

    for (j, mode) in space.modes().iter().enumerate() {
        if mode.delta != 0.0 {
            for s in 0..dim {
                let n = space.occupation(s, j);
                if n > 0 {
                    triplets.push((s, s, C64::new(mode.delta * n as f64, 0.0)));
                }
            }
        }
    }

    for term in terms {
        let legs = space.resolve_legs(&term.legs)?;
        if term.non_hermitian && policy == HermitianPolicy::Strict {
            return Err(Error::Structural(format!(
                "term {} has a complex Λ product (non-Hermitian); opt in to use its conjugate partner",
                format_monomial(&term.legs)
            )));
        }
        if !term.is_hermitian() {
            return Err(Error::Structural(format!(
                "term {} is not Hermitian and has no h.c. partner",
                format_monomial(&term.legs)
            )));
        }
        if term.g == C64::new(0.0, 0.0) {
            continue;
        }
        for s in 0..dim {
            if let Some((t, amp)) = space.apply_monomial(s, &legs) {
                let v = term.g * amp;
                triplets.push((t, s, v));
                if term.hermitian_pair {
                    triplets.push((s, t, v.conj()));
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(dim, triplets))
}
