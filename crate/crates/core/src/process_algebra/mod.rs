//! Cavity modes, multilinear interaction vertices and the synthesis of
//! effective high-order processes.
//!
//! A vertex is a monomial in ladder operators with a complex coupling rate,
//! e.g. `g3 (a b d†²)`. Vertices that share a mode can be composed by
//! treating that mode as a virtual excitation: each contracted
//! creation/annihilation pair on the virtual mode contributes one factor
//! `1/Λ`, with `Λ = δ − iκ/2` by default. Composing `g3 (a b d†²)` with
//! `g2 (b† d† c)` over `b` gives `(g2 g3 / Λ_b) d†³ a c`.
//!
//! All rates are angular frequencies in rad/s.

mod conservation;
mod coupling;
mod enumerate;
mod synthesis;

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conservation::{check_conservation, default_energy_tolerance, ConservationReport};
pub use coupling::{estimate_intrinsic_coupling, CouplingReference};
pub use enumerate::enumerate_syntheses;
pub use synthesis::{classical_pump_reduce, synthesize_effective, synthesize_staged};

/// Reduced Planck constant [J s].
pub const HBAR: f64 = 1.054_571_817e-34;

/// A single cavity resonance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub label: String,
    /// Relative azimuthal (angular-momentum) index.
    pub m: i32,
    /// Resonance angular frequency [rad/s].
    pub omega: f64,
    /// Total linewidth [rad/s].
    pub kappa: f64,
    /// External (bus-waveguide) coupling rate [rad/s].
    pub kappa_ext: f64,
    /// Detuning from the rotating-frame reference, `ω_mode − ω_frame` [rad/s].
    #[serde(default)]
    pub delta: f64,
}

impl Mode {
    pub fn new(label: impl Into<String>, m: i32, omega: f64, kappa: f64, kappa_ext: f64) -> Result<Self> {
        let mode = Mode {
            label: label.into(),
            m,
            omega,
            kappa,
            kappa_ext,
            delta: 0.0,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.is_empty() {
            return Err(Error::Structural("mode label must be non-empty".into()));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::Domain(format!(
                "mode `{}`: kappa must be positive and finite, got {}",
                self.label, self.kappa
            )));
        }
        if !(self.kappa_ext >= 0.0 && self.kappa_ext <= self.kappa) {
            return Err(Error::Domain(format!(
                "mode `{}`: need 0 <= kappa_ext <= kappa, got kappa_ext = {}, kappa = {}",
                self.label, self.kappa_ext, self.kappa
            )));
        }
        if !self.omega.is_finite() || !self.delta.is_finite() {
            return Err(Error::Domain(format!("mode `{}`: non-finite frequency", self.label)));
        }
        Ok(())
    }

    /// Default elimination denominator `Λ = δ − iκ/2`.
    pub fn lambda(&self) -> C64 {
        C64::new(self.delta, -0.5 * self.kappa)
    }

    /// Intracavity photon number for an on-chip power `power` [W] driving
    /// this mode through its external port: `n = κ_ext P / (ħω ((κ/2)² + δ²))`,
    /// which is `4 κ_ext P / (ħω κ²)` on resonance.
    pub fn photon_number(&self, power: f64) -> f64 {
        let half = 0.5 * self.kappa;
        self.kappa_ext * power / (HBAR * self.omega * (half * half + self.delta * self.delta))
    }
}

/// A set of modes with unique labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModeGraph {
    modes: Vec<Mode>,
    index: HashMap<String, usize>,
}

impl ModeGraph {
    pub fn new(modes: Vec<Mode>) -> Result<Self> {
        let mut index = HashMap::with_capacity(modes.len());
        for (i, mode) in modes.iter().enumerate() {
            mode.validate()?;
            if index.insert(mode.label.clone(), i).is_some() {
                return Err(Error::Structural(format!("duplicate mode label `{}`", mode.label)));
            }
        }
        Ok(ModeGraph { modes, index })
    }

    pub fn get(&self, label: &str) -> Option<&Mode> {
        self.index.get(label).map(|&i| &self.modes[i])
    }

    pub fn require(&self, label: &str) -> Result<&Mode> {
        self.get(label)
            .ok_or_else(|| Error::Structural(format!("unknown mode `{label}`")))
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// One ladder-operator factor of a monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Leg {
    pub mode: String,
    /// Creation operator when true.
    pub dagger: bool,
}

impl Leg {
    pub fn ann(mode: impl Into<String>) -> Self {
        Leg {
            mode: mode.into(),
            dagger: false,
        }
    }

    pub fn cre(mode: impl Into<String>) -> Self {
        Leg {
            mode: mode.into(),
            dagger: true,
        }
    }

    pub fn flipped(&self) -> Self {
        Leg {
            mode: self.mode.clone(),
            dagger: !self.dagger,
        }
    }
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dagger {
            write!(f, "{}†", self.mode)
        } else {
            write!(f, "{}", self.mode)
        }
    }
}

/// Normal-ordered canonical form: creation legs first, each group sorted by
/// mode label.
pub fn normal_order(legs: &[Leg]) -> Vec<Leg> {
    let mut out = legs.to_vec();
    out.sort_by(|a, b| b.dagger.cmp(&a.dagger).then_with(|| a.mode.cmp(&b.mode)));
    out
}

/// Hermitian-conjugate leg list: daggers flipped, order reversed.
pub fn conjugate_legs(legs: &[Leg]) -> Vec<Leg> {
    legs.iter().rev().map(Leg::flipped).collect()
}

/// Compact monomial notation, e.g. `d†³ a c`.
pub fn format_monomial(legs: &[Leg]) -> String {
    let ordered = normal_order(legs);
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < ordered.len() {
        let mut j = i;
        while j < ordered.len() && ordered[j] == ordered[i] {
            j += 1;
        }
        let count = j - i;
        let mut s = ordered[i].to_string();
        if count > 1 {
            s.push_str(&superscript(count));
        }
        parts.push(s);
        i = j;
    }
    parts.join(" ")
}

fn superscript(n: usize) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    n.to_string()
        .chars()
        .map(|c| DIGITS[c.to_digit(10).unwrap_or(0) as usize])
        .collect()
}

fn is_self_adjoint(legs: &[Leg]) -> bool {
    normal_order(legs) == normal_order(&conjugate_legs(legs))
}

/// An intrinsic χ⁽²⁾ (order 2) or χ⁽³⁾ (order 3) interaction. The
/// Hermitian-conjugate partner is always implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionVertex {
    pub order: u32,
    pub g: C64,
    pub legs: Vec<Leg>,
}

impl InteractionVertex {
    pub fn new(order: u32, g: C64, legs: Vec<Leg>) -> Result<Self> {
        let v = InteractionVertex { order, g, legs };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.order) {
            return Err(Error::Structural(format!(
                "intrinsic vertex order must be 2 or 3, got {}",
                self.order
            )));
        }
        if self.legs.len() != self.order as usize + 1 {
            return Err(Error::Structural(format!(
                "order-{} vertex needs {} legs, got {}",
                self.order,
                self.order + 1,
                self.legs.len()
            )));
        }
        if !self.g.re.is_finite() || !self.g.im.is_finite() {
            return Err(Error::Domain("vertex coupling must be finite".into()));
        }
        Ok(())
    }

    /// The Hermitian-conjugate orientation of this vertex.
    pub fn flipped(&self) -> Self {
        InteractionVertex {
            order: self.order,
            g: self.g.conj(),
            legs: conjugate_legs(&self.legs),
        }
    }

    pub fn touches(&self, mode: &str) -> bool {
        self.legs.iter().any(|l| l.mode == mode)
    }
}

impl fmt::Display for InteractionVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {} + h.c.", fmt_complex(self.g), format_monomial(&self.legs))
    }
}

pub(crate) fn fmt_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

/// One contraction over a virtual mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub mode: String,
    pub lambda: C64,
}

/// Record of a classical (c-number) pump substitution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpReduction {
    pub mode: String,
    pub n_pump: f64,
    pub legs_removed: usize,
}

/// A synthesized (or pump-reduced) interaction term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveProcess {
    pub g_eff: C64,
    /// Remaining legs, normal ordered.
    pub legs: Vec<Leg>,
    /// One entry per contracted virtual leg pair.
    pub eliminated: Vec<Elimination>,
    pub source_vertices: Vec<InteractionVertex>,
    pub hermitian_pair: bool,
    /// Set when the product of Λ factors is not real: the physical partner
    /// term then carries the same `1/Λ` rather than its conjugate.
    pub non_hermitian: bool,
    #[serde(default)]
    pub pumped: Vec<PumpReduction>,
}

impl EffectiveProcess {
    /// Number of legs minus one.
    pub fn order(&self) -> usize {
        self.legs.len().saturating_sub(1)
    }

    pub fn lambda_product(&self) -> C64 {
        self.eliminated.iter().fold(C64::new(1.0, 0.0), |acc, e| acc * e.lambda)
    }

    /// Coupling numerator `g_eff · ∏Λ`, i.e. the product of the oriented
    /// source couplings (and any pump factors).
    pub fn numerator(&self) -> C64 {
        self.g_eff * self.lambda_product()
    }

    pub fn monomial(&self) -> String {
        format_monomial(&self.legs)
    }

    pub(crate) fn lift(vertex: &InteractionVertex) -> Self {
        EffectiveProcess {
            g_eff: vertex.g,
            legs: vertex.legs.clone(),
            eliminated: Vec::new(),
            source_vertices: vec![vertex.clone()],
            hermitian_pair: true,
            non_hermitian: false,
            pumped: Vec::new(),
        }
    }
}

impl From<&InteractionVertex> for EffectiveProcess {
    fn from(v: &InteractionVertex) -> Self {
        EffectiveProcess::lift(v)
    }
}

impl fmt::Display for EffectiveProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {}", fmt_complex(self.g_eff), self.monomial())?;
        if self.hermitian_pair {
            write!(f, " + h.c.")?;
        }
        Ok(())
    }
}

/// Common Hamiltonian-term form consumed by the simulation engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub g: C64,
    pub legs: Vec<Leg>,
    pub hermitian_pair: bool,
    pub non_hermitian: bool,
}

impl Term {
    pub fn new(g: C64, legs: Vec<Leg>, hermitian_pair: bool) -> Self {
        Term {
            g,
            legs,
            hermitian_pair,
            non_hermitian: false,
        }
    }

    /// The h.c. partner of this term (conjugate coupling, conjugate legs).
    pub fn partner(&self) -> Term {
        Term {
            g: self.g.conj(),
            legs: conjugate_legs(&self.legs),
            hermitian_pair: self.hermitian_pair,
            non_hermitian: self.non_hermitian,
        }
    }

    /// Whether the term, together with its partner if any, is Hermitian as
    /// written.
    pub fn is_hermitian(&self) -> bool {
        if self.hermitian_pair {
            return true;
        }
        is_self_adjoint(&self.legs) && self.g.im == 0.0
    }
}

impl From<&InteractionVertex> for Term {
    fn from(v: &InteractionVertex) -> Self {
        Term::new(v.g, v.legs.clone(), true)
    }
}

impl From<InteractionVertex> for Term {
    fn from(v: InteractionVertex) -> Self {
        Term::from(&v)
    }
}

impl From<&EffectiveProcess> for Term {
    fn from(p: &EffectiveProcess) -> Self {
        Term {
            g: p.g_eff,
            legs: p.legs.clone(),
            hermitian_pair: p.hermitian_pair,
            non_hermitian: p.non_hermitian,
        }
    }
}

impl From<EffectiveProcess> for Term {
    fn from(p: EffectiveProcess) -> Self {
        Term::from(&p)
    }
}
