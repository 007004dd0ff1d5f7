//! Scenario files: TOML in, validated `Scenario` out, canonical TOML back.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::counting::{Background, DetectorModel, DEFAULT_BIN_WIDTH_PS};
use crate::error::{Error, Result};
use crate::fock::{configured_max_dim, DEFAULT_CUTOFF};
use crate::process_algebra::{InteractionVertex, Leg, Mode, ModeGraph};

/// Upper bounds that keep one invocation at desk scale.
pub const MAX_DURATION_S: f64 = 3600.0;
pub const MAX_SWEEP_POINTS: usize = 1000;
pub const MAX_FRANSON_STEPS: usize = 720;
pub const MAX_TAU_POINTS: usize = 10_001;

/// A complex coupling written either as a number or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling(pub C64);

impl Serialize for Coupling {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.im == 0.0 {
            s.serialize_f64(self.0.re)
        } else {
            [self.0.re, self.0.im].serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for Coupling {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Real(f64),
            Int(i64),
            Pair([f64; 2]),
        }
        Ok(Coupling(match Raw::deserialize(d)? {
            Raw::Real(x) => C64::new(x, 0.0),
            Raw::Int(x) => C64::new(x as f64, 0.0),
            Raw::Pair([re, im]) => C64::new(re, im),
        }))
    }
}

/// Intrinsic vertex with legs written `"a"` (annihilation) or `"a†"` /
/// `"a^"` (creation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSpec {
    pub order: u32,
    pub g: Coupling,
    pub legs: Vec<String>,
}

pub fn parse_leg(s: &str) -> Leg {
    let t = s.trim();
    match t.strip_suffix('†').or_else(|| t.strip_suffix('^')) {
        Some(m) => Leg::cre(m.trim()),
        None => Leg::ann(t),
    }
}

impl VertexSpec {
    pub fn legs(&self) -> Vec<Leg> {
        self.legs.iter().map(|l| parse_leg(l)).collect()
    }

    pub fn to_vertex(&self) -> Result<InteractionVertex> {
        InteractionVertex::new(self.order, self.g.0, self.legs())
    }
}

/// The one classically driven mode and its operating points, either input
/// powers [W] or intracavity photon numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub powers: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub photons: Vec<f64>,
}

/// One operating point of the pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpLevel {
    pub power: Option<f64>,
    pub photons: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    #[serde(default)]
    pub virtual_modes: Vec<String>,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_tolerance: Option<f64>,
}

fn default_max_order() -> usize {
    4
}

impl Default for SynthesisSpec {
    fn default() -> Self {
        SynthesisSpec {
            virtual_modes: Vec::new(),
            max_order: default_max_order(),
            energy_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConserveSpec {
    /// Photon pairs to test; empty means every pair of detectable modes.
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSpec {
    #[serde(default = "default_true")]
    pub fock: bool,
    #[serde(default = "default_cutoff")]
    pub initial_cutoff: usize,
    #[serde(default = "default_cutoff_tolerance")]
    pub cutoff_tolerance: f64,
    /// Hilbert-space cap for the Fock engine; 0 means the environment or
    /// built-in default.
    #[serde(default)]
    pub max_dim: usize,
    /// g⁽²⁾ grid half range in units of the slowest decay time 1/κ_min.
    #[serde(default = "default_tau_span")]
    pub tau_span: f64,
    #[serde(default = "default_tau_points")]
    pub tau_points: usize,
    #[serde(default)]
    pub power_index: usize,
}

fn default_true() -> bool {
    true
}
fn default_cutoff() -> usize {
    DEFAULT_CUTOFF
}
fn default_cutoff_tolerance() -> f64 {
    0.01
}
fn default_tau_span() -> f64 {
    10.0
}
fn default_tau_points() -> usize {
    201
}

impl Default for SimulateSpec {
    fn default() -> Self {
        SimulateSpec {
            fock: true,
            initial_cutoff: DEFAULT_CUTOFF,
            cutoff_tolerance: default_cutoff_tolerance(),
            max_dim: 0,
            tau_span: default_tau_span(),
            tau_points: default_tau_points(),
            power_index: 0,
        }
    }
}

impl SimulateSpec {
    pub fn effective_max_dim(&self) -> usize {
        if self.max_dim == 0 {
            configured_max_dim()
        } else {
            self.max_dim.min(configured_max_dim())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Gaussian pair flux of `mode` from the pumped pair processes.
    PairFlux,
    /// Coupled-mode output flux of `mode` with the listed probe drives.
    OutputFlux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub mode: String,
    /// [W]
    pub power: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub observable: Observable,
    pub mode: String,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsSpec {
    #[serde(default)]
    pub pairs: Vec<[String; 2]>,
    /// [s]
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_bin")]
    pub bin_width_ps: i64,
    /// Histogram half range; 0 picks 20 peak half widths.
    #[serde(default)]
    pub max_delay_ps: i64,
    #[serde(default)]
    pub power_index: usize,
    #[serde(default)]
    pub write_timestamps: bool,
    /// Extra flat backgrounds (pump leakage, SHG leakage, Raman).
    #[serde(default)]
    pub background: Vec<Background>,
}

fn default_duration() -> f64 {
    1.0
}
fn default_bin() -> i64 {
    DEFAULT_BIN_WIDTH_PS
}

impl Default for CountsSpec {
    fn default() -> Self {
        CountsSpec {
            pairs: Vec::new(),
            duration: default_duration(),
            bin_width_ps: default_bin(),
            max_delay_ps: 0,
            power_index: 0,
            write_timestamps: false,
            background: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FransonSpec {
    pub pair: [String; 2],
    /// [s]
    pub delta_t: f64,
    #[serde(default = "default_v0")]
    pub v0: f64,
    #[serde(default)]
    pub phi2: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_bin")]
    pub bin_width_ps: i64,
    /// When set, a flat per-channel background is added so that the raw
    /// center-peak visibility comes out at this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_visibility: Option<f64>,
}

fn default_v0() -> f64 {
    1.0
}
fn default_steps() -> usize {
    16
}

fn default_seed() -> u64 {
    1
}

fn default_detectors() -> [DetectorModel; 2] {
    [DetectorModel::default(); 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub pump: PumpSpec,
    #[serde(default)]
    pub synthesis: SynthesisSpec,
    #[serde(default)]
    pub conserve: ConserveSpec,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub counts: CountsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub franson: Option<FransonSpec>,
    #[serde(default = "default_detectors")]
    pub detectors: [DetectorModel; 2],
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub vertices: Vec<VertexSpec>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    pub allow_unknown: bool,
}

/// Parsed scenario plus the unknown keys that were tolerated.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub scenario: Scenario,
    pub ignored_keys: Vec<String>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn syntax(path: &Path, text: &str, e: toml::de::Error) -> Error {
    let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
    Error::Syntax {
        path: path.to_path_buf(),
        line,
        column,
        message: e.message().trim().to_owned(),
    }
}

pub fn parse_scenario_str(text: &str, path: &Path, opts: ParseOptions) -> Result<Parsed> {
    let de = toml::Deserializer::parse(text).map_err(|e| syntax(path, text, e))?;
    let mut ignored = BTreeSet::new();
    let scenario: Scenario = serde_ignored::deserialize(de, |p| {
        ignored.insert(p.to_string());
    })
    .map_err(|e| syntax(path, text, e))?;
    if let Some(k) = ignored.iter().next().filter(|_| !opts.allow_unknown) {
        return Err(Error::Semantic {
            key: k.clone(),
            message: "unknown key (pass --allow-unknown to ignore)".into(),
        });
    }
    scenario.validate()?;
    Ok(Parsed {
        scenario,
        ignored_keys: ignored.into_iter().collect(),
    })
}

pub fn parse_scenario(path: &Path, opts: ParseOptions) -> Result<Parsed> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Syntax {
        path: path.to_path_buf(),
        line: 0,
        column: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    parse_scenario_str(&text, path, opts)
}

fn semantic(key: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Semantic {
        key: key.into(),
        message: message.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(semantic(key, format!("must be a positive number, got {v}")))
    }
}

impl Scenario {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("scenario serialization: {e}")))
    }

    pub fn graph(&self) -> Result<ModeGraph> {
        ModeGraph::new(self.modes.clone())
    }

    pub fn mode(&self, label: &str) -> Result<&Mode> {
        self.modes
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| Error::Structural(format!("mode `{label}` is not declared")))
    }

    pub fn vertices(&self) -> Result<Vec<InteractionVertex>> {
        self.vertices.iter().map(VertexSpec::to_vertex).collect()
    }

    pub fn virtual_modes(&self) -> Vec<Mode> {
        self.synthesis
            .virtual_modes
            .iter()
            .filter_map(|l| self.modes.iter().find(|m| &m.label == l).cloned())
            .collect()
    }

    pub fn is_virtual(&self, label: &str) -> bool {
        self.synthesis.virtual_modes.iter().any(|v| v == label)
    }

    /// Modes a detector can see: neither the pump nor eliminated.
    pub fn detectable(&self) -> Vec<&Mode> {
        self.modes
            .iter()
            .filter(|m| m.label != self.pump.mode && !self.is_virtual(&m.label))
            .collect()
    }

    pub fn pump_levels(&self) -> Result<Vec<PumpLevel>> {
        let pump = self.mode(&self.pump.mode)?;
        if !self.pump.powers.is_empty() {
            Ok(self
                .pump
                .powers
                .iter()
                .map(|&p| PumpLevel {
                    power: Some(p),
                    photons: pump.photon_number(p),
                })
                .collect())
        } else {
            Ok(self
                .pump
                .photons
                .iter()
                .map(|&n| PumpLevel {
                    power: None,
                    photons: n,
                })
                .collect())
        }
    }

    pub fn pump_level(&self, index: usize, key: &str) -> Result<PumpLevel> {
        self.pump_levels()?
            .get(index)
            .copied()
            .ok_or_else(|| semantic(key, format!("pump has no operating point #{index}")))
    }

    fn require_mode(&self, key: &str, label: &str) -> Result<()> {
        if self.modes.iter().any(|m| m.label == label) {
            Ok(())
        } else {
            Err(semantic(key, format!("mode `{label}` is not declared")))
        }
    }

    fn require_pair(&self, key: &str, pair: &[String; 2]) -> Result<()> {
        for (i, l) in pair.iter().enumerate() {
            self.require_mode(&format!("{key}[{i}]"), l)?;
            if *l == self.pump.mode || self.is_virtual(l) {
                return Err(semantic(
                    format!("{key}[{i}]"),
                    format!("`{l}` is the pump or a virtual mode"),
                ));
            }
        }
        if pair[0] == pair[1] {
            return Err(semantic(key, "a pair needs two distinct modes"));
        }
        Ok(())
    }

    /// Checks references, ranges and hard limits; every error names the key.
    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(semantic("modes", "at least one mode is required"));
        }
        for (i, m) in self.modes.iter().enumerate() {
            if self.modes[..i].iter().any(|o| o.label == m.label) {
                return Err(semantic(
                    format!("modes[{i}].label"),
                    format!("duplicate label `{}`", m.label),
                ));
            }
            m.validate()
                .map_err(|e| semantic(format!("modes[{i}]"), e.to_string()))?;
        }
        for (i, v) in self.vertices.iter().enumerate() {
            for (j, l) in v.legs().iter().enumerate() {
                self.require_mode(&format!("vertices[{i}].legs[{j}]"), &l.mode)?;
            }
            v.to_vertex()
                .map_err(|e| semantic(format!("vertices[{i}]"), e.to_string()))?;
        }
        self.require_mode("pump.mode", &self.pump.mode)?;
        match (self.pump.powers.is_empty(), self.pump.photons.is_empty()) {
            (true, true) => return Err(semantic("pump", "give either `powers` or `photons`")),
            (false, false) => return Err(semantic("pump", "give only one of `powers` and `photons`")),
            _ => {}
        }
        let levels = if self.pump.powers.is_empty() {
            &self.pump.photons
        } else {
            &self.pump.powers
        };
        if levels.len() > MAX_SWEEP_POINTS {
            return Err(semantic("pump", format!("at most {MAX_SWEEP_POINTS} operating points")));
        }
        for (i, &p) in levels.iter().enumerate() {
            positive(&format!("pump[{i}]"), p)?;
        }
        for (i, v) in self.synthesis.virtual_modes.iter().enumerate() {
            self.require_mode(&format!("synthesis.virtual_modes[{i}]"), v)?;
            if *v == self.pump.mode {
                return Err(semantic(
                    format!("synthesis.virtual_modes[{i}]"),
                    "the pump cannot be virtual",
                ));
            }
        }
        if !(3..=8).contains(&self.synthesis.max_order) {
            return Err(semantic("synthesis.max_order", "must be between 3 and 8"));
        }
        if let Some(t) = self.synthesis.energy_tolerance {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(semantic("synthesis.energy_tolerance", "must be >= 0"));
            }
        }
        for (i, p) in self.conserve.pairs.iter().enumerate() {
            self.require_pair(&format!("conserve.pairs[{i}]"), p)?;
        }
        let sim = &self.simulate;
        if sim.initial_cutoff == 0 || sim.initial_cutoff > 64 {
            return Err(semantic("simulate.initial_cutoff", "must be in 1..=64"));
        }
        positive("simulate.cutoff_tolerance", sim.cutoff_tolerance)?;
        positive("simulate.tau_span", sim.tau_span)?;
        if !(3..=MAX_TAU_POINTS).contains(&sim.tau_points) {
            return Err(semantic(
                "simulate.tau_points",
                format!("must be in 3..={MAX_TAU_POINTS}"),
            ));
        }
        if let Some(s) = &self.sweep {
            self.require_mode("sweep.mode", &s.mode)?;
            for (i, p) in s.probes.iter().enumerate() {
                self.require_mode(&format!("sweep.probes[{i}].mode"), &p.mode)?;
                positive(&format!("sweep.probes[{i}].power"), p.power)?;
            }
            if levels.len() < 3 {
                return Err(semantic("pump", "a sweep needs at least three operating points"));
            }
        }
        for (i, d) in self.detectors.iter().enumerate() {
            d.validate()
                .map_err(|e| semantic(format!("detectors[{i}]"), e.to_string()))?;
        }
        let c = &self.counts;
        for (i, p) in c.pairs.iter().enumerate() {
            self.require_pair(&format!("counts.pairs[{i}]"), p)?;
        }
        positive("counts.duration", c.duration)?;
        if c.duration > MAX_DURATION_S {
            return Err(semantic("counts.duration", format!("at most {MAX_DURATION_S} s")));
        }
        if c.bin_width_ps <= 0 {
            return Err(semantic("counts.bin_width_ps", "must be > 0"));
        }
        if c.max_delay_ps < 0 {
            return Err(semantic("counts.max_delay_ps", "must be >= 0"));
        }
        for (i, b) in c.background.iter().enumerate() {
            if b.channel > 1 || !(b.rate >= 0.0 && b.rate.is_finite()) {
                return Err(semantic(
                    format!("counts.background[{i}]"),
                    "needs channel 0 or 1 and a rate >= 0",
                ));
            }
        }
        if let Some(f) = &self.franson {
            self.require_pair("franson.pair", &f.pair)?;
            positive("franson.delta_t", f.delta_t)?;
            if !(0.0..=1.0).contains(&f.v0) {
                return Err(semantic("franson.v0", "must be in [0, 1]"));
            }
            if !(3..=MAX_FRANSON_STEPS).contains(&f.steps) {
                return Err(semantic("franson.steps", format!("must be in 3..={MAX_FRANSON_STEPS}")));
            }
            positive("franson.duration", f.duration)?;
            if f.duration > MAX_DURATION_S {
                return Err(semantic("franson.duration", format!("at most {MAX_DURATION_S} s")));
            }
            if f.bin_width_ps <= 0 {
                return Err(semantic("franson.bin_width_ps", "must be > 0"));
            }
            if let Some(v) = f.target_visibility {
                if !(v > 0.0 && v <= f.v0) {
                    return Err(semantic("franson.target_visibility", "must be in (0, v0]"));
                }
            }
        }
        Ok(())
    }
}

/// Where bundled scenarios live in the source tree.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[pump]
mode = "p"
photons = [1.0]

[[modes]]
label = "p"
m = 0
omega = 2.0e15
kappa = 1.0e9
kappa_ext = 5.0e8

[[modes]]
label = "s"
m = 1
omega = 1.0e15
kappa = 1.0e9
kappa_ext = 5.0e8

[[modes]]
label = "i"
m = -1
omega = 1.0e15
kappa = 1.0e9
kappa_ext = 5.0e8

[[vertices]]
order = 2
g = 1.0e4
legs = ["p", "s†", "i†"]
"#;

    fn parse(text: &str) -> Result<Parsed> {
        parse_scenario_str(text, Path::new("t.scn"), ParseOptions::default())
    }

    #[test]
    fn minimal_fills_defaults() {
        let s = parse(MINIMAL).unwrap().scenario;
        assert_eq!(s.seed, 1);
        assert_eq!(s.counts.bin_width_ps, 100);
        assert_eq!(s.simulate.initial_cutoff, DEFAULT_CUTOFF);
        assert_eq!(s.detectors[0], DetectorModel::default());
        assert_eq!(s.vertices[0].legs()[1], Leg::cre("s"));
        assert_eq!(s.modes[0].delta, 0.0);
    }

    #[test]
    fn canonical_round_trip() {
        let s = parse(MINIMAL).unwrap().scenario;
        let text = s.to_toml().unwrap();
        let again = parse(&text).unwrap().scenario;
        assert_eq!(s, again);
        assert_eq!(text, again.to_toml().unwrap());
    }

    #[test]
    fn complex_coupling_round_trip() {
        let text = MINIMAL.replace("g = 1.0e4", "g = [1.0e4, -2.5]");
        let s = parse(&text).unwrap().scenario;
        assert_eq!(s.vertices[0].g.0, C64::new(1e4, -2.5));
        assert_eq!(parse(&s.to_toml().unwrap()).unwrap().scenario, s);
    }

    #[test]
    fn undeclared_leg_names_the_mode() {
        let text = MINIMAL.replace(r#"legs = ["p", "s†", "i†"]"#, r#"legs = ["p", "s†", "x†"]"#);
        match parse(&text) {
            Err(Error::Semantic { key, message }) => {
                assert_eq!(key, "vertices[0].legs[2]");
                assert!(message.contains("`x`"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected_unless_allowed() {
        let text = MINIMAL.replace("seed_typo", "").replace("[pump]", "sede = 3\n[pump]");
        match parse(&text) {
            Err(Error::Semantic { key, .. }) => assert_eq!(key, "sede"),
            other => panic!("{other:?}"),
        }
        let p = parse_scenario_str(&text, Path::new("t"), ParseOptions { allow_unknown: true }).unwrap();
        assert_eq!(p.ignored_keys, vec!["sede".to_string()]);
        let nested = MINIMAL.replace(
            "kappa_ext = 5.0e8\n\n[[vertices]]",
            "kappa_ext = 5.0e8\nkapa = 1\n\n[[vertices]]",
        );
        assert!(matches!(parse(&nested), Err(Error::Semantic { key, .. }) if key == "modes.2.kapa"));
    }

    #[test]
    fn syntax_error_has_position() {
        let text = MINIMAL.replace("m = 1\n", "m = = 1\n");
        match parse(&text) {
            Err(Error::Syntax { line, column, .. }) => {
                assert_eq!(line, 15);
                assert!(column >= 4, "{column}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pump_needs_exactly_one_axis() {
        let both = MINIMAL.replace("photons = [1.0]", "photons = [1.0]\npowers = [1e-3]");
        assert!(matches!(parse(&both), Err(Error::Semantic { key, .. }) if key == "pump"));
        let none = MINIMAL.replace("photons = [1.0]", "");
        assert!(parse(&none).is_err());
        let bad = MINIMAL.replace(r#"mode = "p""#, r#"mode = "q""#);
        assert!(matches!(parse(&bad), Err(Error::Semantic { key, .. }) if key == "pump.mode"));
    }

    #[test]
    fn leg_spellings() {
        assert_eq!(parse_leg("a†"), Leg::cre("a"));
        assert_eq!(parse_leg("a^"), Leg::cre("a"));
        assert_eq!(parse_leg(" b "), Leg::ann("b"));
    }
}
