//! Command dispatch: each command turns a validated scenario into tables.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use super::report::{num, opt, text, Diagnostic, Level, RunReport, Table};
use super::scenario::{Observable, PumpLevel, Scenario};
use crate::counting::{
    car, fit_fringe, franson_simulate, histogram, invert_background, raw_visibility, simulate_streams,
    write_timestamps, Background, CarEstimate, DelayWindow, FransonSetup, PairSource, Visibility, PS,
};
use crate::error::{Error, Result};
use crate::fock::{
    converge_cutoffs, gaussian_cross_correlation, CutoffOptions, GaussianState, HermitianPolicy, QuadraticModel,
};
use crate::process_algebra::{
    check_conservation, classical_pump_reduce, enumerate_syntheses, format_monomial, EffectiveProcess, Leg, Mode, Term,
};
use crate::semiclassical::{cme_steady_state, sweep_power, Drive};

/// Expected detector events per channel above which a run is refused.
pub const MAX_EVENTS_PER_CHANNEL: f64 = 5e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Synthesize,
    Conserve,
    Simulate,
    Sweep,
    Counts,
    Franson,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synthesize => "synthesize",
            Command::Conserve => "conserve",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Counts => "counts",
            Command::Franson => "franson",
            Command::Report => "report",
        }
    }
}

/// Tables and diagnostics produced by one command.
#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<Table>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Output {
    fn note(&mut self, level: Level, source: &str, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            level,
            source: source.to_owned(),
            message: message.into(),
        });
    }
}

/// Runs `command` and wraps the result in a report. Binary side outputs
/// (timestamp streams) go to `out`.
pub fn run(command: Command, scenario: &Scenario, input_hash: &str, out: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let canonical = scenario.to_toml()?;
    let mut exit_code = 0;
    let output = match command {
        Command::Synthesize => synthesize(scenario)?,
        Command::Conserve => conserve(scenario)?,
        Command::Simulate => simulate(scenario)?,
        Command::Sweep => sweep(scenario)?,
        Command::Counts => counts(scenario, out)?,
        Command::Franson => franson(scenario)?,
        Command::Report => {
            let (o, code) = report(scenario, out);
            exit_code = code;
            o
        }
    };
    Ok(RunReport {
        command: command.name().to_owned(),
        scenario_digest: super::report::sha256_hex(canonical.as_bytes()),
        input_hash: input_hash.to_owned(),
        scenario: serde_json::to_value(scenario).map_err(|e| Error::Internal(e.to_string()))?,
        tables: output.tables,
        diagnostics: output.diagnostics,
        exit_code,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn report(scn: &Scenario, out: &Path) -> (Output, i32) {
    let mut merged = Output::default();
    let mut code = 0;
    let mut steps = vec![
        Command::Synthesize,
        Command::Conserve,
        Command::Simulate,
        Command::Counts,
    ];
    if scn.sweep.is_some() {
        steps.push(Command::Sweep);
    }
    if scn.franson.is_some() {
        steps.push(Command::Franson);
    }
    for step in steps {
        let r = match step {
            Command::Synthesize => synthesize(scn),
            Command::Conserve => conserve(scn),
            Command::Simulate => simulate(scn),
            Command::Counts => counts(scn, out),
            Command::Sweep => sweep(scn),
            Command::Franson => franson(scn),
            Command::Report => unreachable!(),
        };
        match r {
            Ok(o) => {
                for mut t in o.tables {
                    t.name = format!("{}_{}", step.name(), t.name);
                    merged.tables.push(t);
                }
                merged.diagnostics.extend(o.diagnostics);
            }
            Err(e) => {
                code = code.max(e.exit_code());
                merged.note(Level::Error, step.name(), e.to_string());
            }
        }
    }
    (merged, code)
}

fn c64_text(z: C64) -> String {
    format!("{:e}{:+e}i", z.re, z.im)
}

fn pair_label(x: &str, y: &str) -> String {
    format!("{x}_{y}")
}

/// Processes the engines may use: intrinsic vertices clear of virtual
/// modes, plus syntheses whose eliminated modes are all declared virtual.
fn admitted_processes(scn: &Scenario) -> Result<Vec<(String, EffectiveProcess)>> {
    let graph = scn.graph()?;
    let vertices = scn.vertices()?;
    let mut out = Vec::new();
    for (i, v) in vertices.iter().enumerate() {
        if !v.legs.iter().any(|l| scn.is_virtual(&l.mode)) {
            out.push((format!("vertex {i}"), EffectiveProcess::from(v)));
        }
    }
    for (i, p) in enumerate_syntheses(&graph, &vertices, scn.synthesis.max_order)?
        .into_iter()
        .enumerate()
    {
        let clean =
            p.eliminated.iter().all(|e| scn.is_virtual(&e.mode)) && !p.legs.iter().any(|l| scn.is_virtual(&l.mode));
        if clean {
            out.push((format!("synthesis {i}"), p));
        }
    }
    Ok(out)
}

/// Bilinear terms after substituting the classical pump at one level.
struct PairModel {
    processes: Vec<(String, EffectiveProcess)>,
    terms: Vec<Term>,
    modes: Vec<Mode>,
}

fn pair_model(scn: &Scenario, level: PumpLevel, out: &mut Output) -> Result<PairModel> {
    let pump = scn.mode(&scn.pump.mode)?.clone();
    let mut processes = Vec::new();
    for (origin, p) in admitted_processes(scn)? {
        if !p.legs.iter().any(|l| l.mode == pump.label) {
            if p.legs.len() != 2 {
                out.note(
                    Level::Info,
                    "pair_model",
                    format!("{origin} ({}) is not pumped; left out", p.monomial()),
                );
                continue;
            }
        }
        let reduced = match classical_pump_reduce(&p, &pump, level.photons) {
            Ok(r) => r,
            Err(e) => {
                out.note(Level::Warning, "pair_model", format!("{origin}: {e}"));
                continue;
            }
        };
        if reduced.legs.len() == 2 {
            processes.push((origin, reduced));
        } else {
            out.note(
                Level::Info,
                "pair_model",
                format!("{origin} reduces to {}, not a pair term; left out", reduced.monomial()),
            );
        }
    }
    if processes.iter().any(|(_, p)| p.non_hermitian) {
        out.note(
            Level::Warning,
            "pair_model",
            "complex Λ product: the conjugate-coupling partner is used to keep H Hermitian",
        );
    }
    let terms = processes.iter().map(|(_, p)| Term::from(p)).collect();
    let modes = scn.detectable().into_iter().cloned().collect();
    Ok(PairModel {
        processes,
        terms,
        modes,
    })
}

impl PairModel {
    fn gaussian(&self) -> Result<GaussianState> {
        QuadraticModel::new(&self.modes, &self.terms, HermitianPolicy::ConjugatePartner)?.steady_state()
    }

    /// Distinct-mode pairs joined by a term, in first-seen order.
    fn correlated_pairs(&self) -> Vec<[String; 2]> {
        let mut pairs: Vec<[String; 2]> = Vec::new();
        for t in &self.terms {
            let (a, b) = (&t.legs[0].mode, &t.legs[1].mode);
            if a != b
                && !pairs
                    .iter()
                    .any(|p| (&p[0] == a && &p[1] == b) || (&p[0] == b && &p[1] == a))
            {
                pairs.push([a.clone(), b.clone()]);
            }
        }
        pairs
    }

    /// Mode groups connected by terms, each with its own terms.
    fn components(&self) -> Vec<(Vec<Mode>, Vec<Term>)> {
        let n = self.modes.len();
        let idx = |l: &str| {
            self.modes
                .iter()
                .position(|m| m.label == l)
                .expect("term on a model mode")
        };
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for t in &self.terms {
            let a = root(&mut parent, idx(&t.legs[0].mode));
            let b = root(&mut parent, idx(&t.legs[1].mode));
            parent[a] = b;
        }
        let mut groups: Vec<(usize, Vec<Mode>, Vec<Term>)> = Vec::new();
        for t in &self.terms {
            let r = root(&mut parent, idx(&t.legs[0].mode));
            match groups.iter_mut().find(|g| g.0 == r) {
                Some(g) => g.2.push(t.clone()),
                None => groups.push((r, Vec::new(), vec![t.clone()])),
            }
        }
        for (j, m) in self.modes.iter().enumerate() {
            let r = root(&mut parent, j);
            if let Some(g) = groups.iter_mut().find(|g| g.0 == r) {
                g.1.push(m.clone());
            }
        }
        groups.into_iter().map(|g| (g.1, g.2)).collect()
    }
}

fn conservation_cells(scn: &Scenario, legs: &[Leg]) -> Result<Vec<Value>> {
    let r = check_conservation(&scn.graph()?, legs, scn.synthesis.energy_tolerance)?;
    Ok(vec![
        json!(r.momentum_sum),
        num(r.energy_mismatch),
        num(r.tolerance),
        json!(r.passes),
    ])
}

fn synthesize(scn: &Scenario) -> Result<Output> {
    let mut out = Output::default();
    let graph = scn.graph()?;
    let vertices = scn.vertices()?;
    let mut t = Table::new(
        "processes",
        &[
            "kind",
            "monomial",
            "order",
            "g_eff_re",
            "g_eff_im",
            "g_eff_abs",
            "eliminated",
            "lambdas",
            "admitted",
            "non_hermitian",
            "momentum_sum",
            "energy_mismatch",
            "energy_tolerance",
            "passes",
        ],
    );
    let mut row = |kind: &str, p: &EffectiveProcess, admitted: bool| -> Result<()> {
        let mut r = vec![
            text(kind),
            text(p.monomial()),
            json!(p.order()),
            num(p.g_eff.re),
            num(p.g_eff.im),
            num(p.g_eff.norm()),
            text(
                p.eliminated
                    .iter()
                    .map(|e| e.mode.as_str())
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
            text(
                p.eliminated
                    .iter()
                    .map(|e| c64_text(e.lambda))
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
            json!(admitted),
            json!(p.non_hermitian),
        ];
        r.extend(conservation_cells(scn, &p.legs)?);
        t.push(r);
        Ok(())
    };
    for v in &vertices {
        row(
            "intrinsic",
            &EffectiveProcess::from(v),
            !v.legs.iter().any(|l| scn.is_virtual(&l.mode)),
        )?;
    }
    let found = enumerate_syntheses(&graph, &vertices, scn.synthesis.max_order)?;
    for p in &found {
        let admitted = p.eliminated.iter().all(|e| scn.is_virtual(&e.mode));
        row("synthesized", p, admitted)?;
    }
    out.note(
        Level::Info,
        "synthesize",
        format!(
            "{} synthesized process(es) up to order {}",
            found.len(),
            scn.synthesis.max_order
        ),
    );
    out.tables.push(t.or_empty("no vertices"));

    let level = scn.pump_level(0, "pump")?;
    let pm = pair_model(scn, level, &mut out)?;
    let mut pumped = Table::new("pumped", &["origin", "monomial", "g_re", "g_im", "pump_photons"]);
    for (origin, p) in &pm.processes {
        pumped.push(vec![
            text(origin),
            text(p.monomial()),
            num(p.g_eff.re),
            num(p.g_eff.im),
            num(level.photons),
        ]);
    }
    out.tables
        .push(pumped.or_empty("no admitted process reduces to a pair term"));
    Ok(out)
}

fn conserve(scn: &Scenario) -> Result<Output> {
    let mut out = Output::default();
    let pump = scn.mode(&scn.pump.mode)?;
    let pairs: Vec<[String; 2]> = if scn.conserve.pairs.is_empty() {
        let det = scn.detectable();
        let mut v = Vec::new();
        for (i, a) in det.iter().enumerate() {
            for b in &det[i + 1..] {
                v.push([a.label.clone(), b.label.clone()]);
            }
        }
        v
    } else {
        scn.conserve.pairs.clone()
    };
    let mut t = Table::new(
        "pairs",
        &[
            "x",
            "y",
            "pump_photons_k",
            "monomial",
            "momentum_sum",
            "energy_mismatch",
            "energy_tolerance",
            "verdict",
        ],
    );
    for [x, y] in &pairs {
        let (mx, my) = (scn.mode(x)?, scn.mode(y)?);
        // number of pump photons whose energy best matches the pair
        let k = ((mx.omega + my.omega) / pump.omega).round().max(1.0) as usize;
        let mut legs = vec![Leg::ann(&pump.label); k];
        legs.push(Leg::cre(x));
        legs.push(Leg::cre(y));
        let r = check_conservation(&scn.graph()?, &legs, scn.synthesis.energy_tolerance)?;
        t.push(vec![
            text(x),
            text(y),
            json!(k),
            text(format_monomial(&legs)),
            json!(r.momentum_sum),
            num(r.energy_mismatch),
            num(r.tolerance),
            text(if r.passes { "pass" } else { "excluded" }),
        ]);
    }
    out.tables.push(t.or_empty("fewer than two detectable modes"));
    Ok(out)
}

fn tau_grid(span: f64, points: usize) -> Vec<f64> {
    let half = (points - 1) as f64 / 2.0;
    (0..points).map(|i| span * (i as f64 - half) / half).collect()
}

fn simulate(scn: &Scenario) -> Result<Output> {
    let mut out = Output::default();
    let sim = &scn.simulate;
    let level = scn.pump_level(sim.power_index, "simulate.power_index")?;
    let pm = pair_model(scn, level, &mut out)?;
    let state = pm.gaussian()?;

    let mut fock: Vec<Option<(f64, usize)>> = vec![None; pm.modes.len()];
    let mut g2_fock: Vec<([String; 2], f64)> = Vec::new();
    if sim.fock {
        let opts = CutoffOptions {
            initial: sim.initial_cutoff,
            tolerance: sim.cutoff_tolerance,
            max_dim: sim.effective_max_dim(),
        };
        for (modes, terms) in pm.components() {
            let labels: Vec<&str> = modes.iter().map(|m| m.label.as_str()).collect();
            let pair = terms
                .iter()
                .find(|t| t.legs[0].mode != t.legs[1].mode)
                .map(|t| (t.legs[0].mode.as_str(), t.legs[1].mode.as_str()));
            match converge_cutoffs(&modes, &terms, HermitianPolicy::ConjugatePartner, pair, opts) {
                Ok(run) => {
                    let last = run.checks.last().expect("at least one solve");
                    for (j, m) in modes.iter().enumerate() {
                        let k = pm
                            .modes
                            .iter()
                            .position(|n| n.label == m.label)
                            .expect("component mode");
                        fock[k] = Some((last.numbers[j], last.cutoffs[j]));
                    }
                    if let (Some((x, y)), Some(g)) = (pair, last.g2_zero) {
                        g2_fock.push(([x.to_owned(), y.to_owned()], g));
                    }
                    let level = if run.converged { Level::Info } else { Level::Warning };
                    out.note(
                        level,
                        "fock",
                        format!(
                            "modes [{}]: cutoffs {:?}, dimension {}, {} solve(s), converged = {}, last change {:.3e}",
                            labels.join(", "),
                            last.cutoffs,
                            run.space.dim(),
                            run.checks.len(),
                            run.converged,
                            last.max_change
                        ),
                    );
                }
                Err(e @ Error::DimensionLimit { .. }) => {
                    out.note(
                        Level::Warning,
                        "fock",
                        format!("modes [{}] skipped: {e}", labels.join(", ")),
                    );
                }
                Err(e) => return Err(e),
            }
        }
    }

    let mut t = Table::new(
        "numbers",
        &[
            "mode",
            "kappa_ext",
            "n_gaussian",
            "flux_gaussian",
            "n_fock",
            "flux_fock",
            "fock_cutoff",
        ],
    );
    for (j, m) in pm.modes.iter().enumerate() {
        let (nf, cut) = match fock[j] {
            Some((n, c)) => (num(n), json!(c)),
            None => (Value::Null, Value::Null),
        };
        let ff = fock[j].map(|(n, _)| n * m.kappa_ext);
        t.push(vec![
            text(&m.label),
            num(m.kappa_ext),
            num(state.number(j)),
            num(state.flux(j)),
            nf,
            opt(ff),
            cut,
        ]);
    }
    out.tables.push(t.or_empty("no detectable modes"));

    let mut pairs = Table::new(
        "pairs",
        &[
            "x",
            "y",
            "flux_x",
            "flux_y",
            "coincidence_rate",
            "tau_left_s",
            "tau_right_s",
            "g2_zero_fock",
        ],
    );
    for [x, y] in pm.correlated_pairs() {
        let (xi, yi) = (state.model.index_of(&x)?, state.model.index_of(&y)?);
        let wings = state.wing_widths(xi, yi).ok();
        let g0 = g2_fock.iter().find(|(p, _)| p[0] == x && p[1] == y).map(|(_, g)| *g);
        pairs.push(vec![
            text(&x),
            text(&y),
            num(state.flux(xi)),
            num(state.flux(yi)),
            num(state.coincidence_rate(xi, yi)?),
            opt(wings.map(|w| w.0)),
            opt(wings.map(|w| w.1)),
            opt(g0),
        ]);
        let (mx, my) = (scn.mode(&x)?, scn.mode(&y)?);
        let span = sim.tau_span / mx.kappa.min(my.kappa);
        match gaussian_cross_correlation(&state, &x, &y, &tau_grid(span, sim.tau_points)) {
            Ok(grid) => {
                let mut g = Table::new(format!("g2_{}", pair_label(&x, &y)), &["tau_s", "g2"]);
                for (tau, v) in grid.tau.iter().zip(&grid.g2) {
                    g.push(vec![num(*tau), num(*v)]);
                }
                out.tables.push(g);
            }
            Err(e) => out.note(Level::Warning, "g2", format!("{x}/{y}: {e}")),
        }
    }
    out.tables.push(pairs.or_empty("no pair term at this pump level"));
    Ok(out)
}

fn sweep(scn: &Scenario) -> Result<Output> {
    let mut out = Output::default();
    let spec = scn.sweep.as_ref().ok_or_else(|| Error::Semantic {
        key: "sweep".into(),
        message: "section required by `sweep`".into(),
    })?;
    let by_power = !scn.pump.powers.is_empty();
    if spec.observable == Observable::OutputFlux && !by_power {
        return Err(Error::Semantic {
            key: "pump.powers".into(),
            message: "an output_flux sweep drives the pump by power".into(),
        });
    }
    let axis: Vec<f64> = if by_power {
        scn.pump.powers.clone()
    } else {
        scn.pump.photons.clone()
    };
    let pump = scn.mode(&scn.pump.mode)?.clone();
    let mut scratch = Output::default();
    let result = sweep_power(&axis, |x| {
        let level = PumpLevel {
            power: by_power.then_some(x),
            photons: if by_power { pump.photon_number(x) } else { x },
        };
        match spec.observable {
            Observable::PairFlux => {
                let pm = pair_model(scn, level, &mut scratch)?;
                let st = pm.gaussian()?;
                Ok(st.flux(st.model.index_of(&spec.mode)?))
            }
            Observable::OutputFlux => {
                let mut drives = vec![Drive::from_power(&pump, x, 0.0)?];
                for p in &spec.probes {
                    drives.push(Drive::from_power(scn.mode(&p.mode)?, p.power, p.phase)?);
                }
                let st = cme_steady_state(&scn.modes, &scn.vertices()?, &drives)?;
                if st.multistable {
                    return Err(Error::Convergence {
                        iterations: st.iterations,
                        residual: st.residual,
                    });
                }
                st.output_flux(&spec.mode)
            }
        }
    })?;
    // per-point notes repeat for every level; keep one copy of each
    scratch.diagnostics.dedup();
    out.diagnostics.extend(scratch.diagnostics);

    let axis_name = if by_power { "pump_power_w" } else { "pump_photons" };
    let mut t = Table::new("points", &[axis_name, "value", "error"]);
    for p in &result.points {
        t.push(vec![
            num(p.power),
            opt(p.value),
            p.error.clone().map_or(Value::Null, text),
        ]);
    }
    out.tables.push(t);

    let mut f = Table::new(
        "fit",
        &[
            "observable",
            "mode",
            "exponent",
            "sigma_exponent",
            "prefactor",
            "points",
            "failed_points",
        ],
    );
    let obs = match spec.observable {
        Observable::PairFlux => "pair_flux",
        Observable::OutputFlux => "output_flux",
    };
    match result.fit() {
        Ok(fit) => f.push(vec![
            text(obs),
            text(&spec.mode),
            num(fit.exponent),
            num(fit.sigma_exponent),
            num(fit.prefactor),
            json!(fit.points),
            json!(result.failures()),
        ]),
        Err(e) => out.note(Level::Warning, "fit", e.to_string()),
    }
    if result.failures() > 0 {
        out.note(
            Level::Warning,
            "sweep",
            format!("{} of {} points failed", result.failures(), axis.len()),
        );
    }
    out.tables
        .push(f.or_empty("power-law fit not possible; see diagnostics"));
    Ok(out)
}

/// Maps the Gaussian pair model onto the stochastic counting source:
/// pair rate from the integrated excess coincidence, wing widths from its
/// shape, and the unpaired remainder of each flux as flat background.
fn pair_source(scn: &Scenario, state: &GaussianState, x: &str, y: &str, out: &mut Output) -> Result<PairSource> {
    let (xi, yi) = (state.model.index_of(x)?, state.model.index_of(y)?);
    let (fx, fy) = (state.flux(xi), state.flux(yi));
    let rate = state.coincidence_rate(xi, yi)?.max(0.0).min(fx).min(fy);
    let (tl, tr) = match state.wing_widths(xi, yi) {
        Ok((l, r)) if l > 0.0 && r > 0.0 => (l, r),
        _ => {
            let (mx, my) = (scn.mode(x)?, scn.mode(y)?);
            out.note(
                Level::Info,
                "counts",
                format!("{x}/{y}: no correlated emission, wing widths fall back to 1/κ"),
            );
            (1.0 / mx.kappa, 1.0 / my.kappa)
        }
    };
    let mut src = PairSource::new(rate, tl, tr);
    for (c, f) in [fx, fy].into_iter().enumerate() {
        let unpaired = (f - rate).max(0.0) * src.transmission(c, &scn.detectors[c]);
        if unpaired > 0.0 {
            src.background.push(Background {
                label: "unpaired".into(),
                channel: c,
                rate: unpaired,
            });
        }
    }
    src.background.extend(scn.counts.background.iter().cloned());
    Ok(src)
}

fn check_event_budget(src: &PairSource, scn: &Scenario, duration: f64, key: &str) -> Result<()> {
    for c in 0..2 {
        let d = &scn.detectors[c];
        let events = (src.pair_rate * src.transmission(c, d) + src.background_rate(c) + d.dark_rate) * duration;
        if events > MAX_EVENTS_PER_CHANNEL {
            return Err(Error::Semantic {
                key: key.into(),
                message: format!(
                    "channel {c} would record ~{events:.2e} events (limit {MAX_EVENTS_PER_CHANNEL:.0e}); shorten the run"
                ),
            });
        }
    }
    Ok(())
}

fn car_row(e: &CarEstimate) -> Vec<Value> {
    vec![
        json!(e.peak_counts),
        num(e.accidentals),
        json!(e.peak_bins),
        num(e.car),
        opt(e.sigma),
    ]
}

fn counts(scn: &Scenario, out_dir: &Path) -> Result<Output> {
    let mut out = Output::default();
    let spec = &scn.counts;
    let level = scn.pump_level(spec.power_index, "counts.power_index")?;
    let pm = pair_model(scn, level, &mut out)?;
    let state = pm.gaussian()?;
    let pairs = if spec.pairs.is_empty() {
        pm.correlated_pairs()
    } else {
        spec.pairs.clone()
    };

    let mut t = Table::new(
        "car",
        &[
            "x",
            "y",
            "pair_rate",
            "tau_left_s",
            "tau_right_s",
            "singles_0",
            "singles_1",
            "peak_half_width_ps",
            "peak_counts",
            "accidentals",
            "peak_bins",
            "car",
            "car_sigma",
        ],
    );
    for (i, [x, y]) in pairs.iter().enumerate() {
        let src = pair_source(scn, &state, x, y, &mut out)?;
        check_event_budget(&src, scn, spec.duration, "counts.duration")?;
        let streams = simulate_streams(&src, &scn.detectors, spec.duration, scn.seed.wrapping_add(i as u64))?;
        let w = (src.peak_half_width(&scn.detectors) * PS).ceil() as i64;
        let range = if spec.max_delay_ps > 0 {
            spec.max_delay_ps
        } else {
            20 * w
        };
        if range < 4 * w {
            return Err(Error::Semantic {
                key: "counts.max_delay_ps".into(),
                message: format!("{range} ps leaves no accidental reference beyond ±3 peak half widths ({w} ps)"),
            });
        }
        let h = histogram(
            &streams.channels[0],
            &streams.channels[1],
            spec.bin_width_ps,
            range,
            streams.duration_ps,
        )?;
        let mut ht = Table::new(format!("histogram_{}", pair_label(x, y)), &["delay_ps", "counts"]);
        for (b, c) in h.counts.iter().enumerate() {
            ht.push(vec![json!(h.delay_ps(b)), json!(c)]);
        }
        out.tables.push(ht);

        let mut row = vec![
            text(x),
            text(y),
            num(src.pair_rate),
            num(src.tau_left),
            num(src.tau_right),
            num(streams.singles_rate(0)),
            num(streams.singles_rate(1)),
            json!(w),
        ];
        match car(
            &h,
            DelayWindow::centered(0, w),
            &[DelayWindow::new(-range, -3 * w), DelayWindow::new(3 * w, range)],
        ) {
            Ok(e) => row.extend(car_row(&e)),
            Err(e @ Error::UndefinedCar { .. }) => {
                out.note(Level::Warning, "car", format!("{x}/{y}: {e}"));
                row.extend([
                    json!(h.window_counts(DelayWindow::centered(0, w))),
                    num(0.0),
                    Value::Null,
                    Value::Null,
                    Value::Null,
                ]);
            }
            Err(e) => return Err(e),
        }
        t.push(row);

        if spec.write_timestamps {
            for c in 0..2 {
                let p = out_dir.join(format!("counts_{}_ch{c}.ts", pair_label(x, y)));
                write_timestamps(&p, &streams.channels[c], 1)?;
                out.note(Level::Info, "timestamps", format!("wrote {}", p.display()));
            }
        }
    }
    out.tables.push(t.or_empty("no pair to count"));
    Ok(out)
}

fn franson(scn: &Scenario) -> Result<Output> {
    let mut out = Output::default();
    let spec = scn.franson.as_ref().ok_or_else(|| Error::Semantic {
        key: "franson".into(),
        message: "section required by `franson`".into(),
    })?;
    let level = scn.pump_level(scn.counts.power_index, "counts.power_index")?;
    let pm = pair_model(scn, level, &mut out)?;
    let state = pm.gaussian()?;
    let [x, y] = &spec.pair;
    let mut src = pair_source(scn, &state, x, y, &mut out)?;
    let base = FransonSetup {
        phi1: 0.0,
        phi2: spec.phi2,
        delta_t: spec.delta_t,
        v0: spec.v0,
    };
    let mut added = 0.0;
    if let Some(target) = spec.target_visibility {
        added = invert_background(target, &base, &src, &scn.detectors, spec.bin_width_ps)?;
        for c in 0..2 {
            src.background.push(Background {
                label: "visibility target".into(),
                channel: c,
                rate: added,
            });
        }
        out.note(
            Level::Info,
            "franson",
            format!("added {added:.4e} counts/s per channel for a raw visibility of {target}"),
        );
    }
    check_event_budget(&src, scn, spec.duration, "franson.duration")?;

    let mut t = Table::new(
        "phase_sweep",
        &[
            "phi1",
            "phase_sum",
            "center_counts",
            "center_accidentals",
            "center_car",
            "center_car_sigma",
            "left_car",
            "right_car",
        ],
    );
    let mut centers = Vec::new();
    let mut phases = Vec::new();
    for k in 0..spec.steps {
        let setup = FransonSetup {
            phi1: 2.0 * PI * k as f64 / spec.steps as f64,
            ..base
        };
        let run = franson_simulate(
            &setup,
            &src,
            &scn.detectors,
            spec.duration,
            spec.bin_width_ps,
            scn.seed.wrapping_add(k as u64),
        )?;
        let p = run.peaks()?;
        t.push(vec![
            num(setup.phi1),
            num(setup.phase_sum()),
            json!(p.center.peak_counts),
            num(p.center.accidentals),
            num(p.center.car),
            opt(p.center.sigma),
            num(p.left.car),
            num(p.right.car),
        ]);
        phases.push(setup.phase_sum());
        centers.push(p.center);
    }
    out.tables.push(t);

    let by = |key: fn(&CarEstimate) -> f64| {
        let hi = (0..centers.len())
            .max_by(|&a, &b| key(&centers[a]).total_cmp(&key(&centers[b])))
            .expect("steps >= 3");
        let lo = (0..centers.len())
            .min_by(|&a, &b| key(&centers[a]).total_cmp(&key(&centers[b])))
            .expect("steps >= 3");
        (hi, lo)
    };
    let (hi, lo) = by(|e| e.car);
    let vc = Visibility::from_estimates(&centers[hi], &centers[lo])?;
    let (rhi, rlo) = by(|e| e.peak_counts as f64);
    let vr = raw_visibility(centers[rhi].peak_counts, centers[rlo].peak_counts)?;
    let cars: Vec<f64> = centers.iter().map(|e| e.car).collect();
    let fit = fit_fringe(&phases, &cars)?;

    let mut v = Table::new("visibility", &["method", "visibility", "sigma", "bell_violation"]);
    let mut push = |name: &str, vis: &Visibility| {
        v.push(vec![
            text(name),
            num(vis.visibility),
            opt(vis.sigma),
            json!(vis.bell_violation),
        ]);
    };
    push("car", &vc);
    push("raw_counts", &vr);
    out.tables.push(v);

    let mut f = Table::new(
        "fringe_fit",
        &[
            "offset",
            "amplitude_over_offset",
            "relative_residual",
            "background_added_per_channel",
        ],
    );
    f.push(vec![
        num(fit.offset),
        num(fit.visibility),
        num(fit.relative_residual),
        num(added),
    ]);
    out.tables.push(f);
    Ok(out)
}
