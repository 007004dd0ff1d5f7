//! Acceptance criteria 1-8, one PASS/FAIL line each. Exits 0 unless
//! ACCEPTANCE_STRICT=1 is set, so the rest of `cargo test` still runs.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use synthwave::cli::{bundled_dir, parse_scenario, run, Command, ParseOptions, RunReport};
use synthwave::counting::{
    car, fit_fringe, franson_simulate, histogram, invert_background, raw_visibility, simulate_streams, CarEstimate,
    DelayWindow, DetectorModel, FransonSetup, PairSource, Visibility,
};
use synthwave::fock::{
    build_hamiltonian, converge_cutoffs, cross_correlation, gaussian_oracle, steady_state, virtual_mode_convergence,
    CutoffOptions, HermitianPolicy, HilbertSpace, QuadraticModel, SolverChoice, VirtualModeSetup,
};
use synthwave::process_algebra::{
    enumerate_syntheses, format_monomial, synthesize_effective, InteractionVertex, Leg, Mode, Term,
};
use synthwave::semiclassical::{cme_steady_state, sweep_power, Drive};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn cli(command: Command, file: &str) -> Result<RunReport, String> {
    let parsed = parse_scenario(&bundled_dir().join(file), ParseOptions::default()).map_err(fail)?;
    let dir = tempfile::tempdir().map_err(fail)?;
    run(command, &parsed.scenario, "", dir.path()).map_err(fail)
}

fn cell(r: &RunReport, table: &str, row: usize, col: &str) -> Option<serde_json::Value> {
    let t = r.table(table)?;
    t.rows.get(row)?.get(t.column(col)?).cloned()
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

// 1 ---------------------------------------------------------------------

fn synthesis() -> Outcome {
    let unit = |label: &str| Mode::new(label, 0, 1.0, 1.0, 0.5).unwrap();
    let chi3 =
        |g| InteractionVertex::new(3, g, vec![Leg::ann("a"), Leg::ann("b"), Leg::cre("d"), Leg::cre("d")]).unwrap();
    let chi2 = |g| InteractionVertex::new(2, g, vec![Leg::cre("b"), Leg::cre("d"), Leg::ann("c")]).unwrap();

    let (g2, g3, lb) = (c(1.0, 0.0), c(1.0, 0.0), c(50.0, -0.5));
    let five = synthesize_effective(&[chi3(g3), chi2(g2)], &[unit("b")], &[lb]).map_err(fail)?;
    let five_ok = format_monomial(&five.legs) == "d†³ a c" && five.g_eff == g2 * g3 / lb && five.eliminated.len() == 1;

    let (g2, g3, ld) = (c(0.3, 0.1), c(0.7, -0.2), c(5.0, -0.5));
    let six = synthesize_effective(&[chi3(g3), chi2(g2), chi2(g2)], &[unit("d")], &[ld]).map_err(fail)?;
    let expect = g3 * g2.conj() * g2.conj() / (ld * ld);
    let six_ok = format_monomial(&six.legs) == "c†² a b³"
        && six.eliminated.len() == 2
        && (six.g_eff - expect).norm() <= 1e-15 * expect.norm();

    // the bundled scenario must enumerate to the one five-wave process
    let scn = parse_scenario(&bundled_dir().join("five_wave_map.scn"), ParseOptions::default())
        .map_err(fail)?
        .scenario;
    let found = enumerate_syntheses(&scn.graph().map_err(fail)?, &scn.vertices().map_err(fail)?, 4).map_err(fail)?;
    let names: Vec<String> = found.iter().map(|p| p.monomial()).collect();
    let enum_ok = names == ["d†³ a c"];
    check(
        five_ok && six_ok && enum_ok,
        format!(
            "5WM {} g_eff={:.6e}{:+.6e}i; 6WM {} with {} Λ; map enumeration {:?}",
            five.monomial(),
            five.g_eff.re,
            five.g_eff.im,
            six.monomial(),
            six.eliminated.len(),
            names
        ),
    )
}

// 2 ---------------------------------------------------------------------

fn elimination() -> Outcome {
    let unit = |label: &str| Mode::new(label, 0, 1.0, 1.0, 1.0).unwrap();
    let one = c(1.0, 0.0);
    let setup = VirtualModeSetup {
        modes: vec![unit("s"), unit("v"), unit("m"), unit("p")],
        vertices: vec![
            InteractionVertex::new(3, one, vec![Leg::ann("s"), Leg::ann("m"), Leg::cre("p"), Leg::cre("p")]).unwrap(),
            InteractionVertex::new(2, one, vec![Leg::cre("m"), Leg::cre("p"), Leg::ann("v")]).unwrap(),
        ],
        pump: "p".into(),
        n_pump: 4.0,
        virtual_mode: "m".into(),
        pair: ("v".into(), "s".into()),
        g_eff: 0.05,
    };
    let multiples = [100.0, 200.0, 400.0, 700.0, 1000.0];
    let rows =
        virtual_mode_convergence(&setup, &multiples, &SolverChoice::Fock { cutoffs: vec![4, 4, 4] }).map_err(fail)?;
    let in_band = rows.iter().all(|r| (0.95..=1.05).contains(&r.ratio));
    let monotone = rows.windows(2).all(|w| w[1].deviation() < w[0].deviation());
    let ratios: Vec<String> = rows.iter().map(|r| format!("{}x:{:.5}", r.multiple, r.ratio)).collect();
    check(
        in_band && monotone,
        format!("Fock cutoffs 4, flux ratios {}", ratios.join(" ")),
    )
}

// 3 ---------------------------------------------------------------------

fn exponents() -> Outcome {
    let decade: Vec<f64> = (0..6).map(|i| 1e-4 * 10f64.powf(i as f64 / 5.0)).collect();
    let mode = |l: &str, w: f64| Mode::new(l, 0, w, 1e9, 0.5e9).unwrap();
    let fit_cme = |modes: Vec<Mode>, v: InteractionVertex, probe: f64| -> Result<f64, String> {
        let (a, c) = (modes[0].clone(), modes[1].clone());
        let s = sweep_power(&decade, |p| {
            let d = [Drive::from_power(&a, p, 0.0)?, Drive::from_power(&c, probe, 0.0)?];
            cme_steady_state(&modes, &[v.clone()], &d)?.output_flux("b")
        })
        .map_err(fail)?;
        Ok(s.fit().map_err(fail)?.exponent)
    };
    let sfg = fit_cme(
        vec![mode("a", 1.2e15), mode("c", 1.3e15), mode("b", 2.5e15)],
        InteractionVertex::new(2, c(1e3, 0.0), vec![Leg::ann("a"), Leg::ann("c"), Leg::cre("b")]).unwrap(),
        1e-5,
    )?;
    let fwm = fit_cme(
        vec![mode("a", 1.2e15), mode("c", 1.1e15), mode("b", 1.3e15)],
        InteractionVertex::new(
            3,
            c(1.0, 0.0),
            vec![Leg::ann("a"), Leg::ann("a"), Leg::cre("b"), Leg::cre("c")],
        )
        .unwrap(),
        1e-6,
    )?;
    let r = cli(Command::Sweep, "fivewave_sweep.scn")?;
    let five = cell(&r, "fit", 0, "exponent")
        .and_then(|v| v.as_f64())
        .ok_or("sweep produced no fit")?;
    let sig = cell(&r, "fit", 0, "sigma_exponent")
        .and_then(|v| v.as_f64())
        .unwrap_or(f64::NAN);
    check(
        (sfg - 1.0).abs() <= 0.02 && (fwm - 2.0).abs() <= 0.02 && (five - 3.0).abs() <= 0.05,
        format!("SFG N={sfg:.4}, 4WM N={fwm:.4}, 5WM N={five:.4} ± {sig:.1e}"),
    )
}

// 4 ---------------------------------------------------------------------

fn random_quadratic(rng: &mut ChaCha8Rng) -> (Vec<Mode>, Vec<Term>) {
    let n = rng.random_range(2..=3);
    let labels = ["a", "b", "c"];
    let modes: Vec<Mode> = (0..n)
        .map(|j| {
            let k = rng.random_range(0.5..2.0);
            Mode::new(labels[j], 0, 1.0, k, k * rng.random_range(0.2..1.0))
                .unwrap()
                .with_delta(rng.random_range(-0.5..0.5))
        })
        .collect();
    let kmin = modes.iter().map(|m| m.kappa).fold(f64::INFINITY, f64::min);
    let mut terms = vec![Term::new(
        C64::from_polar(
            rng.random_range(0.05..0.3) * kmin / 2.0,
            rng.random_range(0.0..2.0 * PI),
        ),
        vec![Leg::ann("a"), Leg::ann("b")],
        true,
    )];
    if n == 3 {
        terms.push(Term::new(
            C64::from_polar(rng.random_range(0.1..0.5) * kmin, rng.random_range(0.0..2.0 * PI)),
            vec![Leg::cre("b"), Leg::ann("c")],
            true,
        ));
    }
    (modes, terms)
}

fn oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 12 {
        let (modes, terms) = random_quadratic(&mut rng);
        let model = QuadraticModel::new(&modes, &terms, HermitianPolicy::Strict).map_err(fail)?;
        if model.check_threshold().is_err() {
            continue;
        }
        let g = gaussian_oracle(&modes, &terms, HermitianPolicy::Strict).map_err(fail)?;
        let opts = CutoffOptions {
            initial: 4,
            tolerance: 1e-3,
            ..CutoffOptions::default()
        };
        let f = converge_cutoffs(&modes, &terms, HermitianPolicy::Strict, None, opts).map_err(fail)?;
        for j in 0..modes.len() {
            let (nf, ng) = (f.state.number(&f.space, j), g.number(j));
            worst = worst.max((nf - ng).abs() / ng);
        }
        done += 1;
    }
    check(
        worst < 0.01,
        format!("{done} random scenarios, worst relative ⟨n⟩ gap {worst:.2e}"),
    )
}

// 5 ---------------------------------------------------------------------

fn morphology() -> Outcome {
    let grid: Vec<f64> = (-160..=160).map(|i| i as f64 * 0.05).collect();
    let g2 = |kb: f64| {
        let modes = vec![
            Mode::new("a", 0, 1.0, 1.0, 0.5).unwrap(),
            Mode::new("b", 0, 2.0, kb, 0.5 * kb).unwrap(),
        ];
        let terms = vec![Term::new(c(0.02, 0.0), vec![Leg::ann("a"), Leg::ann("b")], true)];
        let space = HilbertSpace::new(modes.clone(), vec![3, 3])?;
        let h = build_hamiltonian(&space, &terms, HermitianPolicy::Strict)?;
        let losses: Vec<f64> = modes.iter().map(|m| m.kappa).collect();
        let st = steady_state(&space, &h, &losses)?;
        cross_correlation(&space, &h, &losses, &st, "a", "b", &grid)
    };
    let sym = g2(1.0).map_err(fail)?;
    let asym = g2(3.0).map_err(fail)?;
    let skew = sym.max_asymmetry();
    let (tl, tr) = asym.wing_time_constants(1e-2).map_err(fail)?;
    // τ > 0: b detected after a, so that wing belongs to the lossier mode b
    let ratio = tl / tr;
    check(
        skew < 0.02 && tr < tl && (ratio / 3.0 - 1.0).abs() < 0.05,
        format!("κa=κb asymmetry {skew:.2e}; κb=3κa wings τ−={tl:.4}/κa τ+={tr:.4}/κa, ratio {ratio:.4} (1/κ ratio 3)"),
    )
}

// 6 ---------------------------------------------------------------------

fn quiet(dark: f64) -> DetectorModel {
    DetectorModel {
        efficiency: 1.0,
        dark_rate: dark,
        jitter_sigma: 0.0,
        dead_time: 0.0,
    }
}

fn car_of(
    src: &PairSource,
    det: &[DetectorModel; 2],
    duration: f64,
    range_ps: i64,
    seed: u64,
) -> Result<CarEstimate, String> {
    let s = simulate_streams(src, det, duration, seed).map_err(fail)?;
    let h = histogram(&s.channels[0], &s.channels[1], 100, range_ps, s.duration_ps).map_err(fail)?;
    let w = (src.peak_half_width(det) * 1e12).ceil() as i64;
    car(
        &h,
        DelayWindow::centered(0, w),
        &[DelayWindow::new(-range_ps, -3 * w), DelayWindow::new(3 * w, range_ps)],
    )
    .map_err(fail)
}

fn counting() -> Outcome {
    // independent streams, 1 ns bins
    let det = [quiet(2e5); 2];
    let s = simulate_streams(&PairSource::new(0.0, 1e-9, 1e-9), &det, 1.0, 99).map_err(fail)?;
    let bin = 1000;
    let h = histogram(&s.channels[0], &s.channels[1], bin, 100_000, s.duration_ps).map_err(fail)?;
    let mean = s.singles_rate(0) * s.singles_rate(1) * bin as f64 * 1e-12 * s.duration();
    let worst_z = h
        .counts
        .iter()
        .map(|&c| (c as f64 - mean).abs() / mean.sqrt())
        .fold(0.0, f64::max);
    let flat = car(
        &h,
        DelayWindow::centered(0, 5000),
        &[DelayWindow::new(-100_000, -20_000), DelayWindow::new(20_000, 100_000)],
    )
    .map_err(fail)?;

    // σ_CAR against the spread over 100 seeds
    let src = PairSource::new(1e4, 0.5e-9, 0.5e-9);
    let det = [quiet(3.9e5); 2];
    let runs = (0..100)
        .map(|k| car_of(&src, &det, 0.1, 500_000, 1000 + k))
        .collect::<Result<Vec<_>, _>>()?;
    let cars: Vec<f64> = runs.iter().map(|r| r.car).collect();
    let m = cars.iter().sum::<f64>() / 100.0;
    let spread = (cars.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 99.0).sqrt();
    let formula = runs.iter().filter_map(|r| r.sigma).sum::<f64>() / 100.0;
    let rel = spread / formula - 1.0;
    check(
        worst_z < 4.0 && flat.car.abs() <= 0.05 && rel.abs() < 0.3,
        format!(
            "worst accidental bin {worst_z:.2}σ from r1·r2·Δt·T; flat CAR {:.4}; seed spread/formula σ_CAR = {:.3}",
            flat.car,
            spread / formula
        ),
    )
}

// 7 ---------------------------------------------------------------------

struct FransonSweep {
    car_v: Visibility,
    raw_v: Visibility,
    residual: f64,
}

fn franson_sweep(src: &PairSource, det: &[DetectorModel; 2], seed: u64) -> Result<FransonSweep, String> {
    let mut centers = Vec::new();
    let mut phases = Vec::new();
    for k in 0..16 {
        let setup = FransonSetup {
            phi1: 2.0 * PI * k as f64 / 16.0,
            phi2: 0.0,
            delta_t: 1e-6,
            v0: 1.0,
        };
        let run = franson_simulate(&setup, src, det, 2.0, 100, seed + k).map_err(fail)?;
        centers.push(run.peaks().map_err(fail)?.center);
        phases.push(setup.phase_sum());
    }
    // constructive at phase 0, destructive at π
    let (hi, lo) = (&centers[0], &centers[8]);
    let cars: Vec<f64> = centers.iter().map(|e| e.car).collect();
    Ok(FransonSweep {
        car_v: Visibility::from_estimates(hi, lo).map_err(fail)?,
        raw_v: raw_visibility(hi.peak_counts, lo.peak_counts).map_err(fail)?,
        residual: fit_fringe(&phases, &cars).map_err(fail)?.relative_residual,
    })
}

fn franson() -> Outcome {
    let det = [DetectorModel {
        dark_rate: 0.0,
        ..DetectorModel::default()
    }; 2];
    let src = PairSource::new(1e5, 1e-9, 1e-9);
    let clean = franson_sweep(&src, &det, 10)?;

    let base = FransonSetup {
        phi1: 0.0,
        phi2: 0.0,
        delta_t: 1e-6,
        v0: 1.0,
    };
    let b = invert_background(0.727, &base, &src, &det, 100).map_err(fail)?;
    let noisy_src = src
        .clone()
        .with_background("tuned", 0, b)
        .with_background("tuned", 1, b);
    let noisy = franson_sweep(&noisy_src, &det, 100)?;
    // with no dark counts the accidental window holds a handful of events and
    // CAR near the null is shot-noise bound, so the fit uses stock detectors
    let real = franson_sweep(&src, &[DetectorModel::default(); 2], 200)?;

    let flag_ok = [
        &clean.car_v,
        &clean.raw_v,
        &noisy.car_v,
        &noisy.raw_v,
        &real.car_v,
        &real.raw_v,
    ]
    .iter()
    .all(|v| v.bell_violation == (v.visibility > FRAC_1_SQRT_2));
    let a = clean.car_v.visibility >= 0.99;
    let b_ok = (noisy.car_v.visibility - 0.727).abs() <= 0.05;
    let fit = real.residual < 0.03;
    check(
        a && b_ok && flag_ok && fit,
        format!(
            "(a) V0=1, no background: V={:.4} [{}]; (b) background {b:.3e}/s per channel: V={:.4} [{}] (raw-count V={:.4}); bell flag consistent [{}]; fringe residual {:.2}% with detector darks [{}], {:.1}% with none",
            clean.car_v.visibility,
            if a { "ok" } else { "FAIL" },
            noisy.car_v.visibility,
            if b_ok { "ok" } else { "FAIL" },
            noisy.raw_v.visibility,
            if flag_ok { "ok" } else { "FAIL" },
            100.0 * real.residual,
            if fit { "ok" } else { "FAIL" },
            100.0 * clean.residual,
        ),
    )
}

// 8 ---------------------------------------------------------------------

fn exclusion() -> Outcome {
    let cons = cli(Command::Conserve, "visible_telecom.scn")?;
    let counts = cli(Command::Counts, "visible_telecom.scn")?;
    let mut parts = Vec::new();
    let mut ok = true;
    for (row, pair, matched) in [(0, "b₋₂⊗a₊₁", false), (1, "b₋₂⊗a₊₂", true), (2, "a₋₁⊗a₊₁", true)]
    {
        let verdict = cell(&cons, "pairs", row, "verdict").and_then(|v| v.as_str().map(String::from));
        let carv = cell(&counts, "car", row, "car")
            .and_then(|v| v.as_f64())
            .ok_or("missing CAR")?;
        let n = cell(&counts, "car", row, "peak_counts")
            .and_then(|v| v.as_f64())
            .unwrap_or(0.0);
        let acc = cell(&counts, "car", row, "accidentals")
            .and_then(|v| v.as_f64())
            .unwrap_or(0.0);
        // CAR noise when no true pairs: √C / A
        let noise = n.sqrt() / acc;
        let good = if matched {
            verdict.as_deref() == Some("pass") && carv > 10.0
        } else {
            verdict.as_deref() == Some("excluded") && carv.abs() < 3.0 * noise && carv.abs() < 0.2
        };
        ok &= good;
        parts.push(format!("{pair} {} CAR {carv:.3}", verdict.unwrap_or_default()));
    }
    check(ok, parts.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("synthesis correctness", synthesis),
        ("adiabatic-elimination convergence", elimination),
        ("power-law exponents", exponents),
        ("oracle equivalence", oracle),
        ("correlation morphology", morphology),
        ("counting pipeline", counting),
        ("Franson visibility", franson),
        ("phase-matching exclusion", exclusion),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {} {name}: {detail} ({:.1} s)",
            i + 1,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{}/8 criteria pass", 8 - failed);
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        std::process::exit(1);
    }
}
