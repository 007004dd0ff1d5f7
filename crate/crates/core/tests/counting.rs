use std::f64::consts::PI;

use synthwave::counting::{
    car, franson_simulate, histogram, raw_visibility, simulate_streams, visibility, CarEstimate, DelayWindow,
    DetectorModel, FransonSetup, PairSource, Visibility,
};

const BIN: i64 = 100;

fn quiet(dark: f64) -> DetectorModel {
    DetectorModel {
        efficiency: 1.0,
        dark_rate: dark,
        jitter_sigma: 0.0,
        dead_time: 0.0,
    }
}

/// CAR with the peak at ±3τ and the accidental reference beyond ±9τ.
fn car_of(src: &PairSource, det: &[DetectorModel; 2], duration: f64, range_ps: i64, seed: u64) -> CarEstimate {
    let s = simulate_streams(src, det, duration, seed).unwrap();
    let h = histogram(&s.channels[0], &s.channels[1], BIN, range_ps, s.duration_ps).unwrap();
    let w = (src.peak_half_width(det) * 1e12).ceil() as i64;
    car(
        &h,
        DelayWindow::centered(0, w),
        &[DelayWindow::new(-range_ps, -3 * w), DelayWindow::new(3 * w, range_ps)],
    )
    .unwrap()
}

/// Poisson accidentals: singles r_i = R η_i + dark_i, A = r1 r2 W T, and
/// true coincidences R η1 η2 f T with f the window fraction.
fn analytic_car(src: &PairSource, det: &[DetectorModel; 2]) -> f64 {
    let w = (src.peak_half_width(det) * 1e12).ceil() as i64;
    let bins = 2 * (w / BIN) + 1;
    let width = bins as f64 * BIN as f64 * 1e-12;
    let (e1, e2) = (det[0].efficiency, det[1].efficiency);
    let r1 = src.pair_rate * e1 + det[0].dark_rate;
    let r2 = src.pair_rate * e2 + det[1].dark_rate;
    // no jitter: two-sided exponential mass inside ±w
    let f = (src.tau_left * (1.0 - (-(w as f64) * 1e-12 / src.tau_left).exp())
        + src.tau_right * (1.0 - (-(w as f64) * 1e-12 / src.tau_right).exp()))
        / (src.tau_left + src.tau_right);
    src.pair_rate * e1 * e2 * f / (r1 * r2 * width)
}

#[test]
fn accidental_floor_is_flat() {
    let det = [quiet(2e5); 2];
    let s = simulate_streams(&PairSource::new(0.0, 1e-9, 1e-9), &det, 1.0, 99).unwrap();
    let bin = 1000;
    let h = histogram(&s.channels[0], &s.channels[1], bin, 100_000, s.duration_ps).unwrap();
    // expected per bin from the realized singles
    let mean = s.singles_rate(0) * s.singles_rate(1) * bin as f64 * 1e-12 * s.duration();
    for (b, &c) in h.counts.iter().enumerate() {
        assert!(
            (c as f64 - mean).abs() < 4.0 * mean.sqrt(),
            "bin {} has {c}, mean {mean}",
            h.delay_ps(b)
        );
    }
    let e = car(
        &h,
        DelayWindow::centered(0, 5000),
        &[DelayWindow::new(-100_000, -20_000), DelayWindow::new(20_000, 100_000)],
    )
    .unwrap();
    assert!(e.car.abs() < 0.05, "{e:?}");
}

#[test]
fn car_matches_poisson_accidentals() {
    let src = PairSource::new(2e4, 0.4e-9, 0.8e-9);
    let det = [quiet(1e5), quiet(2e5)];
    let e = car_of(&src, &det, 1.0, 200_000, 3);
    let expect = analytic_car(&src, &det);
    let sig = (e.car + 1.0) / (e.peak_counts as f64).sqrt();
    assert!((e.car - expect).abs() < 4.0 * sig, "{} vs {expect} ± {sig}", e.car);
}

#[test]
fn car_sigma_matches_seed_spread() {
    let src = PairSource::new(1e4, 0.5e-9, 0.5e-9);
    let det = [quiet(3.9e5); 2];
    let runs: Vec<CarEstimate> = (0..100).map(|s| car_of(&src, &det, 0.1, 500_000, 1000 + s)).collect();
    let cars: Vec<f64> = runs.iter().map(|r| r.car).collect();
    let mean = cars.iter().sum::<f64>() / cars.len() as f64;
    let spread = (cars.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (cars.len() - 1) as f64).sqrt();
    let formula = runs.iter().map(|r| r.sigma.unwrap()).sum::<f64>() / runs.len() as f64;
    let n = runs.iter().map(|r| r.peak_counts).sum::<u64>() / runs.len() as u64;
    assert!((500..2000).contains(&n), "N = {n}");
    assert!(
        (spread / formula - 1.0).abs() < 0.3,
        "spread {spread}, formula {formula}, CAR {mean}"
    );
}

#[test]
fn halving_efficiency_halves_true_coincidences() {
    let src = PairSource::new(5e4, 0.5e-9, 0.5e-9);
    let full = [quiet(1e4); 2];
    let mut half = full;
    half[0].efficiency = 0.5;
    let a = car_of(&src, &full, 1.0, 200_000, 8);
    let b = car_of(&src, &half, 1.0, 200_000, 8);
    let (ta, tb) = (
        a.peak_counts as f64 - a.accidentals,
        b.peak_counts as f64 - b.accidentals,
    );
    let sig = (a.peak_counts as f64).sqrt() * 0.5 + (b.peak_counts as f64).sqrt();
    assert!((tb - 0.5 * ta).abs() < 4.0 * sig, "{ta} {tb}");
}

#[test]
fn longer_runs_keep_car_and_shrink_sigma() {
    let src = PairSource::new(1e4, 0.5e-9, 0.5e-9);
    let det = [quiet(2e5); 2];
    let one = car_of(&src, &det, 0.5, 300_000, 21);
    let two = car_of(&src, &det, 1.0, 300_000, 22);
    let rel = |e: &CarEstimate| e.sigma.unwrap() / e.car;
    assert!((one.car - two.car).abs() < 4.0 * one.sigma.unwrap(), "{one:?} {two:?}");
    let shrink = rel(&one) / rel(&two);
    assert!((shrink - 2f64.sqrt()).abs() < 0.1, "{shrink}");
}

#[test]
fn car_rolls_over_with_pair_rate() {
    // dark-count limited at low rate, multi-pair limited at high rate
    let det = [DetectorModel {
        dark_rate: 2e3,
        ..quiet(0.0)
    }; 2];
    // durations chosen so the accidental reference holds >= ~100 counts
    let cars: Vec<f64> = [(1e2, 60.0), (3e3, 10.0), (1e6, 0.2)]
        .iter()
        .map(|&(r, t)| {
            let src = PairSource::new(r, 0.5e-9, 0.5e-9);
            let model = analytic_car(&src, &det);
            let e = car_of(&src, &det, t, 300_000, 5);
            assert!((e.car / model - 1.0).abs() < 0.25, "rate {r}: {} vs {model}", e.car);
            e.car
        })
        .collect();
    assert!(cars[1] > cars[0] && cars[1] > cars[2], "{cars:?}");
}

#[test]
fn raw_visibility_unbiased_over_seeds() {
    let det = [quiet(0.0); 2];
    let src = PairSource::new(5e4, 0.5e-9, 0.5e-9)
        .with_background("leak", 0, 2e5)
        .with_background("leak", 1, 2e5);
    let v0 = 0.9;
    let at = |phi: f64, seed: u64| {
        let s = FransonSetup {
            phi1: phi,
            phi2: 0.0,
            delta_t: 20e-9,
            v0,
        };
        franson_simulate(&s, &src, &det, 0.05, BIN, seed)
            .unwrap()
            .peaks()
            .unwrap()
            .center
    };
    let vs: Vec<f64> = (0..100)
        .map(|k| {
            raw_visibility(at(0.0, 2 * k).peak_counts, at(PI, 2 * k + 1).peak_counts)
                .unwrap()
                .visibility
        })
        .collect();
    let mean = vs.iter().sum::<f64>() / vs.len() as f64;

    // model: phase-averaged center truth T = R/8 · f, accidentals A = r1 r2 W
    let w = (src.peak_half_width(&det) * 1e12).ceil() as i64;
    let width = (2 * (w / BIN) + 1) as f64 * BIN as f64 * 1e-12;
    let f = 1.0 - (-(w as f64) * 1e-12 / 0.5e-9).exp();
    let t = src.pair_rate / 8.0 * f;
    let r = src.pair_rate / 2.0 + 2e5;
    let a = r * r * width;
    let model = v0 * t / (t + a);
    assert!((mean - model).abs() < 0.01, "mean {mean}, model {model}");

    // CAR subtracts the flat floor, so the CAR visibility returns V0
    let (hi, lo) = (at(0.0, 900), at(PI, 901));
    let vc = Visibility::from_estimates(&hi, &lo).unwrap();
    assert!((vc.visibility - v0).abs() < 3.0 * vc.sigma.unwrap().max(0.01), "{vc:?}");
    assert!(visibility(hi.car, lo.car).is_ok());
}
