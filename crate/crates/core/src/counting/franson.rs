use rand::Rng;
use serde::{Deserialize, Serialize};

use super::histogram::{car, histogram, CarEstimate, CoincidenceHistogram, DelayWindow};
use super::{generate, DetectorModel, PairSource, Routing, PS};
use crate::error::{Error, Result};

/// Two unbalanced interferometers, one per photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FransonSetup {
    pub phi1: f64,
    pub phi2: f64,
    /// Long-short path delay [s].
    pub delta_t: f64,
    /// Intrinsic two-photon visibility.
    pub v0: f64,
}

impl FransonSetup {
    /// The gaps between peaks double as the accidental reference, so they
    /// must stay clear of the exponential wings: ΔT >= 8 peak half widths.
    pub fn validate(&self, source: &PairSource, detectors: &[DetectorModel; 2]) -> Result<()> {
        if !(0.0..=1.0).contains(&self.v0) {
            return Err(Error::Setup(format!("V0 = {} not in [0, 1]", self.v0)));
        }
        if !(self.phi1.is_finite() && self.phi2.is_finite()) {
            return Err(Error::Setup("interferometer phases must be finite".into()));
        }
        let w = source.peak_half_width(detectors);
        if !(self.delta_t >= 8.0 * w) {
            return Err(Error::Setup(format!(
                "delay imbalance {:.3e} s does not resolve peaks of half width {:.3e} s (need >= {:.3e} s)",
                self.delta_t,
                w,
                8.0 * w
            )));
        }
        Ok(())
    }

    pub fn phase_sum(&self) -> f64 {
        self.phi1 + self.phi2
    }

    /// Outcome probabilities per pair: (center, each side peak, each
    /// single-photon click). Each photon takes either arm and either output
    /// port with probability 1/2; only one port per side is monitored.
    fn probabilities(&self) -> (f64, f64, f64) {
        let vc = self.v0 * self.phase_sum().cos();
        ((1.0 + vc) / 8.0, 1.0 / 16.0, 0.25 - vc / 8.0)
    }
}

/// Simulated Franson acquisition with its analysis windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FransonRun {
    pub setup: FransonSetup,
    pub histogram: CoincidenceHistogram,
    pub peak_half_width_ps: i64,
    pub delta_t_ps: i64,
    pub singles: [u64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FransonPeaks {
    pub left: CarEstimate,
    pub center: CarEstimate,
    pub right: CarEstimate,
}

impl FransonRun {
    /// Gaps between the peaks, three half widths clear of each centre.
    pub fn background_windows(&self) -> [DelayWindow; 2] {
        let (w, d) = (self.peak_half_width_ps, self.delta_t_ps);
        [DelayWindow::new(-d + 3 * w, -3 * w), DelayWindow::new(3 * w, d - 3 * w)]
    }

    pub fn peaks(&self) -> Result<FransonPeaks> {
        let bg = self.background_windows();
        let at = |c: i64| car(&self.histogram, DelayWindow::centered(c, self.peak_half_width_ps), &bg);
        Ok(FransonPeaks {
            left: at(-self.delta_t_ps)?,
            center: at(0)?,
            right: at(self.delta_t_ps)?,
        })
    }
}

pub fn franson_simulate(
    setup: &FransonSetup,
    source: &PairSource,
    detectors: &[DetectorModel; 2],
    duration: f64,
    bin_width_ps: i64,
    seed: u64,
) -> Result<FransonRun> {
    setup.validate(source, detectors)?;
    let (p_center, p_side, p_single) = setup.probabilities();
    let d = (setup.delta_t * PS).round() as i64;
    let route = move |rng: &mut rand_chacha::ChaCha8Rng| -> Routing {
        let arm = |rng: &mut rand_chacha::ChaCha8Rng| if rng.random::<bool>() { d } else { 0 };
        let u: f64 = rng.random();
        let mut edge = p_center;
        if u < edge {
            let t = arm(rng);
            return [Some(t), Some(t)];
        }
        edge += p_side;
        if u < edge {
            return [Some(0), Some(d)];
        }
        edge += p_side;
        if u < edge {
            return [Some(d), Some(0)];
        }
        edge += p_single;
        if u < edge {
            return [Some(arm(rng)), None];
        }
        edge += p_single;
        if u < edge {
            return [None, Some(arm(rng))];
        }
        [None, None]
    };
    let streams = generate(source, detectors, duration, seed, route)?;
    let w = (source.peak_half_width(detectors) * PS).ceil() as i64;
    let hist = histogram(
        &streams.channels[0],
        &streams.channels[1],
        bin_width_ps,
        d + 2 * w,
        streams.duration_ps,
    )?;
    Ok(FransonRun {
        setup: *setup,
        histogram: hist,
        peak_half_width_ps: w,
        delta_t_ps: d,
        singles: [streams.channels[0].len() as u64, streams.channels[1].len() as u64],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    pub visibility: f64,
    pub sigma: Option<f64>,
    /// `V > 1/√2`.
    pub bell_violation: bool,
}

/// `(max − min)/(max + min)` on center-peak CAR values. A negative `min`
/// (a statistical undershoot of a dark fringe) is floored at zero.
pub fn visibility(car_max: f64, car_min: f64) -> Result<Visibility> {
    let lo = car_min.max(0.0);
    if !(car_max.is_finite() && car_min.is_finite()) || car_max < lo {
        return Err(Error::Domain(format!(
            "visibility needs car_max >= car_min, got ({car_max}, {car_min})"
        )));
    }
    if car_max + lo == 0.0 {
        return Err(Error::Domain(
            "visibility undefined when both CAR values are zero".into(),
        ));
    }
    let v = (car_max - lo) / (car_max + lo);
    Ok(Visibility {
        visibility: v,
        sigma: None,
        bell_violation: v > std::f64::consts::FRAC_1_SQRT_2,
    })
}

impl Visibility {
    /// Propagates the CAR uncertainties of both fringes into V.
    pub fn from_estimates(max: &CarEstimate, min: &CarEstimate) -> Result<Self> {
        let mut v = visibility(max.car, min.car)?;
        if let (Some(sm), Some(sn)) = (max.sigma, min.sigma) {
            let (m, n) = (max.car, min.car.max(0.0));
            let s = m + n;
            v.sigma = Some(2.0 / (s * s) * ((n * sm).powi(2) + (m * sn).powi(2)).sqrt());
        }
        Ok(v)
    }
}

/// Same formula on raw center-peak counts, accidentals included.
pub fn raw_visibility(counts_max: u64, counts_min: u64) -> Result<Visibility> {
    visibility(counts_max as f64, counts_min as f64)
}

/// `y = B (1 + V cos φ)`, fitted linearly as `B + D cos φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub offset: f64,
    pub visibility: f64,
    /// RMS residual relative to the offset.
    pub relative_residual: f64,
}

pub fn fit_fringe(phases: &[f64], values: &[f64]) -> Result<FringeFit> {
    if phases.len() != values.len() || phases.len() < 3 {
        return Err(Error::Domain(
            "fringe fit needs >= 3 matching (phase, value) points".into(),
        ));
    }
    let n = phases.len() as f64;
    let c: Vec<f64> = phases.iter().map(|p| p.cos()).collect();
    let (sc, scc) = (c.iter().sum::<f64>(), c.iter().map(|x| x * x).sum::<f64>());
    let (sy, scy) = (
        values.iter().sum::<f64>(),
        c.iter().zip(values).map(|(x, y)| x * y).sum::<f64>(),
    );
    let det = n * scc - sc * sc;
    if det.abs() < 1e-12 * n * n {
        return Err(Error::Domain("fringe phases do not span a cosine".into()));
    }
    let b = (scc * sy - sc * scy) / det;
    let d = (n * scy - sc * sy) / det;
    let rms = (c.iter().zip(values).map(|(x, y)| (y - b - d * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(FringeFit {
        offset: b,
        visibility: d / b,
        relative_residual: rms / b.abs(),
    })
}

/// Extra flat background per channel [counts/s] that brings the raw-count
/// center visibility down to `target`, from `V = V0 T/(T + A)` with T the
/// phase-averaged true center rate and A the accidental rate in the window.
pub fn invert_background(
    target: f64,
    setup: &FransonSetup,
    source: &PairSource,
    detectors: &[DetectorModel; 2],
    bin_width_ps: i64,
) -> Result<f64> {
    if !(target > 0.0 && target <= setup.v0) {
        return Err(Error::Domain(format!(
            "target visibility {target} must lie in (0, V0 = {}]",
            setup.v0
        )));
    }
    let w_ps = (source.peak_half_width(detectors) * PS).ceil() as i64;
    // window width as the histogram sees it: whole bins with centres inside
    let bins = 2 * (w_ps / bin_width_ps) + 1;
    let width = bins as f64 * bin_width_ps as f64 / PS;
    let eta = [
        source.transmission(0, &detectors[0]),
        source.transmission(1, &detectors[1]),
    ];
    let fraction = source.window_fraction(detectors, w_ps as f64 / PS);
    let true_rate = source.pair_rate * eta[0] * eta[1] / 8.0 * fraction;
    let singles: Vec<f64> = (0..2)
        .map(|c| source.pair_rate * eta[c] / 2.0 + source.background_rate(c) + detectors[c].dark_rate)
        .collect();
    let q = true_rate * (setup.v0 / target - 1.0) / width;
    let (s, p) = (singles[0] + singles[1], singles[0] * singles[1]);
    if q < p {
        return Err(Error::Setup(format!(
            "existing accidentals already push the visibility below {target}"
        )));
    }
    Ok((-s + (s * s - 4.0 * (p - q)).sqrt()) / 2.0)
}
