//! Monte Carlo photon counting: timestamp streams, coincidence histograms,
//! CAR and Franson interference.

mod franson;
mod histogram;
mod timestamps;

pub use franson::{
    fit_fringe, franson_simulate, invert_background, raw_visibility, visibility, FransonPeaks, FransonRun,
    FransonSetup, FringeFit, Visibility,
};
pub use histogram::{car, car_uncertainty, histogram, CarEstimate, CoincidenceHistogram, DelayWindow};
pub use timestamps::{read_timestamps, write_timestamps, TimestampFile, TIMESTAMP_MAGIC};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Picoseconds per second; streams are integer picoseconds.
pub const PS: f64 = 1e12;
pub const DEFAULT_BIN_WIDTH_PS: i64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// [counts/s]
    pub dark_rate: f64,
    /// Gaussian timing jitter, one sigma [s].
    pub jitter_sigma: f64,
    /// [s]
    pub dead_time: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            efficiency: 0.9,
            dark_rate: 200.0,
            jitter_sigma: 20e-12,
            dead_time: 50e-9,
        }
    }
}

impl DetectorModel {
    pub fn ideal() -> Self {
        DetectorModel {
            efficiency: 1.0,
            dark_rate: 0.0,
            jitter_sigma: 0.0,
            dead_time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.efficiency) && self.efficiency <= 1.0) {
            return Err(Error::Domain(format!(
                "detector efficiency {} not in [0, 1]",
                self.efficiency
            )));
        }
        for (name, v) in [
            ("dark_rate", self.dark_rate),
            ("jitter_sigma", self.jitter_sigma),
            ("dead_time", self.dead_time),
        ] {
            if !ok(v) {
                return Err(Error::Domain(format!(
                    "detector {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A flat Poisson background on one channel, with a label for the breakdown
/// (pump leakage, SHG leakage, Raman, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub label: String,
    /// 0 or 1.
    pub channel: usize,
    /// Detected rate [counts/s].
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSource {
    /// [pairs/s]
    pub pair_rate: f64,
    /// Decay constant of the `t2 < t1` side [s].
    pub tau_left: f64,
    /// Decay constant of the `t2 > t1` side [s].
    pub tau_right: f64,
    #[serde(default)]
    pub background: Vec<Background>,
    /// Loss before each detector, in [0, 1].
    #[serde(default)]
    pub heralding_loss: [f64; 2],
}

impl PairSource {
    pub fn new(pair_rate: f64, tau_left: f64, tau_right: f64) -> Self {
        PairSource {
            pair_rate,
            tau_left,
            tau_right,
            background: Vec::new(),
            heralding_loss: [0.0; 2],
        }
    }

    pub fn with_background(mut self, label: &str, channel: usize, rate: f64) -> Self {
        self.background.push(Background {
            label: label.to_owned(),
            channel,
            rate,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate.is_finite() && self.pair_rate >= 0.0) {
            return Err(Error::Domain(format!("pair rate must be >= 0, got {}", self.pair_rate)));
        }
        if !(self.tau_left > 0.0 && self.tau_right > 0.0 && self.tau_left.is_finite() && self.tau_right.is_finite()) {
            return Err(Error::Domain(format!(
                "correlation constants must be > 0, got ({}, {})",
                self.tau_left, self.tau_right
            )));
        }
        for b in &self.background {
            if b.channel > 1 || !(b.rate.is_finite() && b.rate >= 0.0) {
                return Err(Error::Domain(format!(
                    "background `{}` needs channel 0/1 and rate >= 0",
                    b.label
                )));
            }
        }
        if self.heralding_loss.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(Error::Domain(format!(
                "heralding losses {:?} not in [0, 1]",
                self.heralding_loss
            )));
        }
        Ok(())
    }

    pub fn background_rate(&self, channel: usize) -> f64 {
        self.background
            .iter()
            .filter(|b| b.channel == channel)
            .map(|b| b.rate)
            .sum()
    }

    /// Probability that a photon of a pair reaches a click on `channel`.
    pub fn transmission(&self, channel: usize, det: &DetectorModel) -> f64 {
        det.efficiency * (1.0 - self.heralding_loss[channel])
    }

    /// Half width of the default peak window [s]: three of the larger decay
    /// constant, widened by three combined jitter sigmas.
    pub fn peak_half_width(&self, detectors: &[DetectorModel; 2]) -> f64 {
        3.0 * self.tau_left.max(self.tau_right) + 3.0 * combined_jitter(detectors)
    }

    /// Fraction of true coincidences with `|t2 - t1| <= w`, after jitter.
    pub fn window_fraction(&self, detectors: &[DetectorModel; 2], w: f64) -> f64 {
        let sigma = combined_jitter(detectors);
        // |τ| is exponential with rate 1/τ_side on each side, and the
        // Gaussian jitter is symmetric, so both sides reduce to P(|E + N| <= w)
        let side = |tau: f64| exgauss_cdf(w, tau, sigma) - exgauss_cdf(-w, tau, sigma);
        (self.tau_right * side(self.tau_right) + self.tau_left * side(self.tau_left)) / (self.tau_left + self.tau_right)
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// CDF of `E + N`, `E ~ Exp(mean tau)`, `N ~ Normal(0, sigma)`.
fn exgauss_cdf(x: f64, tau: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return if x <= 0.0 { 0.0 } else { 1.0 - (-x / tau).exp() };
    }
    let l = 1.0 / tau;
    let tail = (-l * x + 0.5 * (l * sigma).powi(2)).exp() * normal_cdf(x / sigma - l * sigma);
    normal_cdf(x / sigma) - if tail.is_finite() { tail } else { 0.0 }
}

pub(crate) fn combined_jitter(d: &[DetectorModel; 2]) -> f64 {
    d[0].jitter_sigma.hypot(d[1].jitter_sigma)
}

/// Two sorted click streams [ps] over `[0, duration)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Streams {
    pub channels: [Vec<i64>; 2],
    pub duration_ps: i64,
}

impl Streams {
    pub fn duration(&self) -> f64 {
        self.duration_ps as f64 / PS
    }

    pub fn singles_rate(&self, channel: usize) -> f64 {
        self.channels[channel].len() as f64 / self.duration()
    }
}

/// What happens to one emitted pair before detection: an extra delay per
/// photon [ps], or `None` when that photon is lost.
pub(crate) type Routing = [Option<i64>; 2];

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// Shared forward model. `route` decides per pair which photons survive the
/// optics and with what added delay.
pub(crate) fn generate(
    source: &PairSource,
    detectors: &[DetectorModel; 2],
    duration: f64,
    seed: u64,
    mut route: impl FnMut(&mut ChaCha8Rng) -> Routing,
) -> Result<Streams> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::Domain(format!("duration must be > 0, got {duration}")));
    }
    source.validate()?;
    for d in detectors {
        d.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_ps = (duration * PS).round() as i64;
    let mut ch: [Vec<i64>; 2] = [Vec::new(), Vec::new()];

    let n_pairs = poisson(&mut rng, source.pair_rate * duration);
    let right = Exp::new(1.0 / source.tau_right).map_err(|e| Error::Domain(e.to_string()))?;
    let left = Exp::new(1.0 / source.tau_left).map_err(|e| Error::Domain(e.to_string()))?;
    let p_right = source.tau_right / (source.tau_left + source.tau_right);
    let keep = [
        source.transmission(0, &detectors[0]),
        source.transmission(1, &detectors[1]),
    ];
    let jitter = [
        Normal::new(0.0, detectors[0].jitter_sigma * PS).map_err(|e| Error::Domain(e.to_string()))?,
        Normal::new(0.0, detectors[1].jitter_sigma * PS).map_err(|e| Error::Domain(e.to_string()))?,
    ];
    for _ in 0..n_pairs {
        let t0 = rng.random_range(0..t_ps.max(1));
        let tau = if rng.random::<f64>() < p_right {
            right.sample(&mut rng)
        } else {
            -left.sample(&mut rng)
        };
        let base = [t0, t0 + (tau * PS).round() as i64];
        let routed = route(&mut rng);
        for c in 0..2 {
            // draw unconditionally so channels do not shift each other's
            // random sequence
            let survive = rng.random::<f64>() < keep[c];
            let dt = jitter[c].sample(&mut rng).round() as i64;
            if let (true, Some(extra)) = (survive, routed[c]) {
                ch[c].push(base[c] + extra + dt);
            }
        }
    }
    for c in 0..2 {
        let n = poisson(
            &mut rng,
            (source.background_rate(c) + detectors[c].dark_rate) * duration,
        );
        for _ in 0..n {
            ch[c].push(rng.random_range(0..t_ps.max(1)));
        }
    }
    for c in 0..2 {
        ch[c].retain(|t| (0..t_ps).contains(t));
        ch[c].sort_unstable();
        apply_dead_time(&mut ch[c], (detectors[c].dead_time * PS).round() as i64);
    }
    Ok(Streams {
        channels: ch,
        duration_ps: t_ps,
    })
}

/// Drops every click within `dead` of the previous kept click.
fn apply_dead_time(stream: &mut Vec<i64>, dead: i64) {
    if dead <= 0 {
        return;
    }
    let mut last: Option<i64> = None;
    stream.retain(|&t| match last {
        Some(l) if t - l < dead => false,
        _ => {
            last = Some(t);
            true
        }
    });
}

pub fn simulate_streams(
    source: &PairSource,
    detectors: &[DetectorModel; 2],
    duration: f64,
    seed: u64,
) -> Result<Streams> {
    generate(source, detectors, duration, seed, |_| [Some(0), Some(0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silent_source_gives_empty_streams() {
        let s = simulate_streams(&PairSource::new(0.0, 1e-9, 1e-9), &[DetectorModel::ideal(); 2], 1.0, 1).unwrap();
        assert!(s.channels[0].is_empty() && s.channels[1].is_empty());
    }

    #[test]
    fn dark_counts_are_poisson() {
        let mut d = DetectorModel::ideal();
        d.dark_rate = 5000.0;
        let s = simulate_streams(&PairSource::new(0.0, 1e-9, 1e-9), &[d; 2], 2.0, 7).unwrap();
        let mean = 10_000.0f64;
        for c in 0..2 {
            let n = s.channels[c].len() as f64;
            assert!((n - mean).abs() < 4.0 * mean.sqrt(), "{n}");
        }
    }

    #[test]
    fn same_seed_same_streams() {
        let src = PairSource::new(1e5, 1e-9, 2e-9).with_background("pump", 0, 1e4);
        let d = [DetectorModel::default(); 2];
        let a = simulate_streams(&src, &d, 0.05, 42).unwrap();
        let b = simulate_streams(&src, &d, 0.05, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate_streams(&src, &d, 0.05, 43).unwrap());
        assert!(a.channels.iter().all(|c| c.windows(2).all(|w| w[0] <= w[1])));
    }

    #[test]
    fn dead_time_spacing() {
        let mut d = DetectorModel::ideal();
        d.dark_rate = 1e7;
        d.dead_time = 50e-9;
        let s = simulate_streams(&PairSource::new(0.0, 1e-9, 1e-9), &[d; 2], 1e-3, 3).unwrap();
        assert!(s.channels[0].windows(2).all(|w| w[1] - w[0] >= 50_000));
        // non-paralyzable: rate r/(1 + r τ) = 1e7/1.5
        let r = s.singles_rate(0);
        assert!((r / (1e7 / 1.5) - 1.0).abs() < 0.03, "{r}");
    }

    #[test]
    fn window_fraction_limits() {
        let src = PairSource::new(1.0, 1e-9, 3e-9);
        let ideal = [DetectorModel::ideal(); 2];
        assert!((src.window_fraction(&ideal, 1e-6) - 1.0).abs() < 1e-12);
        let mut jittery = ideal;
        jittery[0].jitter_sigma = 1e-12;
        let a = src.window_fraction(&ideal, 5e-9);
        let b = src.window_fraction(&jittery, 5e-9);
        assert!((a - b).abs() < 1e-4, "{a} {b}");
        // 1 - (τl e^{-w/τl} + τr e^{-w/τr})/(τl + τr)
        let exact = 1.0 - (1e-9 * (-5.0f64).exp() + 3e-9 * (-5.0f64 / 3.0).exp()) / 4e-9;
        assert!((a - exact).abs() < 1e-12);
        // wide jitter only: the window catches erf(w/(σ√2)) of a narrow peak
        let narrow = PairSource::new(1.0, 1e-15, 1e-15);
        jittery[0].jitter_sigma = 1e-9;
        let g = narrow.window_fraction(&jittery, 1e-9);
        assert!((g - libm::erf(1.0 / std::f64::consts::SQRT_2)).abs() < 1e-5, "{g}");
    }

    #[test]
    fn rejects_bad_models() {
        let mut d = DetectorModel::ideal();
        d.efficiency = 1.5;
        assert!(d.validate().is_err());
        assert!(PairSource::new(1.0, 0.0, 1e-9).validate().is_err());
        assert!(simulate_streams(&PairSource::new(1.0, 1e-9, 1e-9), &[DetectorModel::ideal(); 2], 0.0, 1).is_err());
    }
}
