use serde::{Deserialize, Serialize};

use super::PS;
use crate::error::{Error, Result};

/// All-pairs histogram of `t2 - t1`. Bin `k` is centred on
/// `(k - half_bins) * bin_width_ps` and spans half a width either side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: i64,
    pub half_bins: usize,
    pub counts: Vec<u64>,
    pub duration_ps: i64,
}

impl CoincidenceHistogram {
    pub fn empty(bin_width_ps: i64, max_delay_ps: i64, duration_ps: i64) -> Result<Self> {
        if bin_width_ps <= 0 {
            return Err(Error::Domain(format!("bin width must be > 0, got {bin_width_ps} ps")));
        }
        if max_delay_ps < 0 {
            return Err(Error::Domain(format!(
                "delay range must be >= 0, got {max_delay_ps} ps"
            )));
        }
        let half_bins = ((max_delay_ps as f64 / bin_width_ps as f64).round()) as usize;
        Ok(CoincidenceHistogram {
            bin_width_ps,
            half_bins,
            counts: vec![0; 2 * half_bins + 1],
            duration_ps,
        })
    }

    pub fn delay_ps(&self, bin: usize) -> i64 {
        (bin as i64 - self.half_bins as i64) * self.bin_width_ps
    }

    pub fn duration(&self) -> f64 {
        self.duration_ps as f64 / PS
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin holding delay `d`, if inside the range.
    pub fn bin_of(&self, d: i64) -> Option<usize> {
        let w = self.bin_width_ps;
        let k = (d + w / 2).div_euclid(w) + self.half_bins as i64;
        (0..self.counts.len() as i64).contains(&k).then_some(k as usize)
    }

    /// Bins whose centres fall in `window`.
    pub fn bins_in(&self, window: DelayWindow) -> std::ops::Range<usize> {
        let lo = (0..self.counts.len()).find(|&b| self.delay_ps(b) >= window.lo_ps);
        match lo {
            None => 0..0,
            Some(lo) => {
                let hi = (lo..self.counts.len())
                    .take_while(|&b| self.delay_ps(b) <= window.hi_ps)
                    .last();
                hi.map_or(0..0, |hi| lo..hi + 1)
            }
        }
    }

    pub fn window_counts(&self, window: DelayWindow) -> u64 {
        self.counts[self.bins_in(window)].iter().sum()
    }

    /// Bin-wise sum with a histogram of identical geometry.
    pub fn merge(&mut self, other: &CoincidenceHistogram) -> Result<()> {
        if self.bin_width_ps != other.bin_width_ps || self.half_bins != other.half_bins {
            return Err(Error::Domain("cannot merge histograms with different binning".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.duration_ps += other.duration_ps;
        Ok(())
    }

    /// `delay_ps,counts` CSV with `#` metadata lines on top.
    pub fn to_csv(&self, metadata: &[(&str, String)]) -> Result<String> {
        let mut out = String::new();
        for (k, v) in metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&format!(
            "# bin_width_ps: {}\n# duration_ps: {}\n",
            self.bin_width_ps, self.duration_ps
        ));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["delay_ps", "counts"])
            .map_err(|e| Error::Internal(e.to_string()))?;
        for (b, c) in self.counts.iter().enumerate() {
            w.write_record([self.delay_ps(b).to_string(), c.to_string()])
                .map_err(|e| Error::Internal(e.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::Internal(e.to_string()))?);
        Ok(out)
    }
}

/// Counts every pair `(t1, t2)` with `|t2 - t1|` inside the range, not just
/// the first stop after each start.
pub fn histogram(
    start: &[i64],
    stop: &[i64],
    bin_width_ps: i64,
    max_delay_ps: i64,
    duration_ps: i64,
) -> Result<CoincidenceHistogram> {
    let mut h = CoincidenceHistogram::empty(bin_width_ps, max_delay_ps, duration_ps)?;
    let k = h.half_bins as i64 * bin_width_ps;
    let (lo_edge, hi_edge) = (-k - bin_width_ps / 2, k + bin_width_ps - bin_width_ps / 2);
    let mut first = 0usize;
    for &t1 in start {
        while first < stop.len() && stop[first] - t1 < lo_edge {
            first += 1;
        }
        for &t2 in &stop[first..] {
            let d = t2 - t1;
            if d >= hi_edge {
                break;
            }
            if let Some(b) = h.bin_of(d) {
                h.counts[b] += 1;
            }
        }
    }
    Ok(h)
}

/// Inclusive delay interval [ps], selecting bins by their centres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayWindow {
    pub lo_ps: i64,
    pub hi_ps: i64,
}

impl DelayWindow {
    pub fn new(lo_ps: i64, hi_ps: i64) -> Self {
        DelayWindow { lo_ps, hi_ps }
    }

    pub fn centered(center_ps: i64, half_width_ps: i64) -> Self {
        DelayWindow::new(center_ps - half_width_ps, center_ps + half_width_ps)
    }

    fn overlaps(&self, o: &DelayWindow) -> bool {
        self.lo_ps <= o.hi_ps && o.lo_ps <= self.hi_ps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarEstimate {
    pub car: f64,
    /// `CAR/√C`; absent when the peak is empty.
    pub sigma: Option<f64>,
    /// C: counts in the peak window.
    pub peak_counts: u64,
    /// A: background mean per bin scaled to the peak width.
    pub accidentals: f64,
    pub peak_bins: usize,
}

pub fn car(hist: &CoincidenceHistogram, peak: DelayWindow, background: &[DelayWindow]) -> Result<CarEstimate> {
    if background.is_empty() {
        return Err(Error::Domain("CAR needs at least one background window".into()));
    }
    if let Some(b) = background.iter().find(|b| b.overlaps(&peak)) {
        return Err(Error::Domain(format!(
            "background window {b:?} overlaps the peak window {peak:?}"
        )));
    }
    let peak_bins = hist.bins_in(peak).len();
    if peak_bins == 0 {
        return Err(Error::Domain(format!("peak window {peak:?} holds no bins")));
    }
    let (mut n_bg, mut bins_bg) = (0u64, 0usize);
    for w in background {
        n_bg += hist.window_counts(*w);
        bins_bg += hist.bins_in(*w).len();
    }
    if bins_bg == 0 {
        return Err(Error::Domain("background windows hold no bins".into()));
    }
    let c = hist.window_counts(peak);
    let a = n_bg as f64 / bins_bg as f64 * peak_bins as f64;
    if a == 0.0 {
        return Err(Error::UndefinedCar { peak_counts: c });
    }
    let value = (c as f64 - a) / a;
    Ok(CarEstimate {
        car: value,
        sigma: car_uncertainty(value, c).ok(),
        peak_counts: c,
        accidentals: a,
        peak_bins,
    })
}

/// `CAR/√N`, the Poisson estimate on the peak count.
pub fn car_uncertainty(car: f64, peak_counts: u64) -> Result<f64> {
    if peak_counts == 0 {
        return Err(Error::Domain("CAR uncertainty needs N > 0 peak counts".into()));
    }
    Ok(car.abs() / (peak_counts as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_event_lands_at_zero() {
        let h = histogram(&[1000], &[1000], 100, 1000, 10_000).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[h.bin_of(0).unwrap()], 1);
        assert_eq!(h.delay_ps(h.bin_of(0).unwrap()), 0);
    }

    #[test]
    fn all_pairs_not_start_stop() {
        let h = histogram(&[0, 10], &[50, 60], 10, 100, 1000).unwrap();
        assert_eq!(h.total(), 4);
        for d in [40, 50, 60] {
            assert!(h.counts[h.bin_of(d).unwrap()] > 0);
        }
        assert_eq!(h.counts[h.bin_of(50).unwrap()], 2);
    }

    #[test]
    fn edges_and_signs() {
        let h = histogram(&[1000], &[949, 950, 1049, 1050, 1200], 100, 100, 10_000).unwrap();
        // bins centred on -100, 0, 100; 949 → -51 → bin -100, 950 → -50 → bin 0
        assert_eq!(h.counts, vec![1, 2, 1]);
        let empty = histogram(&[], &[], 100, 500, 1).unwrap();
        assert_eq!(empty.total(), 0);
        assert!(histogram(&[], &[], 0, 500, 1).is_err());
    }

    #[test]
    fn car_arithmetic() {
        let mut h = CoincidenceHistogram::empty(10, 100, 1).unwrap();
        h.counts.iter_mut().for_each(|c| *c = 10);
        let mid = h.bin_of(0).unwrap();
        h.counts[mid] = 30;
        let bg = [DelayWindow::new(-100, -50), DelayWindow::new(50, 100)];
        let e = car(&h, DelayWindow::centered(0, 0), &bg).unwrap();
        assert!((e.car - 2.0).abs() < 1e-12);
        h.counts[mid] = 10;
        assert!(car(&h, DelayWindow::centered(0, 20), &bg).unwrap().car.abs() < 1e-12);
    }

    #[test]
    fn car_errors() {
        let h = CoincidenceHistogram::empty(10, 100, 1).unwrap();
        let bg = [DelayWindow::new(50, 100)];
        assert!(matches!(
            car(&h, DelayWindow::centered(0, 10), &bg),
            Err(Error::UndefinedCar { peak_counts: 0 })
        ));
        assert!(matches!(
            car(&h, DelayWindow::centered(0, 60), &bg),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn uncertainty_formula() {
        assert!((car_uncertainty(10.0, 100).unwrap() - 1.0).abs() < 1e-12);
        assert!((car_uncertainty(10.0, 10_000).unwrap() - 0.1).abs() < 1e-12);
        assert!(car_uncertainty(10.0, 0).is_err());
    }

    #[test]
    fn merge_adds() {
        let a = histogram(&[0], &[0], 10, 50, 100).unwrap();
        let mut m = a.clone();
        m.merge(&a).unwrap();
        assert_eq!(m.total(), 2);
        assert_eq!(m.duration_ps, 200);
        let csv = m.to_csv(&[("seed", "1".into())]).unwrap();
        assert!(csv.starts_with("# seed: 1\n"));
        assert!(csv.contains("delay_ps,counts\n-50,0\n"));
    }
}
