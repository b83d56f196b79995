use serde::Serialize;

use super::PpgError;
use crate::dsp::{median_filter, spline_resample};

pub const NN_PHYSIOLOGICAL_MS: (f64, f64) = (250.0, 2000.0);
pub const NN_MEDIAN_WINDOW_S: f64 = 5.0;
pub const NN_TRACK_RATE: f64 = 100.0;

/// Beat-to-beat intervals with their beat timestamps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NnSeries {
    pub beat_times: Vec<f64>,
    pub nn_ms: Vec<f64>,
    /// Set when any interval falls outside the physiological range.
    pub out_of_range: bool,
}

impl NnSeries {
    pub fn from_beat_times(beat_times: Vec<f64>) -> Result<Self, PpgError> {
        if beat_times.len() < 2 {
            return Err(PpgError::InsufficientBeats { needed: 2, got: beat_times.len().saturating_sub(1) });
        }
        let nn_ms: Vec<f64> = beat_times.windows(2).map(|w| (w[1] - w[0]) * 1000.0).collect();
        if nn_ms.iter().any(|v| !(*v > 0.0)) {
            return Err(PpgError::InvalidBeats);
        }
        let (lo, hi) = NN_PHYSIOLOGICAL_MS;
        let out_of_range = nn_ms.iter().any(|v| *v < lo || *v > hi);
        Ok(Self { beat_times, nn_ms, out_of_range })
    }

    /// Series built from intervals alone, with the first beat at `t0`.
    pub fn from_intervals(t0: f64, nn_ms: &[f64]) -> Result<Self, PpgError> {
        let mut times = Vec::with_capacity(nn_ms.len() + 1);
        times.push(t0);
        let mut t = t0;
        for v in nn_ms {
            t += v / 1000.0;
            times.push(t);
        }
        let mut s = Self::from_beat_times(times)?;
        s.nn_ms = nn_ms.to_vec();
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.nn_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nn_ms.is_empty()
    }

    /// Intervals whose two delimiting beats both fall in `[t_lo, t_hi)`.
    pub fn window(&self, t_lo: f64, t_hi: f64) -> NnSeries {
        let first = self.beat_times.partition_point(|t| *t < t_lo);
        let end = self.beat_times.partition_point(|t| *t < t_hi);
        if end <= first + 1 {
            return NnSeries { beat_times: Vec::new(), nn_ms: Vec::new(), out_of_range: false };
        }
        let nn_ms = self.nn_ms[first..end - 1].to_vec();
        let (lo, hi) = NN_PHYSIOLOGICAL_MS;
        NnSeries {
            beat_times: self.beat_times[first..end].to_vec(),
            out_of_range: nn_ms.iter().any(|v| *v < lo || *v > hi),
            nn_ms,
        }
    }
}

/// NN series from peak sample indices of a stream starting at `t0`.
pub fn build_nn_series(peaks: &[usize], rate: f64, t0: f64) -> Result<NnSeries, PpgError> {
    if peaks.len() < 2 {
        return Err(PpgError::InsufficientBeats { needed: 2, got: peaks.len().saturating_sub(1) });
    }
    let times: Vec<f64> = peaks.iter().map(|&p| t0 + p as f64 / rate).collect();
    let mut s = NnSeries::from_beat_times(times)?;
    // exact arithmetic on integer sample gaps
    s.nn_ms = peaks.windows(2).map(|w| (w[1] - w[0]) as f64 * 1000.0 / rate).collect();
    Ok(s)
}

/// Evenly sampled NN value track used for spectral analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct NnTrack {
    pub t0: f64,
    pub rate: f64,
    pub values: Vec<f64>,
}

impl NnTrack {
    pub fn time_of(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.rate
    }

    /// Sample times and values inside `[t_lo, t_hi)`.
    pub fn window(&self, t_lo: f64, t_hi: f64) -> (Vec<f64>, Vec<f64>) {
        let mut times = Vec::new();
        let mut vals = Vec::new();
        for (i, v) in self.values.iter().enumerate() {
            let t = self.time_of(i);
            if t >= t_lo && t < t_hi {
                times.push(t);
                vals.push(*v);
            }
        }
        (times, vals)
    }
}

/// Hold the latest completed NN value on the sensor grid (`n` samples at
/// `grid_rate` from `t0`; back-filled before the first interval), median
/// filter over 5 s, and spline-resample to 100 Hz.
pub fn nn_track(nn: &NnSeries, t0: f64, grid_rate: f64, n: usize) -> Result<NnTrack, PpgError> {
    if nn.is_empty() {
        return Err(PpgError::InsufficientBeats { needed: 1, got: 0 });
    }
    let mut held = Vec::with_capacity(n);
    let mut j = 0usize;
    for k in 0..n {
        let t = t0 + k as f64 / grid_rate;
        while j + 1 < nn.len() && nn.beat_times[j + 2] <= t {
            j += 1;
        }
        held.push(nn.nn_ms[j]);
    }
    let smoothed = median_filter(&held, NN_MEDIAN_WINDOW_S, grid_rate)?;
    let values = spline_resample(&smoothed, grid_rate, NN_TRACK_RATE)?;
    Ok(NnTrack { t0, rate: NN_TRACK_RATE, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nn_from_peaks() {
        assert_eq!(build_nn_series(&[0, 64, 128], 64.0, 0.0).unwrap().nn_ms, vec![1000.0, 1000.0]);
        assert_eq!(build_nn_series(&[0, 51, 115], 64.0, 0.0).unwrap().nn_ms, vec![796.875, 1000.0]);
        assert!(matches!(build_nn_series(&[3], 64.0, 0.0), Err(PpgError::InsufficientBeats { .. })));
    }

    #[test]
    fn range_flag() {
        assert!(build_nn_series(&[0, 10, 20], 64.0, 0.0).unwrap().out_of_range);
        assert!(!build_nn_series(&[0, 64, 128], 64.0, 0.0).unwrap().out_of_range);
    }

    #[test]
    fn windowing_keeps_whole_intervals() {
        let s = NnSeries::from_beat_times(vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = s.window(1.0, 3.5);
        assert_eq!(w.beat_times, vec![1.0, 2.0, 3.0]);
        assert_eq!(w.nn_ms.len(), 2);
    }

    #[test]
    fn track_holds_latest_value() {
        let s = NnSeries::from_beat_times(vec![0.0, 1.0, 3.0, 4.0]).unwrap();
        let tr = nn_track(&s, 0.0, 4.0, 20).unwrap();
        assert_eq!(tr.rate, NN_TRACK_RATE);
        assert_eq!(tr.values.len(), 476);
        // constant spans reproduce exactly
        let flat = NnSeries::from_beat_times((0..30).map(|i| i as f64 * 0.8).collect()).unwrap();
        let tr = nn_track(&flat, 0.0, 64.0, 64 * 20).unwrap();
        assert!(tr.values.iter().all(|v| (v - 800.0).abs() < 1e-9));
    }
}
