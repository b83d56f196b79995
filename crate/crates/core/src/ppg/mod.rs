//! PPG pipeline: bandpass cleaning, systolic-peak detection, NN intervals and
//! heart-rate-variability indices.

mod hrv;
mod nn;
mod peaks;

pub use hrv::{
    hrv_all, hrv_frequency, hrv_nonlinear, hrv_time, HrvFeatures, HrvFrequency, HrvNonlinear, HrvTime,
    FREQUENCY_NAMES, HF_BAND, HIST_BIN_MS, LF_BAND, MIN_NN_INTERVALS, NONLINEAR_NAMES, TIME_NAMES, VHF_BAND,
};
pub use nn::{build_nn_series, nn_track, NnSeries, NnTrack, NN_MEDIAN_WINDOW_S, NN_PHYSIOLOGICAL_MS, NN_TRACK_RATE};
pub use peaks::{detect_systolic_peaks, BEAT_OFFSET, BEAT_WINDOW_S, PEAK_WINDOW_S, REFRACTORY_S};

use thiserror::Error;

use crate::dsp::{butterworth_filter, lomb_scargle_default, DspError, FilterSpec};
use crate::ingest::SensorRecording;

pub const BVP_FILTER_ORDER: usize = 4;
pub const BVP_LOW_HZ: f64 = 0.5;
pub const BVP_HIGH_HZ: f64 = 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PpgError {
    #[error("signal too short: {seconds:.2} s, need {needed} s")]
    SignalTooShort { seconds: f64, needed: f64 },
    #[error("no beats detected")]
    NoBeatsDetected,
    #[error("insufficient beats: need {needed} intervals, got {got}")]
    InsufficientBeats { needed: usize, got: usize },
    #[error("beat times must be strictly increasing")]
    InvalidBeats,
    #[error("recording is not a scalar BVP stream")]
    WrongChannel,
    #[error(transparent)]
    Dsp(#[from] DspError),
}

/// 4th-order zero-phase Butterworth bandpass, 0.5–8 Hz.
pub fn clean_bvp(signal: &[f64], rate: f64) -> Result<Vec<f64>, PpgError> {
    Ok(butterworth_filter(signal, FilterSpec::bandpass(BVP_FILTER_ORDER, BVP_LOW_HZ, BVP_HIGH_HZ, rate))?)
}

/// Whole-segment PPG products, computed once and sliced per window.
#[derive(Debug, Clone)]
pub struct PpgAnalysis {
    pub peaks: Vec<usize>,
    pub nn: NnSeries,
    pub track: NnTrack,
}

impl PpgAnalysis {
    /// HRV indices over `[t_lo, t_hi)`. Frequency indices are left out when
    /// the track slice is too short for a periodogram.
    pub fn window(&self, t_lo: f64, t_hi: f64) -> Result<HrvFeatures, PpgError> {
        let nn = self.nn.window(t_lo, t_hi);
        let (times, vals) = self.track.window(t_lo, t_hi);
        let psd = lomb_scargle_default(&times, &vals).ok();
        hrv_all(&nn, psd.as_ref())
    }
}

pub fn analyze_bvp(rec: &SensorRecording) -> Result<PpgAnalysis, PpgError> {
    let raw = rec.scalars().ok_or(PpgError::WrongChannel)?;
    let clean = clean_bvp(raw, rec.rate)?;
    let peaks = detect_systolic_peaks(&clean, rec.rate)?;
    let nn = build_nn_series(&peaks, rec.rate, rec.start_time)?;
    let track = nn_track(&nn, rec.start_time, rec.rate, raw.len())?;
    Ok(PpgAnalysis { peaks, nn, track })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Channel, Samples};
    use std::f64::consts::PI;

    fn pulse_recording(beats: &[f64], secs: f64) -> SensorRecording {
        let fs = 64.0;
        let x: Vec<f64> = (0..(secs * fs) as usize)
            .map(|i| {
                let t = i as f64 / fs;
                beats.iter().map(|b| (-(t - b).powi(2) / (2.0 * 0.06f64.powi(2))).exp()).sum()
            })
            .collect();
        SensorRecording::new(Channel::Bvp, 5000.0, fs, Samples::Scalar(x)).unwrap()
    }

    #[test]
    fn recovers_known_beat_schedule() {
        let mut beats = vec![0.5];
        while *beats.last().unwrap() < 119.0 {
            let k = beats.len() as f64;
            beats.push(beats.last().unwrap() + 0.85 + 0.05 * (2.0 * PI * 0.25 * k * 0.85).sin());
        }
        let rec = pulse_recording(&beats, 120.0);
        let a = analyze_bvp(&rec).unwrap();
        let truth: Vec<f64> = beats.iter().filter(|b| **b < 120.0).map(|b| 5000.0 + b).collect();
        assert_eq!(a.nn.beat_times.len(), truth.len());
        for (got, want) in a.nn.beat_times.iter().zip(&truth) {
            assert!((got - want).abs() <= 1.0 / 64.0, "{got} vs {want}");
        }
        let hrv = a.window(5000.0, 5060.0).unwrap();
        assert!(hrv.time.is_some() && hrv.frequency.is_some() && hrv.nonlinear.is_some());
    }

    #[test]
    fn hf_modulation_dominates() {
        // NN modulated at 0.3 Hz
        let mut beats = vec![0.0];
        while *beats.last().unwrap() < 300.0 {
            let t = *beats.last().unwrap();
            beats.push(t + 0.8 + 0.04 * (2.0 * PI * 0.3 * t).sin());
        }
        let nn = NnSeries::from_beat_times(beats).unwrap();
        let track = nn_track(&nn, 0.0, 64.0, 64 * 290).unwrap();
        let (t, v) = track.window(10.0, 280.0);
        let psd = lomb_scargle_default(&t, &v).unwrap();
        let f = hrv_frequency(&psd, &nn).unwrap();
        assert!(f.HFn.unwrap() > 0.8, "HFn {:?}", f.HFn);
    }
}
