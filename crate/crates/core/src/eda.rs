//! Electrodermal activity: cleaning, tonic/phasic split, SCR events and track
//! statistics.

use serde::Serialize;
use thiserror::Error;

use crate::dsp::{butterworth_filter, DspError, FilterSpec};
use crate::ingest::SensorRecording;
use crate::util::{mean, quantile_sorted, sample_variance, sorted};

pub const EDA_CLEAN_ORDER: usize = 4;
pub const EDA_CLEAN_HZ: f64 = 3.0;
pub const TONIC_CUTOFF_HZ: f64 = 0.05;
/// Minimum SCR amplitude in µS.
pub const SCR_ONSET_THRESHOLD: f64 = 0.05;
pub const MIN_DECOMPOSE_S: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdaError {
    #[error("EDA too short: {seconds:.1} s, need {needed} s")]
    SignalTooShort { seconds: f64, needed: f64 },
    #[error("empty EDA track")]
    EmptyTrack,
    #[error("recording is not a scalar EDA stream")]
    WrongChannel,
    #[error(transparent)]
    Dsp(#[from] DspError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScrEvent {
    pub onset_time: f64,
    pub peak_time: f64,
    pub half_recovery_time: Option<f64>,
    /// Phasic rise from onset to peak (µS).
    pub amplitude: f64,
    /// Phasic value at the peak (µS).
    pub height: f64,
    pub rise_time: f64,
}

impl ScrEvent {
    /// Seconds from peak to half recovery.
    pub fn recovery(&self) -> Option<f64> {
        self.half_recovery_time.map(|t| t - self.peak_time)
    }
}

/// Moment and order statistics of one track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackStats {
    pub median: f64,
    pub mean: f64,
    pub variance: f64,
    pub max: f64,
    pub min: f64,
    pub skew: f64,
    pub kurtosis: f64,
    pub std: f64,
    /// Zero variance: skew and kurtosis are reported as 0.
    pub degenerate: bool,
}

pub const TRACK_STAT_NAMES: [&str; 8] = ["Median", "Mean", "Variance", "Max", "Min", "Skew", "Kurtosis", "Std"];

impl TrackStats {
    pub fn values(&self) -> [f64; 8] {
        [self.median, self.mean, self.variance, self.max, self.min, self.skew, self.kurtosis, self.std]
    }
}

/// Sample variance; skew and excess kurtosis from population central moments.
pub fn track_stats(x: &[f64]) -> Result<TrackStats, EdaError> {
    if x.is_empty() {
        return Err(EdaError::EmptyTrack);
    }
    let s = sorted(x);
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let variance = sample_variance(x);
    let scale = m.abs().max(s[s.len() - 1].abs()).max(1e-300);
    let degenerate = m2 <= (1e-14 * scale).powi(2);
    let (skew, kurtosis) = if degenerate { (0.0, 0.0) } else { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) };
    Ok(TrackStats {
        median: quantile_sorted(&s, 0.5),
        mean: m,
        variance,
        max: s[s.len() - 1],
        min: s[0],
        skew,
        kurtosis,
        std: variance.sqrt(),
        degenerate,
    })
}

/// 3 Hz 4th-order zero-phase lowpass. When 3 Hz is not below Nyquist (the
/// native 4 Hz stream) the signal is returned unchanged.
pub fn clean_eda(signal: &[f64], rate: f64) -> Result<Vec<f64>, EdaError> {
    if EDA_CLEAN_HZ >= rate / 2.0 {
        return Ok(signal.to_vec());
    }
    Ok(butterworth_filter(signal, FilterSpec::lowpass(EDA_CLEAN_ORDER, EDA_CLEAN_HZ, rate))?)
}

/// Tonic = first-order zero-phase lowpass at 0.05 Hz, phasic = remainder.
pub fn decompose_tonic_phasic(cleaned: &[f64], rate: f64) -> Result<(Vec<f64>, Vec<f64>), EdaError> {
    let secs = cleaned.len() as f64 / rate;
    if secs < MIN_DECOMPOSE_S {
        return Err(EdaError::SignalTooShort { seconds: secs, needed: MIN_DECOMPOSE_S });
    }
    let tonic = butterworth_filter(cleaned, FilterSpec::lowpass(1, TONIC_CUTOFF_HZ, rate))?;
    let phasic = cleaned.iter().zip(&tonic).map(|(c, t)| c - t).collect();
    Ok((tonic, phasic))
}

/// SCR events of a phasic track sampled at `rate` from `t0`.
///
/// An onset is a sample where the slope turns from non-positive to positive;
/// the peak is the following local maximum. Candidates rising less than
/// `threshold` are discarded. Half recovery is the linearly interpolated
/// first crossing below `onset + amplitude/2` after the peak, and is absent
/// when the next event starts first.
pub fn detect_scr(phasic: &[f64], rate: f64, t0: f64, threshold: f64) -> Vec<ScrEvent> {
    let n = phasic.len();
    let time = |i: f64| t0 + i / rate;
    let mut raw: Vec<(usize, usize)> = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        let before = phasic[i] - phasic[i - 1];
        let after = phasic[i + 1] - phasic[i];
        if before <= 0.0 && after > 0.0 {
            let mut j = i + 1;
            while j + 1 < n && phasic[j + 1] - phasic[j] > 0.0 {
                j += 1;
            }
            if phasic[j] - phasic[i] >= threshold {
                raw.push((i, j));
            }
            i = j;
        } else {
            i += 1;
        }
    }

    raw.iter()
        .enumerate()
        .map(|(k, &(on, pk))| {
            let amplitude = phasic[pk] - phasic[on];
            let level = phasic[on] + amplitude / 2.0;
            let limit = raw.get(k + 1).map(|r| r.0).unwrap_or(n);
            let mut half = None;
            for s in pk + 1..limit.min(n) {
                if phasic[s] < level {
                    let (a, b) = (phasic[s - 1], phasic[s]);
                    let frac = (a - level) / (a - b);
                    half = Some(time((s - 1) as f64 + frac));
                    break;
                }
            }
            ScrEvent {
                onset_time: time(on as f64),
                peak_time: time(pk as f64),
                half_recovery_time: half,
                amplitude,
                height: phasic[pk],
                rise_time: (pk - on) as f64 / rate,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdaFeatures {
    pub scr_onsets_n: usize,
    pub scr_peaks_n: usize,
    pub amplitude_mean: Option<f64>,
    pub height_mean: Option<f64>,
    pub rise_time_mean: Option<f64>,
    pub recovery_mean: Option<f64>,
    pub tonic: TrackStats,
    pub phasic: TrackStats,
}

impl EdaFeatures {
    pub fn named(&self) -> Vec<(String, Option<f64>)> {
        let mut out = vec![
            ("SCR_Onsets_N".to_string(), Some(self.scr_onsets_n as f64)),
            ("SCR_Peaks_N".to_string(), Some(self.scr_peaks_n as f64)),
            ("SCR_Amplitude".to_string(), self.amplitude_mean),
            ("SCR_Height".to_string(), self.height_mean),
            ("SCR_RiseTime".to_string(), self.rise_time_mean),
            ("SCR_Recovery".to_string(), self.recovery_mean),
        ];
        for (prefix, st) in [("Tonic", &self.tonic), ("Phasic", &self.phasic)] {
            for (name, v) in TRACK_STAT_NAMES.iter().zip(st.values()) {
                out.push((format!("{prefix}_{name}"), Some(v)));
            }
        }
        out
    }
}

pub const EDA_FEATURE_NAMES: [&str; 22] = [
    "SCR_Onsets_N", "SCR_Peaks_N", "SCR_Amplitude", "SCR_Height", "SCR_RiseTime", "SCR_Recovery",
    "Tonic_Median", "Tonic_Mean", "Tonic_Variance", "Tonic_Max", "Tonic_Min", "Tonic_Skew", "Tonic_Kurtosis", "Tonic_Std",
    "Phasic_Median", "Phasic_Mean", "Phasic_Variance", "Phasic_Max", "Phasic_Min", "Phasic_Skew", "Phasic_Kurtosis",
    "Phasic_Std",
];

fn mean_opt(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        None
    } else {
        Some(mean(&v))
    }
}

/// Features over tracks and the events belonging to them. Onsets and peaks
/// are counted separately so that a window cutting through an event counts
/// only the part it contains; event aggregates use events whose peak lies in
/// the window.
pub fn eda_features(
    tonic: &[f64],
    phasic: &[f64],
    events: &[ScrEvent],
    window: Option<(f64, f64)>,
) -> Result<EdaFeatures, EdaError> {
    let inside = |t: f64| window.is_none_or(|(lo, hi)| t >= lo && t < hi);
    let peaked: Vec<&ScrEvent> = events.iter().filter(|e| inside(e.peak_time)).collect();
    Ok(EdaFeatures {
        scr_onsets_n: events.iter().filter(|e| inside(e.onset_time)).count(),
        scr_peaks_n: peaked.len(),
        amplitude_mean: mean_opt(peaked.iter().map(|e| e.amplitude)),
        height_mean: mean_opt(peaked.iter().map(|e| e.height)),
        rise_time_mean: mean_opt(peaked.iter().map(|e| e.rise_time)),
        recovery_mean: mean_opt(peaked.iter().filter_map(|e| e.recovery())),
        tonic: track_stats(tonic)?,
        phasic: track_stats(phasic)?,
    })
}

/// Whole-segment EDA products, computed once and sliced per window.
#[derive(Debug, Clone)]
pub struct EdaAnalysis {
    pub t0: f64,
    pub rate: f64,
    pub cleaned: Vec<f64>,
    pub tonic: Vec<f64>,
    pub phasic: Vec<f64>,
    pub events: Vec<ScrEvent>,
}

impl EdaAnalysis {
    fn index_range(&self, t_lo: f64, t_hi: f64) -> std::ops::Range<usize> {
        let n = self.tonic.len();
        let idx = |t: f64| (((t - self.t0) * self.rate - 1e-9).ceil().max(0.0) as usize).min(n);
        idx(t_lo)..idx(t_hi)
    }

    pub fn window(&self, t_lo: f64, t_hi: f64) -> Result<EdaFeatures, EdaError> {
        let r = self.index_range(t_lo, t_hi);
        eda_features(&self.tonic[r.clone()], &self.phasic[r], &self.events, Some((t_lo, t_hi)))
    }

    pub fn whole(&self) -> Result<EdaFeatures, EdaError> {
        eda_features(&self.tonic, &self.phasic, &self.events, None)
    }
}

pub fn analyze_eda(rec: &SensorRecording) -> Result<EdaAnalysis, EdaError> {
    let raw = rec.scalars().ok_or(EdaError::WrongChannel)?;
    let cleaned = clean_eda(raw, rec.rate)?;
    let (tonic, phasic) = decompose_tonic_phasic(&cleaned, rec.rate)?;
    let events = detect_scr(&phasic, rec.rate, rec.start_time, SCR_ONSET_THRESHOLD);
    Ok(EdaAnalysis { t0: rec.start_time, rate: rec.rate, cleaned, tonic, phasic, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const FS: f64 = 4.0;

    fn grid(secs: f64) -> Vec<f64> {
        (0..(secs * FS) as usize).map(|i| i as f64 / FS).collect()
    }

    #[test]
    fn constant_level() {
        let (tonic, phasic) = decompose_tonic_phasic(&[2.0; 400], FS).unwrap();
        assert!(tonic.iter().all(|v| (v - 2.0).abs() < 1e-9));
        assert!(phasic.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn slow_ramp_stays_tonic() {
        let x: Vec<f64> = grid(300.0).iter().map(|t| t / 300.0).collect();
        let (_, phasic) = decompose_tonic_phasic(&x, FS).unwrap();
        let worst = phasic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 0.05, "{worst}");
    }

    #[test]
    fn bump_on_ramp_goes_phasic() {
        let x: Vec<f64> = grid(300.0)
            .iter()
            .map(|t| t / 300.0 + 0.3 * (-(t - 150.0).powi(2) / (2.0 * 0.5f64.powi(2))).exp())
            .collect();
        let (_, phasic) = decompose_tonic_phasic(&x, FS).unwrap();
        let at = phasic[600];
        assert!((0.2..=0.35).contains(&at), "{at}");
    }

    #[test]
    fn too_short_to_decompose() {
        assert!(matches!(decompose_tonic_phasic(&[1.0; 40], FS), Err(EdaError::SignalTooShort { .. })));
    }

    fn synthetic_scr(onset: f64, amp: f64, rise: f64, tau: f64, t: f64) -> f64 {
        if t < onset {
            0.0
        } else if t < onset + rise {
            amp * 0.5 * (1.0 - (PI * (t - onset) / rise).cos())
        } else {
            amp * (-(t - onset - rise) / tau).exp()
        }
    }

    #[test]
    fn single_scr_event() {
        let x: Vec<f64> = grid(40.0).iter().map(|t| synthetic_scr(10.0, 0.2, 1.5, 4.0, *t)).collect();
        let ev = detect_scr(&x, FS, 0.0, SCR_ONSET_THRESHOLD);
        assert_eq!(ev.len(), 1);
        let e = ev[0];
        assert!((e.amplitude - 0.2).abs() < 1e-3);
        assert!((e.rise_time - 1.5).abs() <= 0.25);
        let rec = e.recovery().unwrap();
        assert!((rec - 4.0 * 2f64.ln()).abs() < 0.05, "{rec}");
    }

    #[test]
    fn flat_and_small_bumps_give_nothing() {
        assert!(detect_scr(&[0.0; 100], FS, 0.0, SCR_ONSET_THRESHOLD).is_empty());
        let x: Vec<f64> = grid(40.0).iter().map(|t| synthetic_scr(10.0, 0.03, 1.5, 4.0, *t)).collect();
        assert!(detect_scr(&x, FS, 0.0, SCR_ONSET_THRESHOLD).is_empty());
    }

    #[test]
    fn recovery_absent_when_next_event_intervenes() {
        let x: Vec<f64> = grid(60.0)
            .iter()
            .map(|t| synthetic_scr(10.0, 0.2, 1.5, 4.0, *t) + synthetic_scr(12.5, 0.2, 1.5, 4.0, *t))
            .collect();
        let ev = detect_scr(&x, FS, 0.0, SCR_ONSET_THRESHOLD);
        assert_eq!(ev.len(), 2);
        assert!(ev[0].half_recovery_time.is_none());
        assert!(ev[1].half_recovery_time.is_some());
    }

    #[test]
    fn degenerate_and_symmetric_moments() {
        let s = track_stats(&[1.5; 20]).unwrap();
        assert!(s.degenerate);
        assert_eq!((s.variance, s.skew, s.kurtosis), (0.0, 0.0, 0.0));
        assert_eq!(s.max, s.min);
        let sine: Vec<f64> = (0..200).map(|i| (2.0 * PI * i as f64 / 200.0).sin()).collect();
        assert!(track_stats(&sine).unwrap().skew.abs() < 1e-9);
    }

    fn brute_moments(x: &[f64]) -> [f64; 8] {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
        let mut s = x.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = if s.len() % 2 == 1 { s[s.len() / 2] } else { (s[s.len() / 2 - 1] + s[s.len() / 2]) / 2.0 };
        [med, m, var, s[s.len() - 1], s[0], m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0, var.sqrt()]
    }

    proptest! {
        #[test]
        fn moments_match_two_pass(x in prop::collection::vec(-5.0f64..5.0, 200)) {
            let got = track_stats(&x).unwrap().values();
            let want = brute_moments(&x);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0));
            }
        }

        #[test]
        fn decomposition_sums_back(x in prop::collection::vec(0.5f64..5.0, 120..400)) {
            let (tonic, phasic) = decompose_tonic_phasic(&x, FS).unwrap();
            for i in 0..x.len() {
                prop_assert!((tonic[i] + phasic[i] - x[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn constant_shift_moves_only_tonic_location(
            bumps in prop::collection::vec((5.0f64..110.0, 0.02f64..0.4), 0..6),
            c in -1.0f64..3.0,
        ) {
            let base: Vec<f64> = grid(120.0).iter().map(|t| {
                1.0 + 0.002 * t + bumps.iter().map(|(on, a)| synthetic_scr(*on, *a, 1.5, 3.0, *t)).sum::<f64>()
            }).collect();
            let shifted: Vec<f64> = base.iter().map(|v| v + c).collect();
            let (ta, pa) = decompose_tonic_phasic(&base, FS).unwrap();
            let (tb, pb) = decompose_tonic_phasic(&shifted, FS).unwrap();
            let ea = detect_scr(&pa, FS, 0.0, SCR_ONSET_THRESHOLD);
            let eb = detect_scr(&pb, FS, 0.0, SCR_ONSET_THRESHOLD);
            prop_assert_eq!(ea.len(), eb.len());
            for (a, b) in ea.iter().zip(&eb) {
                prop_assert!((a.amplitude - b.amplitude).abs() < 1e-9 && (a.height - b.height).abs() < 1e-9);
                prop_assert!(a.amplitude >= SCR_ONSET_THRESHOLD && a.onset_time < a.peak_time);
                prop_assert_eq!(a.onset_time, b.onset_time);
            }
            let fa = eda_features(&ta, &pa, &ea, None).unwrap();
            let fb = eda_features(&tb, &pb, &eb, None).unwrap();
            for (x, y) in fa.phasic.values().iter().zip(fb.phasic.values()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            for (x, y) in [(fa.tonic.mean, fb.tonic.mean), (fa.tonic.median, fb.tonic.median),
                           (fa.tonic.min, fb.tonic.min), (fa.tonic.max, fb.tonic.max)] {
                prop_assert!((x + c - y).abs() < 1e-9);
            }
        }
    }
}
