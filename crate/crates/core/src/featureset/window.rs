use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::eda::{analyze_eda, EDA_FEATURE_NAMES};
use crate::ingest::SessionRecordings;
use crate::motion::{acc_features, temp_features};
use crate::ppg::analyze_bvp;

pub const WINDOW_S: f64 = 60.0;
pub const MIN_PARTIAL_WINDOW_S: f64 = 30.0;
pub const N_BIO: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// Non-overlapping one-minute windows, averaged.
    #[default]
    Averaged,
    /// A single window over the whole segment.
    Whole,
}

impl WindowMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowMode::Averaged => "averaged",
            WindowMode::Whole => "whole",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "averaged" => Some(WindowMode::Averaged),
            "whole" => Some(WindowMode::Whole),
            _ => None,
        }
    }
}

impl std::fmt::Display for WindowMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Window bounds for a segment `[t_start, t_end)`: consecutive 60 s windows,
/// plus the remainder when it lasts at least 30 s.
pub fn window_bounds(t_start: f64, t_end: f64, mode: WindowMode) -> Vec<(f64, f64)> {
    let dur = t_end - t_start;
    if mode == WindowMode::Whole {
        return if dur > 0.0 { vec![(t_start, t_end)] } else { Vec::new() };
    }
    let full = (dur / WINDOW_S + 1e-9).floor() as usize;
    let mut out: Vec<(f64, f64)> =
        (0..full).map(|k| (t_start + k as f64 * WINDOW_S, t_start + (k + 1) as f64 * WINDOW_S)).collect();
    let rest_start = t_start + full as f64 * WINDOW_S;
    if t_end - rest_start >= MIN_PARTIAL_WINDOW_S - 1e-9 {
        out.push((rest_start, t_end));
    }
    out
}

/// Per-window biobehavioral values in schema order (64 entries each).
pub fn per_window_values(
    recs: &SessionRecordings,
    windows: &[(f64, f64)],
) -> Result<Vec<Vec<Option<f64>>>, FeatureError> {
    let ppg = analyze_bvp(&recs.bvp).ok();
    let eda = analyze_eda(&recs.eda).ok();
    windows
        .iter()
        .map(|&(lo, hi)| {
            let mut row = Vec::with_capacity(N_BIO);
            match ppg.as_ref().and_then(|a| a.window(lo, hi).ok()) {
                Some(h) => row.extend(h.named().into_iter().map(|(_, v)| v)),
                None => row.extend(std::iter::repeat_n(None, 32)),
            }
            match eda.as_ref().and_then(|a| a.window(lo, hi).ok()) {
                Some(e) => row.extend(e.named().into_iter().map(|(_, v)| v)),
                None => row.extend(std::iter::repeat_n(None, EDA_FEATURE_NAMES.len())),
            }
            let acc = recs.acc.slice_time(lo, hi).ok();
            match acc.as_ref().and_then(|r| r.vectors()).and_then(|v| acc_features(v).ok()) {
                Some(a) => row.extend(a.values().map(Some)),
                None => row.extend([None; 8]),
            }
            let temp = recs.temp.slice_time(lo, hi).ok();
            match temp.as_ref().and_then(|r| r.scalars()).and_then(|v| temp_features(v).ok()) {
                Some(t) => row.extend(t.values().map(Some)),
                None => row.extend([None; 2]),
            }
            debug_assert_eq!(row.len(), N_BIO);
            Ok(row)
        })
        .collect()
}

/// Mean over the windows that produced each feature; `None` when none did.
pub fn average_windows(per_window: &[Vec<Option<f64>>]) -> Vec<Option<f64>> {
    let width = per_window.first().map(|r| r.len()).unwrap_or(N_BIO);
    (0..width)
        .map(|j| {
            let vals: Vec<f64> = per_window.iter().filter_map(|r| r[j]).filter(|v| v.is_finite()).collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        })
        .collect()
}

/// Biobehavioral feature vector for one phase segment whose recordings are
/// already sliced to `[t_start, t_end)`.
pub fn window_features(
    recs: &SessionRecordings,
    t_start: f64,
    t_end: f64,
    mode: WindowMode,
) -> Result<(Vec<Option<f64>>, usize), FeatureError> {
    let windows = window_bounds(t_start, t_end, mode);
    if windows.is_empty() {
        return Err(FeatureError::EmptyWindowSet { seconds: t_end - t_start });
    }
    let per = per_window_values(recs, &windows)?;
    Ok((average_windows(&per), windows.len()))
}
