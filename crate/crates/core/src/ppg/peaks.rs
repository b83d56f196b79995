use super::PpgError;

/// Short ("peak") moving-average window.
pub const PEAK_WINDOW_S: f64 = 0.111;
/// Long ("beat") moving-average window.
pub const BEAT_WINDOW_S: f64 = 0.667;
/// Threshold offset as a fraction of the mean squared signal.
pub const BEAT_OFFSET: f64 = 0.02;
pub const REFRACTORY_S: f64 = 0.3;
pub const MIN_SIGNAL_S: f64 = 5.0;

/// Centered boxcar mean; the window shrinks near the ends.
fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let before = width / 2;
    let after = width.saturating_sub(1) - before;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Systolic peaks of a bandpass-filtered PPG signal by the two-moving-average
/// block method. Returns sample indices in ascending order.
pub fn detect_systolic_peaks(signal: &[f64], rate: f64) -> Result<Vec<usize>, PpgError> {
    let min_len = (MIN_SIGNAL_S * rate).ceil() as usize;
    if signal.len() < min_len {
        return Err(PpgError::SignalTooShort { seconds: signal.len() as f64 / rate, needed: MIN_SIGNAL_S });
    }
    let sq: Vec<f64> = signal.iter().map(|v| v.max(0.0).powi(2)).collect();
    let w_peak = ((PEAK_WINDOW_S * rate).round() as usize).max(1);
    let w_beat = ((BEAT_WINDOW_S * rate).round() as usize).max(1);
    let ma_peak = moving_average(&sq, w_peak);
    let ma_beat = moving_average(&sq, w_beat);
    let offset = BEAT_OFFSET * sq.iter().sum::<f64>() / sq.len() as f64;
    let refractory = (REFRACTORY_S * rate).round() as usize;

    let mut peaks: Vec<usize> = Vec::new();
    let mut i = 0;
    let n = signal.len();
    while i < n {
        if ma_peak[i] > ma_beat[i] + offset {
            let start = i;
            while i < n && ma_peak[i] > ma_beat[i] + offset {
                i += 1;
            }
            if i - start >= w_peak {
                let apex = (start..i).max_by(|a, b| signal[*a].total_cmp(&signal[*b]).then(b.cmp(a))).unwrap();
                if peaks.last().is_none_or(|&last| apex - last > refractory) {
                    peaks.push(apex);
                }
            }
        } else {
            i += 1;
        }
    }
    if peaks.is_empty() {
        return Err(PpgError::NoBeatsDetected);
    }
    Ok(peaks)
}
