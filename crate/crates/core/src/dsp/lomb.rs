use std::f64::consts::PI;

use serde::Serialize;

use super::DspError;

pub const LS_N_FREQS: usize = 500;
pub const LS_F_LO: f64 = 0.01;
pub const LS_F_HI: f64 = 0.5;

/// One-sided power spectral density on an evenly spaced frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl PsdEstimate {
    /// Grid spacing (Hz).
    pub fn df(&self) -> f64 {
        if self.freqs.len() < 2 {
            0.0
        } else {
            self.freqs[1] - self.freqs[0]
        }
    }

    /// Σ power · Δf over bins with `lo <= f < hi` (or `lo <= f <= hi` when
    /// `inclusive_hi`).
    pub fn band_power(&self, lo: f64, hi: f64, inclusive_hi: bool) -> f64 {
        let df = self.df();
        // tolerate representation error at the band edges
        let eps = df * 1e-6;
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| {
                **f >= lo - eps && if inclusive_hi { **f <= hi + eps } else { **f < hi - eps }
            })
            .map(|(_, p)| p * df)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df()
    }
}

/// Classical Lomb–Scargle periodogram with the per-frequency phase offset τ,
/// computed on the mean-subtracted values.
///
/// The output is scaled by `2·dt` with `dt` the mean sampling step, so that
/// `Σ power·Δf` over a grid that covers the signal's spectrum approximates
/// its variance.
pub fn lomb_scargle(
    times: &[f64],
    values: &[f64],
    n_freqs: usize,
    f_lo: f64,
    f_hi: f64,
) -> Result<PsdEstimate, DspError> {
    let n = times.len();
    if n < 4 || values.len() != n {
        return Err(DspError::InsufficientPoints { needed: 4, got: n.min(values.len()) });
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(DspError::InvalidTimes);
    }
    if n_freqs < 2 || !(f_lo > 0.0 && f_hi > f_lo) {
        return Err(DspError::InvalidSpec(format!("frequency grid [{f_lo}, {f_hi}] with {n_freqs} points")));
    }
    let df = (f_hi - f_lo) / (n_freqs - 1) as f64;
    let freqs: Vec<f64> = (0..n_freqs).map(|k| f_lo + k as f64 * df).collect();

    let mean = values.iter().sum::<f64>() / n as f64;
    let t0 = times[0];

    // Trigonometric sums per frequency, each sample's phase advanced across
    // the grid by a rotation.
    let mut yc = vec![0.0; n_freqs];
    let mut ys = vec![0.0; n_freqs];
    let mut cc = vec![0.0; n_freqs];
    let mut ss = vec![0.0; n_freqs];
    let mut cs = vec![0.0; n_freqs];
    for (&t, &v) in times.iter().zip(values) {
        let tt = t - t0;
        let y = v - mean;
        let (mut s, mut c) = (2.0 * PI * f_lo * tt).sin_cos();
        let (ds, dc) = (2.0 * PI * df * tt).sin_cos();
        for k in 0..n_freqs {
            yc[k] += y * c;
            ys[k] += y * s;
            cc[k] += c * c;
            ss[k] += s * s;
            cs[k] += c * s;
            let cn = c * dc - s * ds;
            s = s * dc + c * ds;
            c = cn;
        }
    }

    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    let power = (0..n_freqs)
        .map(|k| {
            let wt = 0.5 * (2.0 * cs[k]).atan2(cc[k] - ss[k]);
            let (st, ct) = wt.sin_cos();
            let yct = yc[k] * ct + ys[k] * st;
            let yst = ys[k] * ct - yc[k] * st;
            let cct = cc[k] * ct * ct + 2.0 * cs[k] * ct * st + ss[k] * st * st;
            let sst = ss[k] * ct * ct - 2.0 * cs[k] * ct * st + cc[k] * st * st;
            let mut p = 0.0;
            if cct > 1e-12 {
                p += yct * yct / cct;
            }
            if sst > 1e-12 {
                p += yst * yst / sst;
            }
            (dt * p).max(0.0)
        })
        .collect();
    Ok(PsdEstimate { freqs, power })
}

/// Periodogram on the default 500-point grid over [0.01, 0.5] Hz.
pub fn lomb_scargle_default(times: &[f64], values: &[f64]) -> Result<PsdEstimate, DspError> {
    lomb_scargle(times, values, LS_N_FREQS, LS_F_LO, LS_F_HI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook evaluation with explicit τ per frequency.
    fn direct(times: &[f64], values: &[f64], freqs: &[f64]) -> Vec<f64> {
        let n = times.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
        freqs
            .iter()
            .map(|f| {
                let w = 2.0 * PI * f;
                let s2: f64 = times.iter().map(|t| (2.0 * w * t).sin()).sum();
                let c2: f64 = times.iter().map(|t| (2.0 * w * t).cos()).sum();
                let tau = s2.atan2(c2) / (2.0 * w);
                let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
                for (t, v) in times.iter().zip(values) {
                    let arg = w * (t - tau);
                    a += (v - mean) * arg.cos();
                    b += arg.cos().powi(2);
                    c += (v - mean) * arg.sin();
                    d += arg.sin().powi(2);
                }
                dt * (a * a / b + c * c / d)
            })
            .collect()
    }

    fn grid_sine(parts: &[(f64, f64)], fs: f64, secs: f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..(fs * secs) as usize).map(|i| i as f64 / fs).collect();
        let v = t.iter().map(|t| parts.iter().map(|(a, f)| a * (2.0 * PI * f * t).sin()).sum()).collect();
        (t, v)
    }

    #[test]
    fn matches_direct_definition() {
        let t: Vec<f64> = (0..120).map(|i| i as f64 * 0.9 + 0.3 * ((i * 37 % 11) as f64 / 11.0)).collect();
        let v: Vec<f64> = t.iter().map(|x| (0.7 * x).sin() + 0.2 * (x * 1.9).cos() + 0.01 * x).collect();
        let psd = lomb_scargle(&t, &v, 50, 0.01, 0.5).unwrap();
        let want = direct(&t, &v, &psd.freqs);
        for (g, w) in psd.power.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9 * (1.0 + w.abs()), "{g} vs {w}");
        }
    }

    #[test]
    fn constant_input_has_no_power() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.5).collect();
        let psd = lomb_scargle_default(&t, &vec![800.0; 100]).unwrap();
        assert!(psd.power.iter().all(|p| *p < 1e-12));
    }

    #[test]
    fn sinusoid_peak_is_localized() {
        let (t, v) = grid_sine(&[(1.0, 0.1)], 4.0, 300.0);
        let psd = lomb_scargle_default(&t, &v).unwrap();
        let k = (0..psd.power.len()).max_by(|a, b| psd.power[*a].total_cmp(&psd.power[*b])).unwrap();
        assert!((psd.freqs[k] - 0.1).abs() <= psd.df());
    }

    #[test]
    fn two_tone_band_ratio() {
        let (t, v) = grid_sine(&[(2.0, 0.08), (1.0, 0.3)], 4.0, 300.0);
        let psd = lomb_scargle_default(&t, &v).unwrap();
        let lo = psd.band_power(0.05, 0.11, false);
        let hi = psd.band_power(0.27, 0.33, false);
        let ratio = lo / hi;
        assert!((ratio / 4.0 - 1.0).abs() < 0.1, "ratio {ratio}");
        let total = psd.total_power();
        assert!((total / 2.5 - 1.0).abs() < 0.1, "total {total}");
    }

    #[test]
    fn errors() {
        assert_eq!(
            lomb_scargle_default(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(DspError::InsufficientPoints { needed: 4, got: 3 })
        );
        assert_eq!(lomb_scargle_default(&[0.0, 2.0, 1.0, 3.0], &[1.0; 4]), Err(DspError::InvalidTimes));
    }

    proptest! {
        #[test]
        fn nonnegative_and_shift_invariant(
            vals in prop::collection::vec(-50.0f64..50.0, 8..80),
            shift in -1000.0f64..1000.0,
        ) {
            let t: Vec<f64> = (0..vals.len()).map(|i| i as f64 * 0.7).collect();
            let a = lomb_scargle(&t, &vals, 64, 0.01, 0.5).unwrap();
            let shifted: Vec<f64> = vals.iter().map(|v| v + shift).collect();
            let b = lomb_scargle(&t, &shifted, 64, 0.01, 0.5).unwrap();
            let scale = a.power.iter().fold(1e-12f64, |m, v| m.max(*v));
            for (x, y) in a.power.iter().zip(&b.power) {
                prop_assert!(*x >= 0.0);
                prop_assert!((x - y).abs() <= 1e-10 * scale);
            }
        }
    }
}
