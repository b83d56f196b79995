//! Heart-rate-variability indices over an NN series.

use serde::Serialize;

use super::{NnSeries, PpgError};
use crate::dsp::PsdEstimate;
use crate::util::{mean, population_variance, quantile_sorted, sample_std, sorted};

pub const MIN_NN_INTERVALS: usize = 10;
/// Histogram bin width for HTI and TINN (1/128 s).
pub const HIST_BIN_MS: f64 = 7.8125;
pub const LF_BAND: (f64, f64) = (0.04, 0.15);
pub const HF_BAND: (f64, f64) = (0.15, 0.4);
pub const VHF_BAND: (f64, f64) = (0.4, 0.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct HrvTime {
    pub MeanNN: f64,
    pub SDNN: f64,
    pub RMSSD: f64,
    pub SDSD: f64,
    pub CVNN: f64,
    pub CVSD: f64,
    pub MedianNN: f64,
    pub MadNN: f64,
    pub MCVNN: f64,
    pub IQRNN: f64,
    pub MinNN: f64,
    pub MaxNN: f64,
    pub HTI: f64,
    pub TINN: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct HrvFrequency {
    pub LF: f64,
    pub HF: f64,
    pub VHF: f64,
    pub LFHF: Option<f64>,
    pub LFn: Option<f64>,
    pub HFn: Option<f64>,
    pub LnHF: Option<f64>,
    pub SD1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct HrvNonlinear {
    pub CSI: Option<f64>,
    pub CVI: Option<f64>,
    pub PIP: f64,
    pub IALS: f64,
    pub PSS: f64,
    pub PAS: f64,
    pub GI: Option<f64>,
    pub SI: Option<f64>,
    pub AI: Option<f64>,
    pub PI: Option<f64>,
}

/// All 32 catalogued HRV indices. A whole domain is `None` when it could not
/// be computed for the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HrvFeatures {
    pub time: Option<HrvTime>,
    pub frequency: Option<HrvFrequency>,
    pub nonlinear: Option<HrvNonlinear>,
}

pub const TIME_NAMES: [&str; 14] = [
    "MeanNN", "SDNN", "RMSSD", "SDSD", "CVNN", "CVSD", "MedianNN", "MadNN", "MCVNN", "IQRNN", "MinNN", "MaxNN",
    "HTI", "TINN",
];
pub const FREQUENCY_NAMES: [&str; 8] = ["LF", "HF", "VHF", "LFHF", "LFn", "HFn", "LnHF", "SD1"];
pub const NONLINEAR_NAMES: [&str; 10] = ["CSI", "CVI", "PIP", "IALS", "PSS", "PAS", "GI", "SI", "AI", "PI"];

impl HrvTime {
    pub fn values(&self) -> [f64; 14] {
        [
            self.MeanNN, self.SDNN, self.RMSSD, self.SDSD, self.CVNN, self.CVSD, self.MedianNN, self.MadNN,
            self.MCVNN, self.IQRNN, self.MinNN, self.MaxNN, self.HTI, self.TINN,
        ]
    }
}

impl HrvFrequency {
    pub fn values(&self) -> [Option<f64>; 8] {
        [Some(self.LF), Some(self.HF), Some(self.VHF), self.LFHF, self.LFn, self.HFn, self.LnHF, Some(self.SD1)]
    }
}

impl HrvNonlinear {
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            self.CSI,
            self.CVI,
            Some(self.PIP),
            Some(self.IALS),
            Some(self.PSS),
            Some(self.PAS),
            self.GI,
            self.SI,
            self.AI,
            self.PI,
        ]
    }
}

impl HrvFeatures {
    /// `(name, value)` pairs in catalogue order.
    pub fn named(&self) -> Vec<(&'static str, Option<f64>)> {
        let mut out = Vec::with_capacity(32);
        match &self.time {
            Some(t) => out.extend(TIME_NAMES.iter().zip(t.values()).map(|(n, v)| (*n, Some(v)))),
            None => out.extend(TIME_NAMES.iter().map(|n| (*n, None))),
        }
        match &self.frequency {
            Some(f) => out.extend(FREQUENCY_NAMES.iter().copied().zip(f.values())),
            None => out.extend(FREQUENCY_NAMES.iter().map(|n| (*n, None))),
        }
        match &self.nonlinear {
            Some(nl) => out.extend(NONLINEAR_NAMES.iter().copied().zip(nl.values())),
            None => out.extend(NONLINEAR_NAMES.iter().map(|n| (*n, None))),
        }
        out
    }
}

fn check_len(nn: &NnSeries) -> Result<(), PpgError> {
    if nn.len() < MIN_NN_INTERVALS {
        return Err(PpgError::InsufficientBeats { needed: MIN_NN_INTERVALS, got: nn.len() });
    }
    Ok(())
}

fn diffs(nn: &[f64]) -> Vec<f64> {
    nn.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Population standard deviation of successive differences.
fn sdsd(nn: &[f64]) -> f64 {
    let d = diffs(nn);
    if d.is_empty() {
        0.0
    } else {
        population_variance(&d).sqrt()
    }
}

pub fn hrv_time(nn: &NnSeries) -> Result<HrvTime, PpgError> {
    check_len(nn)?;
    Ok(time_domain(&nn.nn_ms))
}

pub(crate) fn time_domain(nn: &[f64]) -> HrvTime {
    let s = sorted(nn);
    let mean_nn = mean(nn);
    let sdnn = sample_std(nn);
    let d = diffs(nn);
    let rmssd = if d.is_empty() { 0.0 } else { mean(&d.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt() };
    let median = quantile_sorted(&s, 0.5);
    let abs_dev: Vec<f64> = sorted(&nn.iter().map(|v| (v - median).abs()).collect::<Vec<_>>());
    let mad = 1.4826 * quantile_sorted(&abs_dev, 0.5);
    let (hti, tinn) = histogram_indices(nn);
    HrvTime {
        MeanNN: mean_nn,
        SDNN: sdnn,
        RMSSD: rmssd,
        SDSD: sdsd(nn),
        CVNN: sdnn / mean_nn,
        CVSD: rmssd / mean_nn,
        MedianNN: median,
        MadNN: mad,
        MCVNN: mad / median,
        IQRNN: quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25),
        MinNN: s[0],
        MaxNN: s[s.len() - 1],
        HTI: hti,
        TINN: tinn,
    }
}

/// HTI and TINN from the NN histogram with bins `floor(nn / w)`.
///
/// TINN: a triangle with apex at the modal bin `X` (height = its count) and
/// base vertices at bin positions `n < X < m` is fitted by least squares over
/// all bins; `n` ranges over `-1..X` and `m` over `X+1..=K` (one position past
/// either end of the histogram is allowed). TINN = `(m - n) · w`.
fn histogram_indices(nn: &[f64]) -> (f64, f64) {
    let keys: Vec<i64> = nn.iter().map(|v| (v / HIST_BIN_MS).floor() as i64).collect();
    let kmin = *keys.iter().min().unwrap();
    let kmax = *keys.iter().max().unwrap();
    let k = (kmax - kmin + 1) as usize;
    let mut hist = vec![0.0f64; k];
    for key in &keys {
        hist[(key - kmin) as usize] += 1.0;
    }
    let (x, y) = hist
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
    let hti = nn.len() as f64 / y;

    let x = x as i64;
    let mut best = (f64::INFINITY, -1i64, x + 1);
    for n in -1..x {
        for m in x + 1..=k as i64 {
            let mut err = 0.0;
            for (j, h) in hist.iter().enumerate() {
                let j = j as i64;
                let q = if j <= n || j >= m {
                    0.0
                } else if j <= x {
                    y * (j - n) as f64 / (x - n) as f64
                } else {
                    y * (m - j) as f64 / (m - x) as f64
                };
                err += (h - q) * (h - q);
            }
            if err < best.0 {
                best = (err, n, m);
            }
        }
    }
    (hti, (best.2 - best.1) as f64 * HIST_BIN_MS)
}

/// Band powers from a PSD of the resampled NN track, plus SD1 from the
/// event-domain series.
pub fn hrv_frequency(psd: &PsdEstimate, nn: &NnSeries) -> Result<HrvFrequency, PpgError> {
    check_len(nn)?;
    Ok(frequency_domain(psd, &nn.nn_ms))
}

pub(crate) fn frequency_domain(psd: &PsdEstimate, nn: &[f64]) -> HrvFrequency {
    let lf = psd.band_power(LF_BAND.0, LF_BAND.1, false);
    let hf = psd.band_power(HF_BAND.0, HF_BAND.1, false);
    let vhf = psd.band_power(VHF_BAND.0, VHF_BAND.1, true);
    let total = lf + hf + vhf;
    let ratio = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
    HrvFrequency {
        LF: lf,
        HF: hf,
        VHF: vhf,
        LFHF: ratio(lf, hf),
        LFn: ratio(lf, total),
        HFn: ratio(hf, total),
        LnHF: if hf > 0.0 { Some(hf.ln()) } else { None },
        SD1: sdsd(nn) / std::f64::consts::SQRT_2,
    }
}

pub fn hrv_nonlinear(nn: &NnSeries) -> Result<HrvNonlinear, PpgError> {
    check_len(nn)?;
    Ok(nonlinear_domain(&nn.nn_ms))
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Share (percent) of NN indices covered by runs `[start, start+len)` of
/// successive differences, where a run of `len` differences spans `len+1`
/// intervals.
fn coverage(n: usize, runs: impl Iterator<Item = (usize, usize)>) -> f64 {
    let mut covered = vec![false; n];
    for (start, len) in runs {
        for c in covered.iter_mut().skip(start).take(len + 1) {
            *c = true;
        }
    }
    100.0 * covered.iter().filter(|c| **c).count() as f64 / n as f64
}

pub(crate) fn nonlinear_domain(nn: &[f64]) -> HrvNonlinear {
    let n = nn.len();
    let sd1 = sdsd(nn) / std::f64::consts::SQRT_2;
    let sdnn = sample_std(nn);
    let sd2 = (2.0 * sdnn * sdnn - sd1 * sd1).max(0.0).sqrt();
    let (csi, cvi) = if sd1 > 0.0 {
        let prod = 16.0 * sd1 * sd2;
        (Some(sd2 / sd1), if prod > 0.0 { Some(prod.log10()) } else { None })
    } else {
        (None, None)
    };

    let signs: Vec<i8> = nn.windows(2).map(|w| sign(w[1] - w[0])).collect();
    let turning = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let pip = 100.0 * turning as f64 / n as f64;

    // maximal runs of equal sign
    let mut segments = Vec::new();
    let mut start = 0;
    for i in 1..=signs.len() {
        if i == signs.len() || signs[i] != signs[start] {
            segments.push((start, i - start));
            start = i;
        }
    }
    let ials = segments.len() as f64 / signs.len() as f64;
    let pss = coverage(n, segments.iter().copied().filter(|(_, len)| *len < 3));

    // maximal runs where consecutive differences alternate in sign
    let mut alternations = Vec::new();
    let mut start = 0;
    for i in 1..=signs.len() {
        let continues = i < signs.len() && signs[i] != 0 && signs[i - 1] != 0 && signs[i] != signs[i - 1];
        if !continues {
            alternations.push((start, i - start));
            start = i;
        }
    }
    let pas = coverage(n, alternations.into_iter().filter(|(_, len)| *len >= 4));

    let (gi, si, ai, pi) = asymmetry(nn);
    HrvNonlinear { CSI: csi, CVI: cvi, PIP: pip, IALS: ials, PSS: pss, PAS: pas, GI: gi, SI: si, AI: ai, PI: pi }
}

type Asym = (Option<f64>, Option<f64>, Option<f64>, Option<f64>);

/// Heart-rate asymmetry over Poincaré points `(nn[i], nn[i+1])` off the
/// identity line.
fn asymmetry(nn: &[f64]) -> Asym {
    let (mut n_above, mut n_below) = (0usize, 0usize);
    let (mut d_above, mut d_all) = (0.0, 0.0);
    let (mut th_above, mut th_all) = (0.0, 0.0);
    let (mut ar_above, mut ar_all) = (0.0, 0.0);
    for w in nn.windows(2) {
        let (x, y) = (w[0], w[1]);
        if x == y {
            continue;
        }
        let d = (y - x).abs() / std::f64::consts::SQRT_2;
        let theta = (45.0 - (y / x).atan().to_degrees()).abs();
        let area = theta / 360.0 * std::f64::consts::PI * (x * x + y * y);
        d_all += d * d;
        th_all += theta;
        ar_all += area;
        if y > x {
            n_above += 1;
            d_above += d * d;
            th_above += theta;
            ar_above += area;
        } else {
            n_below += 1;
        }
    }
    if n_above + n_below == 0 {
        return (None, None, None, None);
    }
    let pct = |a: f64, b: f64| if b > 0.0 { Some(100.0 * a / b) } else { None };
    (
        pct(d_above, d_all),
        pct(th_above, th_all),
        pct(ar_above, ar_all),
        Some(100.0 * n_below as f64 / (n_above + n_below) as f64),
    )
}

/// Time and nonlinear domains from an NN series and, when given, frequency
/// features from its track's PSD.
pub fn hrv_all(nn: &NnSeries, psd: Option<&PsdEstimate>) -> Result<HrvFeatures, PpgError> {
    check_len(nn)?;
    Ok(HrvFeatures {
        time: Some(time_domain(&nn.nn_ms)),
        frequency: psd.map(|p| frequency_domain(p, &nn.nn_ms)),
        nonlinear: Some(nonlinear_domain(&nn.nn_ms)),
    })
}
