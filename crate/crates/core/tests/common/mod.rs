//! Independent reference evaluators used by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const BIN_MS: f64 = 7.8125;

/// `|a - b| <= rel · max(|a|, |b|)`, with exact equality accepted.
pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

pub fn opt_close(a: Option<f64>, b: Option<f64>, rel: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => rel_close(x, y, rel),
        (None, None) => true,
        _ => false,
    }
}

fn linear_quantile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (pos - lo as f64) * (s[hi] - s[lo])
}

fn sgn(x: f64) -> i32 {
    (x > 0.0) as i32 - (x < 0.0) as i32
}

/// Time-domain indices in catalogue order.
pub fn time_oracle(nn: &[f64]) -> [f64; 14] {
    let n = nn.len() as f64;
    let mean = nn.iter().sum::<f64>() / n;
    let sdnn = (nn.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let d: Vec<f64> = (1..nn.len()).map(|i| nn[i] - nn[i - 1]).collect();
    let m = d.len() as f64;
    let rmssd = (d.iter().map(|x| x * x).sum::<f64>() / m).sqrt();
    let dmean = d.iter().sum::<f64>() / m;
    let sdsd = (d.iter().map(|x| (x - dmean).powi(2)).sum::<f64>() / m).sqrt();
    let median = linear_quantile(nn, 0.5);
    let dev: Vec<f64> = nn.iter().map(|v| (v - median).abs()).collect();
    let mad = 1.4826 * linear_quantile(&dev, 0.5);
    let min = nn.iter().copied().fold(f64::INFINITY, f64::min);
    let max = nn.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (hti, tinn) = histogram_oracle(nn);
    [
        mean,
        sdnn,
        rmssd,
        sdsd,
        sdnn / mean,
        rmssd / mean,
        median,
        mad,
        mad / median,
        linear_quantile(nn, 0.75) - linear_quantile(nn, 0.25),
        min,
        max,
        hti,
        tinn,
    ]
}

/// HTI and TINN by exhaustive triangle search, comparing squared errors as
/// exact rationals. Bin positions are relative to the lowest occupied bin,
/// base vertices may sit one position outside the histogram, and the
/// earliest `(n, m)` wins ties.
pub fn histogram_oracle(nn: &[f64]) -> (f64, f64) {
    let mut counts: BTreeMap<i64, i64> = BTreeMap::new();
    for v in nn {
        *counts.entry((v / BIN_MS).floor() as i64).or_insert(0) += 1;
    }
    let lowest = *counts.keys().next().unwrap();
    let highest = *counts.keys().last().unwrap();
    let k = highest - lowest + 1;
    let h = |j: i64| counts.get(&(j + lowest)).copied().unwrap_or(0);
    let mut x = 0;
    for j in 0..k {
        if h(j) > h(x) {
            x = j;
        }
    }
    let y = h(x);
    let hti = nn.len() as f64 / y as f64;

    // err(n, m) · L² with L = (x - n)(m - x) is an integer.
    let scaled = |n: i64, m: i64| -> (i128, i128) {
        let l = ((x - n) * (m - x)) as i128;
        let mut e: i128 = 0;
        for j in 0..k {
            let q = if j > n && j <= x {
                y as i128 * (j - n) as i128 * (m - x) as i128
            } else if j > x && j < m {
                y as i128 * (m - j) as i128 * (x - n) as i128
            } else {
                0
            };
            let r = h(j) as i128 * l - q;
            e += r * r;
        }
        (e, l * l)
    };
    let mut best: Option<((i128, i128), i64, i64)> = None;
    for n in -1..x {
        for m in x + 1..=k {
            let cand = scaled(n, m);
            let better = match &best {
                None => true,
                Some((b, _, _)) => cand.0 * b.1 < b.0 * cand.1,
            };
            if better {
                best = Some((cand, n, m));
            }
        }
    }
    let (_, n, m) = best.unwrap();
    (hti, (m - n) as f64 * BIN_MS)
}

/// Non-linear indices in catalogue order; `None` where undefined.
pub fn nonlinear_oracle(nn: &[f64]) -> [Option<f64>; 10] {
    let n = nn.len();
    let t = time_oracle(nn);
    let (sdnn, sdsd) = (t[1], t[3]);
    let sd1 = sdsd / 2f64.sqrt();
    let sd2 = (2.0 * sdnn * sdnn - sd1 * sd1).max(0.0).sqrt();
    let csi = (sd1 > 0.0).then(|| sd2 / sd1);
    let cvi = (sd1 > 0.0 && sd2 > 0.0).then(|| (16.0 * sd1 * sd2).log10());

    let s: Vec<i32> = (0..n - 1).map(|i| sgn(nn[i + 1] - nn[i])).collect();
    let m = s.len();

    let turns = (0..n.saturating_sub(2)).filter(|&i| sgn(nn[i + 1] - nn[i]) != sgn(nn[i + 2] - nn[i + 1])).count();
    let pip = 100.0 * turns as f64 / n as f64;

    let changes = (1..m).filter(|&i| s[i] != s[i - 1]).count();
    let ials = (1 + changes) as f64 / m as f64;

    // run length of equal signs through each difference
    let run_len = |i: usize| {
        let mut a = i;
        while a > 0 && s[a - 1] == s[i] {
            a -= 1;
        }
        let mut b = i;
        while b + 1 < m && s[b + 1] == s[i] {
            b += 1;
        }
        b - a + 1
    };
    let short: Vec<bool> = (0..m).map(|i| run_len(i) < 3).collect();
    let cover = |flag: &[bool]| {
        let c = (0..n).filter(|&j| (j > 0 && flag[j - 1]) || (j < m && flag[j])).count();
        100.0 * c as f64 / n as f64
    };
    let pss = cover(&short);

    // a difference lies in an alternation run of at least four when some
    // window of four consecutive differences containing it alternates
    let alternates = |a: usize| (a..a + 3).all(|i| s[i] != 0 && s[i + 1] != 0 && s[i] == -s[i + 1]);
    let long_alt: Vec<bool> = (0..m)
        .map(|i| (i.saturating_sub(3)..=i).any(|a| a + 3 < m && alternates(a)))
        .collect();
    let pas = cover(&long_alt);

    let mut pts = Vec::new();
    for i in 0..n - 1 {
        let (x, y) = (nn[i], nn[i + 1]);
        if x != y {
            let dist = (x * (PI / 4.0).sin() - y * (PI / 4.0).cos()).abs();
            let angle = (y.atan2(x) - PI / 4.0).abs().to_degrees();
            let area = angle / 360.0 * PI * (x * x + y * y);
            pts.push((y > x, dist * dist, angle, area));
        }
    }
    let share = |f: &dyn Fn(&(bool, f64, f64, f64)) -> f64| {
        let all: f64 = pts.iter().map(f).sum();
        let above: f64 = pts.iter().filter(|p| p.0).map(f).sum();
        (all > 0.0).then(|| 100.0 * above / all)
    };
    let (gi, si, ai, pi) = if pts.is_empty() {
        (None, None, None, None)
    } else {
        let below = pts.iter().filter(|p| !p.0).count();
        (share(&|p| p.1), share(&|p| p.2), share(&|p| p.3), Some(100.0 * below as f64 / pts.len() as f64))
    };
    [csi, cvi, Some(pip), Some(ials), Some(pss), Some(pas), gi, si, ai, pi]
}

/// Textbook Lomb–Scargle with explicit τ at each frequency, scaled by
/// twice the mean sampling step.
pub fn lomb_direct(times: &[f64], values: &[f64], freqs: &[f64]) -> Vec<f64> {
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
            let (mut yc, mut cc, mut ys, mut ss) = (0.0, 0.0, 0.0, 0.0);
            for (t, v) in times.iter().zip(values) {
                let (sn, cs) = (w * (t - tau)).sin_cos();
                yc += (v - mean) * cs;
                cc += cs * cs;
                ys += (v - mean) * sn;
                ss += sn * sn;
            }
            let mut p = 0.0;
            if cc > 1e-12 {
                p += yc * yc / cc;
            }
            if ss > 1e-12 {
                p += ys * ys / ss;
            }
            2.0 * dt * 0.5 * p
        })
        .collect()
}

/// Frequency-domain indices in catalogue order from a direct periodogram
/// on the 500-point grid over [0.01, 0.5] Hz.
pub fn frequency_oracle(times: &[f64], values: &[f64], nn: &[f64]) -> [Option<f64>; 8] {
    let n_f = 500;
    let df = 0.49 / (n_f - 1) as f64;
    let freqs: Vec<f64> = (0..n_f).map(|k| 0.01 + k as f64 * df).collect();
    let p = lomb_direct(times, values, &freqs);
    let band = |lo: f64, hi: f64, closed: bool| -> f64 {
        freqs
            .iter()
            .zip(&p)
            .filter(|(f, _)| **f >= lo && (**f < hi || (closed && **f <= hi + 1e-12)))
            .map(|(_, v)| v * df)
            .sum()
    };
    let lf = band(0.04, 0.15, false);
    let hf = band(0.15, 0.4, false);
    let vhf = band(0.4, 0.5, true);
    let tot = lf + hf + vhf;
    let d: Vec<f64> = (1..nn.len()).map(|i| nn[i] - nn[i - 1]).collect();
    let dm = d.iter().sum::<f64>() / d.len() as f64;
    let sd1 = (d.iter().map(|x| (x - dm).powi(2)).sum::<f64>() / d.len() as f64 / 2.0).sqrt();
    [
        Some(lf),
        Some(hf),
        Some(vhf),
        (hf > 0.0).then(|| lf / hf),
        (tot > 0.0).then(|| lf / tot),
        (tot > 0.0).then(|| hf / tot),
        (hf > 0.0).then(|| hf.ln()),
        Some(sd1),
    ]
}

/// Two-sided exact Wilcoxon signed-rank p by enumerating all 2ⁿ sign
/// assignments of the (average) ranks of the non-zero differences.
pub fn wilcoxon_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    let ranks: Vec<f64> = d
        .iter()
        .map(|v| {
            let less = d.iter().filter(|w| w.abs() < v.abs()).count() as f64;
            let equal = d.iter().filter(|w| w.abs() == v.abs()).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let observed = (w_plus - total / 2.0).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if (w - total / 2.0).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    (extreme as f64 / (1u64 << n) as f64).min(1.0)
}

/// Pearson r from the raw-moment formula.
pub fn pearson_direct(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Logistic regression by iteratively reweighted least squares.
pub fn logistic_irls(x: &[f64], y: &[u8]) -> (f64, f64) {
    let (mut b0, mut b1) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let (mut s00, mut s01, mut s11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let p = 1.0 / (1.0 + (-(b0 + b1 * xi)).exp());
            let w = p * (1.0 - p);
            let z = b0 + b1 * xi + (yi as f64 - p) / w;
            s00 += w;
            s01 += w * xi;
            s11 += w * xi * xi;
            r0 += w * z;
            r1 += w * xi * z;
        }
        let det = s00 * s11 - s01 * s01;
        let n0 = (s11 * r0 - s01 * r1) / det;
        let n1 = (s00 * r1 - s01 * r0) / det;
        let done = (n0 - b0).abs().max((n1 - b1).abs()) < 1e-14;
        b0 = n0;
        b1 = n1;
        if done {
            break;
        }
    }
    (b0, b1)
}
