//! Exploratory statistics: mixed-effects logistic screening, multiple-testing
//! adjustment, paired signed-rank tests and correlations.

mod glmm;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

pub use glmm::{fit_glmm, fit_mixed_logit, logistic_fit, GlmmOptions, MixedModelFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("outcome is separable by the predictor (|beta| = {beta:.3})")]
    Separation { beta: f64 },
    #[error("optimizer stopped after {} iterations without converging", .0.iterations)]
    NotConverged(Box<MixedModelFit>),
    #[error("every paired difference is zero")]
    DegeneratePairs,
    #[error("fixed-effect information is not positive definite at the optimum")]
    SingularInformation,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("input lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Feature(#[from] crate::featureset::FeatureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p: f64,
    pub adjusted_p: Option<f64>,
    pub n: usize,
    pub method: String,
}

/// Benjamini–Hochberg step-up adjustment of one family of p-values.
pub fn bh_adjust(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        out[i] = running.min(1.0);
    }
    out
}

/// Benjamini–Hochberg applied separately inside each group label.
pub fn bh_adjust_grouped<G: Ord + Clone>(p: &[f64], groups: &[G]) -> Vec<f64> {
    let mut fam: BTreeMap<G, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        fam.entry(g.clone()).or_default().push(i);
    }
    let mut out = vec![0.0; p.len()];
    for idx in fam.values() {
        let sub: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
        for (&i, a) in idx.iter().zip(bh_adjust(&sub)) {
            out[i] = a;
        }
    }
    out
}

/// Average ranks (1-based) of `v`, ties sharing the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub const WILCOXON_EXACT_MAX_N: usize = 12;

/// Two-sided paired signed-rank test on `a - b`.
///
/// Zero differences are dropped. Up to 12 pairs the null distribution is
/// enumerated exactly (tied ranks included); beyond that a normal
/// approximation with tie and continuity corrections is used. The reported
/// statistic is `min(W+, W-)`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Err(StatsError::DegeneratePairs);
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let stat = w_plus.min(total - w_plus);
    let (p, method) = if n <= WILCOXON_EXACT_MAX_N {
        (signed_rank_exact_p(&ranks, w_plus), "wilcoxon_exact")
    } else {
        let mean = total / 2.0;
        let mut tie_term = 0.0;
        let mut s = abs.clone();
        s.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < s.len() {
            let mut j = i;
            while j + 1 < s.len() && s[j + 1] == s[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let nf = n as f64;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let norm = Normal::standard();
        (2.0 * (1.0 - norm.cdf(z)), "wilcoxon_normal")
    };
    Ok(TestResult { statistic: stat, p: p.clamp(f64::MIN_POSITIVE, 1.0), adjusted_p: None, n, method: method.into() })
}

/// Exact two-sided p for the observed W+ given the (possibly tied) ranks.
fn signed_rank_exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    // Ranks are multiples of 1/2, so doubled ranks are integers.
    let twice: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = twice.iter().sum();
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    for &r in &twice {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let obs = (2.0 * w_plus).round() as usize;
    let all = 2f64.powi(ranks.len() as i32);
    let lower: f64 = counts[..=obs].iter().sum::<f64>() / all;
    let upper: f64 = counts[obs..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Pearson correlation with a two-sided t-test on `n - 2` degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::DegenerateInput(format!("{n} points")));
    }
    let (mx, my) = (crate::util::mean(x), crate::util::mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(StatsError::DegenerateInput("zero variance".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(TestResult { statistic: r, p: p.clamp(f64::MIN_POSITIVE, 1.0), adjusted_p: None, n, method: "pearson".into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bh_cases() {
        assert_eq!(bh_adjust(&[0.03]), vec![0.03]);
        let got = bh_adjust(&[0.01, 0.04, 0.03]);
        for (g, w) in got.iter().zip([0.03, 0.04, 0.04]) {
            assert!((g - w).abs() < 1e-15);
        }
        assert_eq!(bh_adjust(&[0.2; 5]), vec![0.2; 5]);
        let grouped = bh_adjust_grouped(&[0.01, 0.04, 0.01, 0.04], &["a", "a", "b", "c"]);
        assert_eq!(grouped, vec![0.02, 0.04, 0.01, 0.04]);
    }

    #[test]
    fn wilcoxon_cases() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let r = wilcoxon_signed_rank(&a, &[0.0; 6]).unwrap();
        assert!((r.p - 2.0 / 64.0).abs() < 1e-15);
        assert_eq!(r.statistic, 0.0);
        let r = wilcoxon_signed_rank(&[-3.0, -1.0, 1.0, 3.0], &[0.0; 4]).unwrap();
        assert_eq!(r.p, 1.0);
        assert_eq!(wilcoxon_signed_rank(&a, &a), Err(StatsError::DegeneratePairs));
    }

    #[test]
    fn wilcoxon_normal_branch_is_sane() {
        let a: Vec<f64> = (1..=30).map(f64::from).collect();
        let r = wilcoxon_signed_rank(&a, &vec![0.0; 30]).unwrap();
        assert_eq!(r.method, "wilcoxon_normal");
        assert!(r.p < 1e-5);
        let alt: Vec<f64> = (1..=30).map(|i| if i % 2 == 0 { i as f64 } else { -(i as f64) }).collect();
        assert!(wilcoxon_signed_rank(&alt, &vec![0.0; 30]).unwrap().p > 0.5);
    }

    #[test]
    fn pearson_cases() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        assert!((pearson(&x, &x).unwrap().statistic - 1.0).abs() < 1e-15);
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 7.0).collect();
        assert!((pearson(&x, &y).unwrap().statistic + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&x, &[1.0; 10]), Err(StatsError::DegenerateInput(_))));
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 1.0, 3.0]), vec![3.5, 1.5, 1.5, 3.5]);
    }
}
