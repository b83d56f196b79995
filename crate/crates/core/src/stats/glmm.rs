//! Logistic regression with a correlated random intercept and slope per
//! participant, fitted by maximizing the Laplace-approximated likelihood.
//!
//! Random effects are written as `u = L b` with `b ~ N(0, I)` and `L` lower
//! triangular, so any `L` gives a valid covariance `L Lᵀ`. For fixed
//! `(β, L)` each participant's mode `b̂` is found by Newton's method; the
//! outer optimizer is BFGS on `(β0, β1, l11, l21, l22)` with central-difference
//! gradients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::StatsError;
use crate::featureset::{label_table, FeatureTable, Outcome};
use crate::util::{mean, sample_std};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedModelFit {
    pub beta0: f64,
    pub beta1: f64,
    pub se1: f64,
    pub z: f64,
    pub p: f64,
    pub var_u0: f64,
    pub var_u1: f64,
    pub cov_u0u1: f64,
    /// Random-effect modes `(u0, u1)` per participant, sorted by id.
    pub modes: Vec<(String, [f64; 2])>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_rows: usize,
    pub n_participants: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlmmOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub grad_tol: f64,
    pub separation_bound: f64,
    pub min_participants: usize,
    pub min_rows_per_participant: usize,
    /// Pin both random-effect variances at zero and fit only `β0, β1`.
    pub zero_variance: bool,
}

impl Default for GlmmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_tol: 1e-8,
            grad_tol: 1e-6,
            separation_bound: 15.0,
            min_participants: 10,
            min_rows_per_participant: 3,
            zero_variance: false,
        }
    }
}

struct Group {
    id: String,
    x: Vec<f64>,
    y: Vec<f64>,
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Laplace contribution of one participant and its mode `b̂`.
fn group_laplace(g: &Group, th: &[f64; 5]) -> (f64, [f64; 2]) {
    let [b0, b1, l11, l21, l22] = *th;
    let mut b = [0.0f64; 2];
    let h_of = |b: &[f64; 2]| -> f64 {
        let mut s = -0.5 * (b[0] * b[0] + b[1] * b[1]);
        for (&x, &y) in g.x.iter().zip(&g.y) {
            let eta = b0 + b1 * x + (l11 + l21 * x) * b[0] + l22 * x * b[1];
            s += y * eta - softplus(eta);
        }
        s
    };
    let curvature = |b: &[f64; 2]| -> ([f64; 2], [f64; 3]) {
        let mut grad = [-b[0], -b[1]];
        let mut neg_h = [1.0, 0.0, 1.0];
        for (&x, &y) in g.x.iter().zip(&g.y) {
            let c = [l11 + l21 * x, l22 * x];
            let eta = b0 + b1 * x + c[0] * b[0] + c[1] * b[1];
            let p = sigmoid(eta);
            let w = p * (1.0 - p);
            grad[0] += (y - p) * c[0];
            grad[1] += (y - p) * c[1];
            neg_h[0] += w * c[0] * c[0];
            neg_h[1] += w * c[0] * c[1];
            neg_h[2] += w * c[1] * c[1];
        }
        (grad, neg_h)
    };
    let mut h = h_of(&b);
    for _ in 0..60 {
        let (grad, nh) = curvature(&b);
        let det = nh[0] * nh[2] - nh[1] * nh[1];
        let step = [(nh[2] * grad[0] - nh[1] * grad[1]) / det, (nh[0] * grad[1] - nh[1] * grad[0]) / det];
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = [b[0] + t * step[0], b[1] + t * step[1]];
            let hc = h_of(&cand);
            if hc >= h {
                b = cand;
                h = hc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || (t * step[0]).abs().max((t * step[1]).abs()) < 1e-12 {
            break;
        }
    }
    let (_, nh) = curvature(&b);
    let det = nh[0] * nh[2] - nh[1] * nh[1];
    (h - 0.5 * det.ln(), b)
}

fn neg_loglik(groups: &[Group], th: &[f64; 5]) -> f64 {
    -groups.iter().map(|g| group_laplace(g, th).0).sum::<f64>()
}

fn num_grad(groups: &[Group], th: &[f64; 5]) -> [f64; 5] {
    let mut g = [0.0; 5];
    for k in 0..5 {
        let h = 1e-5 * th[k].abs().max(1.0);
        let (mut hi, mut lo) = (*th, *th);
        hi[k] += h;
        lo[k] -= h;
        g[k] = (neg_loglik(groups, &hi) - neg_loglik(groups, &lo)) / (2.0 * h);
    }
    g
}

/// Plain logistic regression of `y` on `(1, x)` by Newton's method.
pub fn logistic_fit(x: &[f64], y: &[u8]) -> Result<(f64, f64), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let mut beta = [0.0f64; 2];
    for _ in 0..100 {
        let (mut g, mut h) = ([0.0; 2], [0.0; 3]);
        for (&xi, &yi) in x.iter().zip(y) {
            let p = sigmoid(beta[0] + beta[1] * xi);
            let w = p * (1.0 - p);
            g[0] += yi as f64 - p;
            g[1] += (yi as f64 - p) * xi;
            h[0] += w;
            h[1] += w * xi;
            h[2] += w * xi * xi;
        }
        let det = h[0] * h[2] - h[1] * h[1];
        if !(det > 0.0) {
            return Err(StatsError::Separation { beta: beta[1].abs().max(beta[0].abs()) });
        }
        let step = [(h[2] * g[0] - h[1] * g[1]) / det, (h[0] * g[1] - h[1] * g[0]) / det];
        beta[0] += step[0];
        beta[1] += step[1];
        if beta[0].abs().max(beta[1].abs()) > 30.0 {
            return Err(StatsError::Separation { beta: beta[1].abs() });
        }
        if step[0].abs().max(step[1].abs()) < 1e-13 {
            break;
        }
    }
    Ok((beta[0], beta[1]))
}

/// Fit `logit P(y = 1) = β0 + β1 x + u0 + u1 x` with `(u0, u1)` per participant.
///
/// Rows are put in a canonical order first, so the result does not depend on
/// the order of the input. Participants with fewer than
/// `opts.min_rows_per_participant` rows are dropped.
pub fn fit_glmm(participants: &[String], x: &[f64], y: &[u8], opts: &GlmmOptions) -> Result<MixedModelFit, StatsError> {
    if participants.len() != x.len() || x.len() != y.len() {
        return Err(StatsError::LengthMismatch(participants.len(), x.len().min(y.len())));
    }
    let mut by_id: BTreeMap<&str, Vec<(f64, u8)>> = BTreeMap::new();
    for ((p, &xi), &yi) in participants.iter().zip(x).zip(y) {
        if !xi.is_finite() {
            return Err(StatsError::DegenerateInput("non-finite predictor".into()));
        }
        by_id.entry(p.as_str()).or_default().push((xi, yi));
    }
    let groups: Vec<Group> = by_id
        .into_iter()
        .filter(|(_, rows)| rows.len() >= opts.min_rows_per_participant)
        .map(|(id, mut rows)| {
            rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            Group {
                id: id.to_string(),
                x: rows.iter().map(|r| r.0).collect(),
                y: rows.iter().map(|r| r.1 as f64).collect(),
            }
        })
        .collect();
    if groups.len() < opts.min_participants {
        return Err(StatsError::InsufficientData(format!(
            "{} participants with at least {} rows",
            groups.len(),
            opts.min_rows_per_participant
        )));
    }
    let all_x: Vec<f64> = groups.iter().flat_map(|g| g.x.iter().copied()).collect();
    let all_y: Vec<u8> = groups.iter().flat_map(|g| g.y.iter().map(|&v| v as u8)).collect();
    if all_y.iter().all(|&v| v == all_y[0]) {
        return Err(StatsError::Separation { beta: f64::INFINITY });
    }
    let (i0, i1) = logistic_fit(&all_x, &all_y)?;
    let bound = opts.separation_bound;
    let separated = |th: &[f64; 5]| th[0].abs() > bound || th[1].abs() > bound;

    let free = if opts.zero_variance { 2 } else { 5 };
    let gradient = |th: &[f64; 5]| {
        let mut g = num_grad(&groups, th);
        g[free..].fill(0.0);
        g
    };
    let mut th = if opts.zero_variance { [0.0; 5] } else { [i0, i1, 0.5, 0.0, 0.5] };
    let mut f = neg_loglik(&groups, &th);
    let mut g = gradient(&th);
    let mut hinv = [[0.0f64; 5]; 5];
    for (k, row) in hinv.iter_mut().enumerate() {
        row[k] = 1.0 / g.iter().map(|v| v.abs()).fold(1.0, f64::max);
    }
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if g.iter().all(|v| v.abs() < opts.grad_tol) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut d = [0.0; 5];
        for i in 0..5 {
            d[i] = -(0..5).map(|j| hinv[i][j] * g[j]).sum::<f64>();
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // Lost descent direction; restart from a scaled identity.
            hinv = [[0.0; 5]; 5];
            let s = 1.0 / g.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for i in 0..5 {
                hinv[i][i] = s;
                d[i] = -s * g[i];
            }
            slope = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..50 {
            let cand: [f64; 5] = std::array::from_fn(|i| th[i] + t * d[i]);
            let fc = neg_loglik(&groups, &cand);
            if fc.is_finite() && fc <= f + 1e-4 * t * slope {
                next = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = next else {
            converged = g.iter().all(|v| v.abs() < opts.grad_tol.sqrt());
            break;
        };
        if separated(&cand) {
            return Err(StatsError::Separation { beta: cand[1].abs().max(cand[0].abs()) });
        }
        let gc = gradient(&cand);
        let s: [f64; 5] = std::array::from_fn(|i| cand[i] - th[i]);
        let yv: [f64; 5] = std::array::from_fn(|i| gc[i] - g[i]);
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            let hy: [f64; 5] = std::array::from_fn(|i| (0..5).map(|j| hinv[i][j] * yv[j]).sum());
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..5 {
                for j in 0..5 {
                    hinv[i][j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        let rel = (f - fc).abs() / f.abs().max(1e-300);
        th = cand;
        f = fc;
        g = gc;
        if rel < opts.rel_tol {
            converged = true;
            break;
        }
    }

    // Standard error of β1 from the β block of the observed information.
    let h = 1e-4;
    let fb = |d0: f64, d1: f64| {
        let mut t = th;
        t[0] += d0;
        t[1] += d1;
        neg_loglik(&groups, &t)
    };
    let f00 = (fb(h, 0.0) - 2.0 * f + fb(-h, 0.0)) / (h * h);
    let f11 = (fb(0.0, h) - 2.0 * f + fb(0.0, -h)) / (h * h);
    let f01 = (fb(h, h) - fb(h, -h) - fb(-h, h) + fb(-h, -h)) / (4.0 * h * h);
    let det = f00 * f11 - f01 * f01;
    let se1 = (f00 / det).sqrt();
    if !(det > 0.0 && f00 > 0.0 && se1.is_finite()) {
        return Err(StatsError::SingularInformation);
    }
    let z = th[1] / se1;
    let p = 2.0 * (1.0 - Normal::standard().cdf(z.abs()));

    let [_, _, l11, l21, l22] = th;
    let modes = groups
        .iter()
        .map(|g| {
            let (_, b) = group_laplace(g, &th);
            (g.id.clone(), [l11 * b[0], l21 * b[0] + l22 * b[1]])
        })
        .collect();
    let fit = MixedModelFit {
        beta0: th[0],
        beta1: th[1],
        se1,
        z,
        p: p.clamp(f64::MIN_POSITIVE, 1.0),
        var_u0: l11 * l11,
        var_u1: l21 * l21 + l22 * l22,
        cov_u0u1: l11 * l21,
        modes,
        log_likelihood: -f,
        converged,
        iterations,
        n_rows: all_x.len(),
        n_participants: groups.len(),
    };
    if converged {
        Ok(fit)
    } else {
        Err(StatsError::NotConverged(Box::new(fit)))
    }
}

/// Screen one table column: centre and scale it sample-wide, label rows with
/// `outcome`, and fit the random intercept and slope model.
pub fn fit_mixed_logit(
    table: &FeatureTable,
    feature: &str,
    outcome: Outcome,
    opts: &GlmmOptions,
) -> Result<MixedModelFit, StatsError> {
    let j = table
        .column(feature)
        .ok_or_else(|| crate::featureset::FeatureError::UnknownFeature(feature.to_string()))?;
    let labels = label_table(table, outcome)?;
    let (mut pids, mut xs, mut ys) = (Vec::new(), Vec::new(), Vec::new());
    for (r, &l) in table.rows.iter().zip(&labels) {
        if let Some(v) = r.values[j].filter(|v| v.is_finite()) {
            pids.push(r.participant_id.clone());
            xs.push(v);
            ys.push(l);
        }
    }
    let (m, s) = (mean(&xs), sample_std(&xs));
    if !(s > 0.0) {
        return Err(StatsError::DegenerateInput(format!("{feature} has no spread")));
    }
    let z: Vec<f64> = xs.iter().map(|v| (v - m) / s).collect();
    fit_glmm(&pids, &z, &ys, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn simulate(seed: u64, n_p: usize, n_r: usize, beta: [f64; 2], sd: [f64; 2]) -> (Vec<String>, Vec<f64>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut p, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
        for j in 0..n_p {
            let u0 = sd[0] * rng.sample::<f64, _>(StandardNormal);
            let u1 = sd[1] * rng.sample::<f64, _>(StandardNormal);
            for _ in 0..n_r {
                let xi: f64 = StandardNormal.sample(&mut rng);
                let eta = beta[0] + u0 + (beta[1] + u1) * xi;
                p.push(format!("P{j:02}"));
                x.push(xi);
                y.push((rng.random::<f64>() < sigmoid(eta)) as u8);
            }
        }
        (p, x, y)
    }

    #[test]
    fn recovers_slope_with_random_intercept() {
        let (p, x, y) = simulate(3, 30, 60, [-0.3, 1.0], [0.5, 0.0]);
        let fit = fit_glmm(&p, &x, &y, &GlmmOptions::default()).unwrap();
        assert!((0.7..1.3).contains(&fit.beta1), "{fit:?}");
        assert!(fit.se1 > 0.0 && fit.p < 1e-6);
        assert_eq!(fit.modes.len(), 30);
    }

    #[test]
    fn flipping_outcome_negates_betas() {
        let (p, x, y) = simulate(5, 15, 30, [0.2, 0.8], [0.6, 0.3]);
        let flipped: Vec<u8> = y.iter().map(|v| 1 - v).collect();
        let a = fit_glmm(&p, &x, &y, &GlmmOptions::default()).unwrap();
        let b = fit_glmm(&p, &x, &flipped, &GlmmOptions::default()).unwrap();
        assert!((a.beta0 + b.beta0).abs() < 1e-6, "{} {}", a.beta0, b.beta0);
        assert!((a.beta1 + b.beta1).abs() < 1e-6);
    }

    #[test]
    fn row_order_does_not_matter() {
        let (mut p, mut x, mut y) = simulate(9, 12, 20, [0.0, 0.5], [0.4, 0.2]);
        let a = fit_glmm(&p, &x, &y, &GlmmOptions::default()).unwrap();
        p.reverse();
        x.reverse();
        y.reverse();
        let b = fit_glmm(&p, &x, &y, &GlmmOptions::default()).unwrap();
        assert!((a.beta0 - b.beta0).abs() < 1e-9 && (a.beta1 - b.beta1).abs() < 1e-9);
    }

    #[test]
    fn constant_outcome_is_separation() {
        let (p, x, _) = simulate(1, 12, 10, [0.0, 0.0], [0.0, 0.0]);
        let y = vec![0u8; x.len()];
        assert!(matches!(fit_glmm(&p, &x, &y, &GlmmOptions::default()), Err(StatsError::Separation { .. })));
    }

    #[test]
    fn optimum_beats_nearby_points() {
        let (p, x, y) = simulate(11, 12, 25, [0.1, 0.7], [0.5, 0.2]);
        let fit = fit_glmm(&p, &x, &y, &GlmmOptions::default()).unwrap();
        let mut by: BTreeMap<&str, Vec<(f64, u8)>> = BTreeMap::new();
        for ((pi, &xi), &yi) in p.iter().zip(&x).zip(&y) {
            by.entry(pi).or_default().push((xi, yi));
        }
        let groups: Vec<Group> = by
            .into_iter()
            .map(|(id, r)| Group { id: id.into(), x: r.iter().map(|v| v.0).collect(), y: r.iter().map(|v| v.1 as f64).collect() })
            .collect();
        let l11 = fit.var_u0.sqrt();
        let l21 = if l11 > 0.0 { fit.cov_u0u1 / l11 } else { 0.0 };
        let l22 = (fit.var_u1 - l21 * l21).max(0.0).sqrt();
        let best = -neg_loglik(&groups, &[fit.beta0, fit.beta1, l11, l21, l22]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let d0 = if rng.random::<bool>() { 1e-3 } else { -1e-3 };
            let d1 = if rng.random::<bool>() { 1e-3 } else { -1e-3 };
            let ll = -neg_loglik(&groups, &[fit.beta0 + d0, fit.beta1 + d1, l11, l21, l22]);
            assert!(best >= ll);
        }
    }
}
