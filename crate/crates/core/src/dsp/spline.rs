use super::DspError;

const DEGREE: usize = 2;

/// C¹ quadratic interpolating B-spline.
///
/// Knots are the end abscissae with multiplicity three plus the midpoints
/// between interior samples, which gives exactly one coefficient per sample.
#[derive(Debug, Clone)]
pub struct QuadraticSpline {
    knots: Vec<f64>,
    coefs: Vec<f64>,
}

impl QuadraticSpline {
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self, DspError> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(DspError::InsufficientPoints { needed: 3, got: n.min(y.len()) });
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || !x.iter().all(|v| v.is_finite()) {
            return Err(DspError::InvalidTimes);
        }
        let mut knots = Vec::with_capacity(n + DEGREE + 1);
        knots.extend([x[0]; DEGREE + 1]);
        knots.extend((1..n - 2).map(|i| 0.5 * (x[i] + x[i + 1])));
        knots.extend([x[n - 1]; DEGREE + 1]);
        debug_assert_eq!(knots.len(), n + DEGREE + 1);

        // Collocation matrix is banded: row i touches columns span-2..=span.
        // Stored with columns i-2..=i+2; Gaussian elimination without pivoting
        // is stable for B-spline collocation.
        const W: usize = 5;
        let mut band = vec![[0.0f64; W]; n];
        let mut rhs = y.to_vec();
        let mut span = DEGREE;
        for (i, &xi) in x.iter().enumerate() {
            span = find_span(&knots, n, xi, span);
            let basis = basis_funs(&knots, span, xi);
            for (k, b) in basis.iter().enumerate() {
                let col = span - DEGREE + k;
                let off = col as isize - i as isize + 2;
                debug_assert!((0..W as isize).contains(&off));
                band[i][off as usize] = *b;
            }
        }
        for r in 0..n {
            let piv = band[r][2];
            for i in r + 1..(r + 3).min(n) {
                let off = r as isize - i as isize + 2;
                if off < 0 {
                    continue;
                }
                let f = band[i][off as usize] / piv;
                if f == 0.0 {
                    continue;
                }
                for c in r..(r + 3).min(n) {
                    let src = c + 2 - r;
                    let dst = (c as isize - i as isize + 2) as usize;
                    band[i][dst] -= f * band[r][src];
                }
                rhs[i] -= f * rhs[r];
            }
        }
        let mut coefs = vec![0.0; n];
        for r in (0..n).rev() {
            let mut acc = rhs[r];
            for c in r + 1..(r + 3).min(n) {
                acc -= band[r][c + 2 - r] * coefs[c];
            }
            coefs[r] = acc / band[r][2];
        }
        Ok(Self { knots, coefs })
    }

    /// Evaluate at ascending abscissae (a monotone sweep reuses the span search).
    pub fn eval_sorted(&self, xs: &[f64]) -> Vec<f64> {
        let n = self.coefs.len();
        let mut span = DEGREE;
        xs.iter()
            .map(|&x| {
                let x = x.clamp(self.knots[0], self.knots[n + DEGREE]);
                span = find_span(&self.knots, n, x, span);
                let b = basis_funs(&self.knots, span, x);
                (0..=DEGREE).map(|k| b[k] * self.coefs[span - DEGREE + k]).sum()
            })
            .collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_sorted(&[x])[0]
    }
}

/// Index `mu` with `knots[mu] <= x < knots[mu+1]`, walking from `start`.
fn find_span(knots: &[f64], n: usize, x: f64, start: usize) -> usize {
    if x >= knots[n] {
        return n - 1;
    }
    let mut mu = start.clamp(DEGREE, n - 1);
    while mu > DEGREE && x < knots[mu] {
        mu -= 1;
    }
    while mu < n - 1 && x >= knots[mu + 1] {
        mu += 1;
    }
    mu
}

/// Cox–de Boor recursion for the three nonzero quadratic basis functions.
fn basis_funs(knots: &[f64], span: usize, x: f64) -> [f64; DEGREE + 1] {
    let mut n = [0.0; DEGREE + 1];
    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=DEGREE {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Resample a uniformly sampled series onto a new uniform grid with the same
/// start time. The new grid stops at the last original sample time.
pub fn spline_resample(series: &[f64], from_rate: f64, to_rate: f64) -> Result<Vec<f64>, DspError> {
    if series.len() < 3 {
        return Err(DspError::InsufficientPoints { needed: 3, got: series.len() });
    }
    if !(from_rate > 0.0 && to_rate > 0.0) {
        return Err(DspError::InvalidSpec("resampling rates must be positive".into()));
    }
    let x: Vec<f64> = (0..series.len()).map(|i| i as f64 / from_rate).collect();
    let spline = QuadraticSpline::fit(&x, series)?;
    let t_last = x[x.len() - 1];
    let m = (t_last * to_rate + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..m).map(|k| (k as f64 / to_rate).min(t_last)).collect();
    Ok(spline.eval_sorted(&grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_stays_constant() {
        let y = spline_resample(&[3.5; 64], 64.0, 100.0).unwrap();
        assert_eq!(y.len(), 99);
        assert!(y.iter().all(|v| (v - 3.5).abs() < 1e-12));
    }

    #[test]
    fn quadratics_are_reproduced() {
        let fs = 64.0;
        let x: Vec<f64> = (0..640).map(|i| {
            let t = i as f64 / fs;
            t * t
        }).collect();
        let y = spline_resample(&x, fs, 100.0).unwrap();
        for (k, v) in y.iter().enumerate() {
            let t = k as f64 / 100.0;
            assert!((v - t * t).abs() < 1e-9, "t={t}: {v}");
        }
    }

    #[test]
    fn slow_sinusoid_error_is_small() {
        let fs = 64.0;
        let x: Vec<f64> = (0..(60.0 * fs) as usize).map(|i| (2.0 * PI * 0.2 * i as f64 / fs).sin()).collect();
        let y = spline_resample(&x, fs, 100.0).unwrap();
        let err = y
            .iter()
            .enumerate()
            .map(|(k, v)| (v - (2.0 * PI * 0.2 * k as f64 / 100.0).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "max error {err}");
    }

    #[test]
    fn too_few_points() {
        assert_eq!(spline_resample(&[1.0, 2.0], 64.0, 100.0), Err(DspError::InsufficientPoints { needed: 3, got: 2 }));
    }

    proptest! {
        #[test]
        fn interpolates_knots_on_irregular_grids(
            steps in prop::collection::vec(0.1f64..2.0, 3..60),
            seed in 0u32..1000,
        ) {
            let mut x = vec![0.0];
            for s in &steps {
                x.push(x[x.len() - 1] + s);
            }
            let y: Vec<f64> = x.iter().enumerate().map(|(i, _)| ((i as u32 * 7919 + seed) % 101) as f64 / 10.0).collect();
            let s = QuadraticSpline::fit(&x, &y).unwrap();
            let back = s.eval_sorted(&x);
            for (a, b) in back.iter().zip(&y) {
                prop_assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn any_quadratic_is_exact(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, n in 3usize..200) {
            let p = |t: f64| a * t * t + b * t + c;
            let xs: Vec<f64> = (0..n).map(|i| p(i as f64 / 64.0)).collect();
            let y = spline_resample(&xs, 64.0, 100.0).unwrap();
            for (k, v) in y.iter().enumerate() {
                prop_assert!((v - p(k as f64 / 100.0)).abs() < 1e-9);
            }
        }
    }
}
