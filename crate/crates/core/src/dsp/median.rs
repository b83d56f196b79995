use super::DspError;

fn median_of_sorted(w: &[f64]) -> f64 {
    let n = w.len();
    if n % 2 == 1 {
        w[n / 2]
    } else {
        0.5 * (w[n / 2 - 1] + w[n / 2])
    }
}

fn insert_sorted(buf: &mut Vec<f64>, v: f64) {
    let pos = buf.partition_point(|x| x.total_cmp(&v).is_lt());
    buf.insert(pos, v);
}

fn remove_sorted(buf: &mut Vec<f64>, v: f64) {
    let pos = buf.partition_point(|x| x.total_cmp(&v).is_lt());
    debug_assert!(buf[pos].total_cmp(&v).is_eq());
    buf.remove(pos);
}

/// Sliding median over a centered window of `round(window_seconds * rate)`
/// samples. Near the ends the window is clipped to the available samples.
///
/// For an even window length `w` the window at `i` covers
/// `[i - w/2, i + w/2 - 1]`.
pub fn median_filter(series: &[f64], window_seconds: f64, rate: f64) -> Result<Vec<f64>, DspError> {
    if series.is_empty() {
        return Err(DspError::EmptySignal);
    }
    let w = (window_seconds * rate).round();
    if !(w >= 3.0) || !w.is_finite() {
        return Err(DspError::InvalidSpec(format!(
            "median window of {window_seconds} s at {rate} Hz spans fewer than 3 samples"
        )));
    }
    let w = w as usize;
    let before = w / 2;
    let after = w - 1 - before;
    let n = series.len();

    let mut buf: Vec<f64> = Vec::with_capacity(w);
    let mut hi = 0usize; // exclusive end of the samples currently in `buf`
    let mut lo = 0usize;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let want_hi = (i + after + 1).min(n);
        let want_lo = i.saturating_sub(before);
        while hi < want_hi {
            insert_sorted(&mut buf, series[hi]);
            hi += 1;
        }
        while lo < want_lo {
            remove_sorted(&mut buf, series[lo]);
            lo += 1;
        }
        out.push(median_of_sorted(&buf));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(series: &[f64], w: usize) -> Vec<f64> {
        let before = w / 2;
        let after = w - 1 - before;
        (0..series.len())
            .map(|i| {
                let lo = i.saturating_sub(before);
                let hi = (i + after).min(series.len() - 1);
                let mut v = series[lo..=hi].to_vec();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let m = v.len();
                if m % 2 == 1 {
                    v[m / 2]
                } else {
                    (v[m / 2 - 1] + v[m / 2]) / 2.0
                }
            })
            .collect()
    }

    #[test]
    fn constant_series_unchanged() {
        let x = vec![4.2; 30];
        assert_eq!(median_filter(&x, 5.0, 1.0).unwrap(), x);
    }

    #[test]
    fn spike_is_removed() {
        let y = median_filter(&[1.0, 1.0, 9.0, 1.0, 1.0], 5.0, 1.0).unwrap();
        assert_eq!(y[2], 1.0);
    }

    #[test]
    fn monotone_interior_unchanged() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64).powf(1.3)).collect();
        let y = median_filter(&x, 7.0, 1.0).unwrap();
        assert_eq!(&y[3..47], &x[3..47]);
    }

    #[test]
    fn errors() {
        assert_eq!(median_filter(&[], 5.0, 64.0), Err(DspError::EmptySignal));
        assert!(matches!(median_filter(&[1.0; 10], 1.0, 2.0), Err(DspError::InvalidSpec(_))));
    }

    // A width-3 median pass is not idempotent in general: the alternating
    // sequence below flips its interior on every pass. Idempotence holds on
    // "root" signals, which are reached after repeated passes.
    #[test]
    fn width_three_counterexample_to_idempotence() {
        let x = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let once = median_filter(&x, 3.0, 1.0).unwrap();
        let twice = median_filter(&once, 3.0, 1.0).unwrap();
        assert_ne!(once, twice);
    }

    proptest! {
        #[test]
        fn matches_brute_force(xs in prop::collection::vec(-100.0f64..100.0, 1..200), w in 3usize..40) {
            prop_assert_eq!(median_filter(&xs, w as f64, 1.0).unwrap(), brute(&xs, w));
        }

        #[test]
        fn width_three_idempotent_on_roots(xs in prop::collection::vec(-5i32..5, 3..80)) {
            let mut root: Vec<f64> = xs.iter().map(|&v| v as f64).collect();
            let mut converged = false;
            for _ in 0..500 {
                let next = median_filter(&root, 3.0, 1.0).unwrap();
                if next == root {
                    converged = true;
                    break;
                }
                root = next;
            }
            prop_assume!(converged);
            prop_assert_eq!(median_filter(&root, 3.0, 1.0).unwrap(), root);
        }
    }
}
