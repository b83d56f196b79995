use std::f64::consts::PI;

use num_complex::Complex64;

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Bandpass,
    Lowpass,
}

/// Butterworth design parameters. `low_hz` is ignored for lowpass designs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub sample_rate: f64,
}

impl FilterSpec {
    pub fn bandpass(order: usize, low_hz: f64, high_hz: f64, sample_rate: f64) -> Self {
        Self { kind: FilterKind::Bandpass, order, low_hz, high_hz, sample_rate }
    }

    pub fn lowpass(order: usize, cutoff_hz: f64, sample_rate: f64) -> Self {
        Self { kind: FilterKind::Lowpass, order, low_hz: 0.0, high_hz: cutoff_hz, sample_rate }
    }

    pub fn validate(&self) -> Result<(), DspError> {
        let nyq = self.sample_rate / 2.0;
        if self.order == 0 {
            return Err(DspError::InvalidSpec("order must be at least 1".into()));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(DspError::InvalidSpec(format!("sample rate {} must be positive", self.sample_rate)));
        }
        if !(self.high_hz > 0.0 && self.high_hz < nyq) {
            return Err(DspError::InvalidSpec(format!(
                "high cutoff {} Hz must lie in (0, {nyq}) Hz",
                self.high_hz
            )));
        }
        if self.kind == FilterKind::Bandpass && !(self.low_hz > 0.0 && self.low_hz < self.high_hz) {
            return Err(DspError::InvalidSpec(format!(
                "low cutoff {} Hz must lie in (0, {}) Hz",
                self.low_hz, self.high_hz
            )));
        }
        Ok(())
    }

    /// Number of poles of the digital design.
    pub fn poles(&self) -> usize {
        match self.kind {
            FilterKind::Lowpass => self.order,
            FilterKind::Bandpass => 2 * self.order,
        }
    }
}

/// One second-order section in direct form II transposed, `a[0] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Sos {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + z_inv * self.b[1] + z2 * self.b[2]) / (self.a[0] + z_inv * self.a[1] + z2 * self.a[2])
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Internal state reached after a long run of unit input.
    fn step_state(&self) -> [f64; 2] {
        let y = self.dc_gain();
        [y - self.b[0], self.b[2] - self.a[2] * y]
    }

    #[inline]
    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + z[0];
            z[0] = b1 * xin - a1 * y + z[1];
            z[1] = b2 * xin - a2 * y;
            *v = y;
        }
    }
}

/// A designed Butterworth filter as cascaded biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    pub spec: FilterSpec,
    pub sections: Vec<Sos>,
}

fn bilinear(s: Complex64, fs2: f64) -> Complex64 {
    (fs2 + s) / (fs2 - s)
}

/// Pair conjugate poles into biquad denominators; real poles are paired
/// with each other, and a lone real pole gets a first-order section.
fn denominators(poles: &[Complex64]) -> Vec<[f64; 3]> {
    const IM_EPS: f64 = 1e-12;
    let mut dens = Vec::new();
    let mut reals = Vec::new();
    for p in poles {
        if p.im > IM_EPS {
            dens.push([1.0, -2.0 * p.re, p.norm_sqr()]);
        } else if p.im.abs() <= IM_EPS {
            reals.push(p.re);
        }
    }
    reals.sort_by(|a, b| a.total_cmp(b));
    for pair in reals.chunks(2) {
        match pair {
            [r1, r2] => dens.push([1.0, -(r1 + r2), r1 * r2]),
            [r] => dens.push([1.0, -r, 0.0]),
            _ => unreachable!(),
        }
    }
    dens
}

impl Butterworth {
    pub fn design(spec: FilterSpec) -> Result<Self, DspError> {
        spec.validate()?;
        let n = spec.order;
        let fs = spec.sample_rate;
        let fs2 = 2.0 * fs;
        let warp = |f: f64| fs2 * (PI * f / fs).tan();
        // unit-cutoff analog prototype poles in the left half plane
        let proto: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, PI * (2 * k + n + 1) as f64 / (2 * n) as f64))
            .collect();

        let mut sections = match spec.kind {
            FilterKind::Lowpass => {
                let wc = warp(spec.high_hz);
                let zpoles: Vec<Complex64> = proto.iter().map(|p| bilinear(p * wc, fs2)).collect();
                denominators(&zpoles)
                    .into_iter()
                    .map(|a| {
                        let b = if a[2] == 0.0 { [1.0, 1.0, 0.0] } else { [1.0, 2.0, 1.0] };
                        Sos { b, a }
                    })
                    .collect::<Vec<_>>()
            }
            FilterKind::Bandpass => {
                let w1 = warp(spec.low_hz);
                let w2 = warp(spec.high_hz);
                let bw = w2 - w1;
                let w0sq = w1 * w2;
                let mut spoles = Vec::with_capacity(2 * n);
                for p in &proto {
                    let pb = p * bw;
                    let disc = (pb * pb - 4.0 * w0sq).sqrt();
                    spoles.push((pb + disc) / 2.0);
                    spoles.push((pb - disc) / 2.0);
                }
                let zpoles: Vec<Complex64> = spoles.iter().map(|s| bilinear(*s, fs2)).collect();
                denominators(&zpoles).into_iter().map(|a| Sos { b: [1.0, 0.0, -1.0], a }).collect()
            }
        };

        let ref_freq = match spec.kind {
            FilterKind::Lowpass => 0.0,
            FilterKind::Bandpass => {
                let w0 = (warp(spec.low_hz) * warp(spec.high_hz)).sqrt();
                (w0 / fs2).atan() * fs / PI
            }
        };
        let mut filt = Butterworth { spec, sections: Vec::new() };
        filt.sections = std::mem::take(&mut sections);
        let g = filt.gain_at(ref_freq);
        if let Some(first) = filt.sections.first_mut() {
            for c in first.b.iter_mut() {
                *c /= g;
            }
        }
        Ok(filt)
    }

    /// Complex frequency response of one forward pass at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.spec.sample_rate;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Magnitude of one forward pass at `freq_hz`.
    pub fn gain_at(&self, freq_hz: f64) -> f64 {
        self.response(freq_hz).norm()
    }

    /// Zero-phase filtering: odd-reflection padding, steady-state initial
    /// conditions, then a forward and a backward pass.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>, DspError> {
        let needed = 3 * self.spec.order;
        if x.len() < needed.max(2) {
            return Err(DspError::SignalTooShort { needed: needed.max(2), got: x.len() });
        }
        let n = x.len();
        let pad = needed.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let zi = self.steady_state();
        self.run_cascade(&mut ext, &zi);
        ext.reverse();
        self.run_cascade(&mut ext, &zi);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }

    /// Per-section states for a unit-step steady state, scaled by the gain of
    /// the sections upstream.
    fn steady_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let z = s.step_state();
                let out = [z[0] * scale, z[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    fn run_cascade(&self, x: &mut [f64], zi: &[[f64; 2]]) {
        let x0 = x[0];
        for (s, z) in self.sections.iter().zip(zi) {
            s.run(x, [z[0] * x0, z[1] * x0]);
        }
    }
}

/// Design and apply a zero-phase Butterworth filter.
pub fn butterworth_filter(signal: &[f64], spec: FilterSpec) -> Result<Vec<f64>, DspError> {
    Butterworth::design(spec)?.filtfilt(signal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Closed-form squared magnitude of the analog prototype after frequency
    /// warping; the forward-backward gain equals it.
    fn analytic_sq_gain(spec: &FilterSpec, f: f64) -> f64 {
        let fs = spec.sample_rate;
        let om = |x: f64| 2.0 * fs * (PI * x / fs).tan();
        let n = spec.order as i32;
        let ratio = match spec.kind {
            FilterKind::Lowpass => om(f) / om(spec.high_hz),
            FilterKind::Bandpass => {
                let (w1, w2) = (om(spec.low_hz), om(spec.high_hz));
                let w = om(f);
                (w * w - w1 * w2) / (w * (w2 - w1))
            }
        };
        1.0 / (1.0 + ratio.powi(2 * n))
    }

    fn sine(freq: f64, fs: f64, secs: f64) -> Vec<f64> {
        (0..(fs * secs) as usize).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    fn steady_amplitude(y: &[f64], skip: usize) -> f64 {
        y[skip..y.len() - skip].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn designed_response_matches_closed_form() {
        for spec in [
            FilterSpec::bandpass(4, 0.5, 8.0, 64.0),
            FilterSpec::bandpass(3, 1.0, 5.0, 50.0),
            FilterSpec::lowpass(4, 3.0, 32.0),
            FilterSpec::lowpass(1, 0.05, 4.0),
            FilterSpec::lowpass(5, 10.0, 100.0),
        ] {
            let f = Butterworth::design(spec).unwrap();
            for k in 1..60 {
                let freq = spec.sample_rate / 2.0 * k as f64 / 61.0;
                let got = f.gain_at(freq).powi(2);
                let want = analytic_sq_gain(&spec, freq);
                assert!((got - want).abs() < 1e-9, "{spec:?} at {freq}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let y = butterworth_filter(&[0.0; 200], FilterSpec::bandpass(4, 0.5, 8.0, 64.0)).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn passband_and_stopband_amplitudes() {
        let spec = FilterSpec::bandpass(4, 0.5, 8.0, 64.0);
        let y = butterworth_filter(&sine(4.0, 64.0, 30.0), spec).unwrap();
        let a = steady_amplitude(&y, 640);
        assert!((0.95..=1.05).contains(&a), "passband amplitude {a}");

        let y = butterworth_filter(&sine(0.05, 64.0, 120.0), spec).unwrap();
        let a = steady_amplitude(&y, 64 * 30);
        assert!(a < 0.1, "stopband amplitude {a}");
    }

    #[test]
    fn lowpass_passes_constant() {
        let y = butterworth_filter(&[2.5; 100], FilterSpec::lowpass(4, 3.0, 32.0)).unwrap();
        assert!(y.iter().all(|v| (v - 2.5).abs() < 1e-9));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            butterworth_filter(&[1.0; 5], FilterSpec::bandpass(4, 0.5, 8.0, 64.0)),
            Err(DspError::SignalTooShort { .. })
        ));
        assert!(matches!(
            butterworth_filter(&[1.0; 50], FilterSpec::lowpass(4, 3.0, 4.0)),
            Err(DspError::InvalidSpec(_))
        ));
        assert!(matches!(
            butterworth_filter(&[1.0; 50], FilterSpec::bandpass(4, 8.0, 0.5, 64.0)),
            Err(DspError::InvalidSpec(_))
        ));
    }

    #[test]
    fn zero_phase_lag() {
        let spec = FilterSpec::bandpass(4, 0.5, 8.0, 64.0);
        let x = sine(2.0, 64.0, 20.0);
        let y = butterworth_filter(&x, spec).unwrap();
        let core = 200..x.len() - 200;
        let xc = |lag: i64| -> f64 {
            core.clone().map(|i| x[i] * y[(i as i64 + lag) as usize]).sum::<f64>()
        };
        let best = (-16i64..=16).max_by(|a, b| xc(*a).total_cmp(&xc(*b))).unwrap();
        assert_eq!(best, 0);
    }

    proptest! {
        #[test]
        fn filtering_is_linear(
            xs in prop::collection::vec(-10.0f64..10.0, 64..256),
            a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000,
        ) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, v)| ((i as u64 * 31 + seed) % 17) as f64 - v).collect();
            let spec = FilterSpec::bandpass(4, 0.5, 8.0, 64.0);
            let combo: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
            let lhs = butterworth_filter(&combo, spec).unwrap();
            let fx = butterworth_filter(&xs, spec).unwrap();
            let fy = butterworth_filter(&ys, spec).unwrap();
            let scale = lhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for i in 0..lhs.len() {
                let rhs = a * fx[i] + b * fy[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-9 * scale);
            }
        }
    }
}
