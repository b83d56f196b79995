//! Accelerometer and skin-temperature summaries. Both channels are used as
//! recorded, without filtering.

use serde::Serialize;
use thiserror::Error;

use crate::util::{mean, sample_std};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("empty signal")]
    EmptySignal,
    #[error("recording has the wrong channel shape")]
    WrongChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccFeatures {
    pub x_mean: f64,
    pub x_std: f64,
    pub y_mean: f64,
    pub y_std: f64,
    pub z_mean: f64,
    pub z_std: f64,
    pub mag_mean: f64,
    pub mag_std: f64,
}

pub const ACC_FEATURE_NAMES: [&str; 8] =
    ["ACC_X_Mean", "ACC_X_Std", "ACC_Y_Mean", "ACC_Y_Std", "ACC_Z_Mean", "ACC_Z_Std", "ACC_Mag_Mean", "ACC_Mag_Std"];

impl AccFeatures {
    pub fn values(&self) -> [f64; 8] {
        [self.x_mean, self.x_std, self.y_mean, self.y_std, self.z_mean, self.z_std, self.mag_mean, self.mag_std]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TempFeatures {
    pub mean: f64,
    pub std: f64,
}

pub const TEMP_FEATURE_NAMES: [&str; 2] = ["TEMP_Mean", "TEMP_Std"];

impl TempFeatures {
    pub fn values(&self) -> [f64; 2] {
        [self.mean, self.std]
    }
}

/// Per-axis and magnitude mean / sample standard deviation, in g.
pub fn acc_features(acc: &[[f64; 3]]) -> Result<AccFeatures, MotionError> {
    if acc.is_empty() {
        return Err(MotionError::EmptySignal);
    }
    let axis = |k: usize| acc.iter().map(|v| v[k]).collect::<Vec<_>>();
    let (x, y, z) = (axis(0), axis(1), axis(2));
    let mag: Vec<f64> = acc.iter().map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()).collect();
    Ok(AccFeatures {
        x_mean: mean(&x),
        x_std: sample_std(&x),
        y_mean: mean(&y),
        y_std: sample_std(&y),
        z_mean: mean(&z),
        z_std: sample_std(&z),
        mag_mean: mean(&mag),
        mag_std: sample_std(&mag),
    })
}

pub fn temp_features(temp: &[f64]) -> Result<TempFeatures, MotionError> {
    if temp.is_empty() {
        return Err(MotionError::EmptySignal);
    }
    Ok(TempFeatures { mean: mean(temp), std: sample_std(temp) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn at_rest() {
        let f = acc_features(&[[0.0, 0.0, 1.0]; 50]).unwrap();
        assert_eq!(f.z_mean, 1.0);
        assert_eq!(f.mag_mean, 1.0);
        assert_eq!((f.x_std, f.y_std, f.z_std, f.mag_std), (0.0, 0.0, 0.0, 0.0));
        let a = acc_features(&[[1.0, 0.0, 0.0]; 10]).unwrap();
        let b = acc_features(&[[0.0, 1.0, 0.0]; 10]).unwrap();
        assert_eq!((a.mag_mean, a.mag_std), (b.mag_mean, b.mag_std));
    }

    #[test]
    fn temperature() {
        let f = temp_features(&[33.0; 8]).unwrap();
        assert_eq!((f.mean, f.std), (33.0, 0.0));
        let f = temp_features(&[32.0, 34.0]).unwrap();
        assert_eq!(f.mean, 33.0);
        assert!((f.std - 2f64.sqrt()).abs() < 1e-15);
        let shifted = temp_features(&[33.0, 35.0]).unwrap();
        assert_eq!(shifted.mean, 34.0);
        assert!((shifted.std - f.std).abs() < 1e-15);
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(acc_features(&[]), Err(MotionError::EmptySignal));
        assert_eq!(temp_features(&[]), Err(MotionError::EmptySignal));
    }

    fn brute(acc: &[[f64; 3]]) -> [f64; 8] {
        let n = acc.len() as f64;
        let mut out = [0.0; 8];
        let col = |k: usize| -> Vec<f64> {
            if k < 3 {
                acc.iter().map(|v| v[k]).collect()
            } else {
                acc.iter().map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt()).collect()
            }
        };
        for k in 0..4 {
            let c = col(k);
            let m = c.iter().sum::<f64>() / n;
            let ss = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
            out[2 * k] = m;
            out[2 * k + 1] = (ss / (n - 1.0)).sqrt();
        }
        out
    }

    proptest! {
        #[test]
        fn matches_brute_force(acc in prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 100)) {
            let got = acc_features(&acc).unwrap().values();
            for (g, w) in got.iter().zip(brute(&acc)) {
                prop_assert!((g - w).abs() <= 1e-12);
            }
        }

        #[test]
        fn magnitude_is_rotation_invariant(
            acc in prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), 2..60),
            yaw in 0.0f64..6.3, pitch in 0.0f64..6.3, roll in 0.0f64..6.3,
        ) {
            let (cy, sy) = (yaw.cos(), yaw.sin());
            let (cp, sp) = (pitch.cos(), pitch.sin());
            let (cr, sr) = (roll.cos(), roll.sin());
            let r = [
                [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
                [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
                [-sp, cp * sr, cp * cr],
            ];
            let rotated: Vec<[f64; 3]> = acc
                .iter()
                .map(|v| std::array::from_fn(|i| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2]))
                .collect();
            let (a, b) = (acc_features(&acc).unwrap(), acc_features(&rotated).unwrap());
            prop_assert!((a.mag_mean - b.mag_mean).abs() < 1e-9);
            prop_assert!((a.mag_std - b.mag_std).abs() < 1e-9);
        }
    }
}
