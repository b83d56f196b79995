//! One mixed-effects logistic regression per biobehavioral feature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::featureset::{clip_outliers, standardize_per_person, FeatureTable, Outcome, Sensor, WindowMode};
use crate::ml::StandardizeMode;
use crate::stats::{bh_adjust_grouped, fit_mixed_logit, GlmmOptions, StatsError};

/// Raw p below which a feature enters the filtered table.
pub const SCREEN_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenRow {
    pub feature: String,
    pub sensor: Sensor,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    pub p: Option<f64>,
    /// Benjamini–Hochberg adjusted within the sensor.
    pub adjusted_p: Option<f64>,
    pub n_rows: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenReport {
    pub outcome: Outcome,
    pub window: WindowMode,
    pub standardize: StandardizeMode,
    pub n_rows: usize,
    pub n_participants: usize,
    pub rows: Vec<ScreenRow>,
}

impl ScreenReport {
    pub fn significant(&self) -> Vec<&ScreenRow> {
        self.rows.iter().filter(|r| r.p.is_some_and(|p| p < SCREEN_ALPHA)).collect()
    }
}

/// Table as the screen sees it: rows usable for `outcome`, optionally
/// standardized within person, then winsorized.
pub fn screen_table(table: &FeatureTable, outcome: Outcome, standardize: StandardizeMode) -> FeatureTable {
    let mut t = if outcome == Outcome::AboveBaseline {
        table.filter_rows(|r| r.baseline_self_report.is_some())
    } else {
        table.clone()
    };
    if standardize == StandardizeMode::Person {
        t = standardize_per_person(&t);
    }
    clip_outliers(&t)
}

/// Fit every biobehavioral feature of an already prepared table. Fit
/// failures are recorded on their row.
pub fn per_feature_screen(
    table: &FeatureTable,
    outcome: Outcome,
    window: WindowMode,
    standardize: StandardizeMode,
    opts: &GlmmOptions,
) -> ScreenReport {
    let cols = table.biobehavioral_columns();
    let mut rows: Vec<ScreenRow> = cols
        .par_iter()
        .map(|&j| {
            let info = &table.schema[j];
            let mut row = ScreenRow {
                feature: info.name.clone(),
                sensor: info.sensor,
                estimate: None,
                std_error: None,
                z: None,
                p: None,
                adjusted_p: None,
                n_rows: table.rows.iter().filter(|r| r.values[j].is_some_and(f64::is_finite)).count(),
                error: None,
            };
            let fit = match fit_mixed_logit(table, &info.name, outcome, opts) {
                Ok(f) => Some(f),
                Err(StatsError::NotConverged(f)) => {
                    row.error = Some("optimizer did not converge".into());
                    Some(*f)
                }
                Err(e) => {
                    row.error = Some(e.to_string());
                    None
                }
            };
            if let Some(f) = fit {
                row.estimate = Some(f.beta1);
                row.std_error = Some(f.se1);
                row.z = Some(f.z);
                row.p = Some(f.p);
            }
            row
        })
        .collect();
    let tested: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].p.is_some()).collect();
    let ps: Vec<f64> = tested.iter().map(|&i| rows[i].p.unwrap()).collect();
    let groups: Vec<Sensor> = tested.iter().map(|&i| rows[i].sensor).collect();
    for (&i, a) in tested.iter().zip(bh_adjust_grouped(&ps, &groups)) {
        rows[i].adjusted_p = Some(a);
    }
    ScreenReport {
        outcome,
        window,
        standardize,
        n_rows: table.rows.len(),
        n_participants: table.participants().len(),
        rows,
    }
}
