//! Participant-level accuracy against trait and state anxiety.

use serde::{Deserialize, Serialize};

use super::descriptives::analysis_reports;
use crate::error::{Error, Result};
use crate::ingest::{trait_totals, Manifest};
use crate::ml::{CvResult, ModelKind};
use crate::stats::pearson;
use crate::util::{mean, sample_std};

/// Repetitions below which participant accuracies are considered noisy.
pub const MIN_REPETITIONS: usize = 10;

pub const VARIABLES: [&str; 4] = ["accuracy", "sias", "state_mean", "state_sd"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantPoint {
    pub participant: String,
    pub accuracy: f64,
    pub sias: f64,
    pub state_mean: f64,
    pub state_sd: f64,
}

impl ParticipantPoint {
    fn get(&self, var: &str) -> f64 {
        match var {
            "accuracy" => self.accuracy,
            "sias" => self.sias,
            "state_mean" => self.state_mean,
            _ => self.state_sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub x: String,
    pub y: String,
    pub n: usize,
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualReport {
    pub model: ModelKind,
    pub repetitions: usize,
    pub points: Vec<ParticipantPoint>,
    pub correlations: Vec<Correlation>,
    pub note: Option<String>,
}

/// Correlate per-participant held-out accuracy of `model` (default: the
/// best mean balanced accuracy) with SIAS and the mean and spread of state
/// anxiety.
pub fn individual_analysis(cv: &CvResult, manifest: &Manifest, model: Option<ModelKind>) -> Result<IndividualReport> {
    let summary = match model {
        Some(k) => cv.models.iter().find(|m| m.kind == k),
        None => cv.models.iter().fold(None, |best: Option<&crate::ml::ModelSummary>, m| match best {
            Some(b) if b.ba_mean >= m.ba_mean => Some(b),
            _ => Some(m),
        }),
    }
    .ok_or_else(|| Error::EmptyResults("no cross-validated model for the individual analysis".into()))?;
    let mut points = Vec::new();
    for entry in &manifest.participants {
        let Some(&accuracy) = summary.participant_accuracy.get(&entry.id) else { continue };
        let reports: Vec<f64> = analysis_reports(entry).into_iter().map(f64::from).collect();
        points.push(ParticipantPoint {
            participant: entry.id.clone(),
            accuracy,
            sias: trait_totals(&entry.traits)?.sias_total as f64,
            state_mean: mean(&reports),
            state_sd: sample_std(&reports),
        });
    }
    let mut correlations = Vec::new();
    for i in 0..VARIABLES.len() {
        for j in i + 1..VARIABLES.len() {
            let x: Vec<f64> = points.iter().map(|p| p.get(VARIABLES[i])).collect();
            let y: Vec<f64> = points.iter().map(|p| p.get(VARIABLES[j])).collect();
            let mut c = Correlation { x: VARIABLES[i].into(), y: VARIABLES[j].into(), n: x.len(), r: None, p: None, skipped: None };
            match pearson(&x, &y) {
                Ok(t) => {
                    c.r = Some(t.statistic);
                    c.p = Some(t.p);
                }
                Err(e) => c.skipped = Some(e.to_string()),
            }
            correlations.push(c);
        }
    }
    let repetitions = cv.config.repetitions;
    let note = (repetitions < MIN_REPETITIONS)
        .then(|| format!("accuracies averaged over {repetitions} repetitions; at least {MIN_REPETITIONS} recommended"));
    Ok(IndividualReport { model: summary.kind, repetitions, points, correlations, note })
}
