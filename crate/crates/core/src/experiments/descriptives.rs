//! Distribution of state-anxiety self-reports across the cohort.

use serde::{Deserialize, Serialize};

use crate::ingest::{Manifest, ParticipantEntry, Phase};
use crate::util::{mean, quantile, sample_std};

/// Participants whose reports vary less than this are flagged.
pub const LOW_VARIABILITY_SD: f64 = 0.5;

/// Reports entering the analyses: social experiences, non-baseline phases,
/// in session order.
pub fn analysis_reports(entry: &ParticipantEntry) -> Vec<u8> {
    entry
        .segments
        .iter()
        .filter(|s| s.experience.is_social() && s.phase != Phase::Baseline)
        .filter_map(|s| s.self_report)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantDescriptive {
    pub participant: String,
    pub reports: Vec<u8>,
    /// Reports minus the participant's mean report.
    pub adjusted: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub low_variability: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveReport {
    pub n_participants: usize,
    pub n_reports: usize,
    /// Count of raw reports per score 1..=5.
    pub histogram: [usize; 5],
    /// Histogram of within-person adjusted scores as `(value, count)`.
    pub adjusted_histogram: Vec<(f64, usize)>,
    pub participants: Vec<ParticipantDescriptive>,
    pub low_variability: Vec<String>,
    /// Share of participants who used each score at least once.
    pub reported_at_least_once: [f64; 5],
    /// Share of participants who reported a score of at least `s` at least
    /// once, for `s = 1..=5`.
    pub cumulative: [f64; 5],
}

pub fn cohort_descriptives(manifest: &Manifest) -> DescriptiveReport {
    let mut histogram = [0usize; 5];
    let mut participants = Vec::new();
    let mut adjusted_all: Vec<f64> = Vec::new();
    let mut once = [0usize; 5];
    let mut at_least = [0usize; 5];
    for entry in &manifest.participants {
        let reports = analysis_reports(entry);
        if reports.is_empty() {
            continue;
        }
        let vals: Vec<f64> = reports.iter().map(|&r| r as f64).collect();
        let m = mean(&vals);
        let sd = sample_std(&vals);
        let adjusted: Vec<f64> = vals.iter().map(|v| v - m).collect();
        let mut used = [false; 5];
        for &r in &reports {
            histogram[r as usize - 1] += 1;
            used[r as usize - 1] = true;
        }
        let top = reports.iter().copied().max().unwrap_or(1) as usize;
        for s in 0..5 {
            once[s] += used[s] as usize;
            at_least[s] += (top > s) as usize;
        }
        adjusted_all.extend(&adjusted);
        participants.push(ParticipantDescriptive {
            participant: entry.id.clone(),
            reports,
            adjusted,
            mean: m,
            sd,
            median: quantile(&vals, 0.5),
            q1: quantile(&vals, 0.25),
            q3: quantile(&vals, 0.75),
            low_variability: sd < LOW_VARIABILITY_SD,
        });
    }
    let n = participants.len();
    let share = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    DescriptiveReport {
        n_participants: n,
        n_reports: histogram.iter().sum(),
        histogram,
        adjusted_histogram: value_counts(&adjusted_all),
        low_variability: participants.iter().filter(|p| p.low_variability).map(|p| p.participant.clone()).collect(),
        participants,
        reported_at_least_once: once.map(share),
        cumulative: at_least.map(share),
    }
}

/// Distinct values (rounded to 1e-9) with their counts, ascending.
fn value_counts(xs: &[f64]) -> Vec<(f64, usize)> {
    let mut keys: Vec<i64> = xs.iter().map(|x| (x * 1e9).round() as i64).collect();
    keys.sort_unstable();
    let mut out: Vec<(f64, usize)> = Vec::new();
    for k in keys {
        match out.last_mut() {
            Some((v, c)) if (*v * 1e9).round() as i64 == k => *c += 1,
            _ => out.push((k as f64 / 1e9, 1)),
        }
    }
    out
}
