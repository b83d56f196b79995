//! Paired comparisons of state anxiety across social contexts.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::{code_context, Experience, Manifest, Phase};
use crate::stats::{bh_adjust, wilcoxon_signed_rank};
use crate::util::{mean, quantile};

/// Pairs with fewer participants are skipped.
pub const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Experience,
    Phase,
    GroupSize,
    Evaluation,
}

impl Grouping {
    pub const ALL: [Grouping; 4] = [Grouping::Experience, Grouping::Phase, Grouping::GroupSize, Grouping::Evaluation];

    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::Experience => "experience",
            Grouping::Phase => "phase",
            Grouping::GroupSize => "group_size",
            Grouping::Evaluation => "evaluation",
        }
    }

    /// Context labels in display order.
    pub fn contexts(self) -> Vec<&'static str> {
        match self {
            Grouping::Experience => Experience::ALL.iter().map(|e| e.as_str()).collect(),
            Grouping::Phase => Phase::ALL.iter().map(|p| p.as_str()).collect(),
            Grouping::GroupSize => vec!["dyad", "group"],
            Grouping::Evaluation => vec!["non_evaluative", "evaluative"],
        }
    }

    /// Context a report belongs to, if it enters this grouping.
    fn context_of(self, exp: Experience, phase: Phase) -> Option<&'static str> {
        match self {
            Grouping::Experience => (phase != Phase::Baseline).then(|| exp.as_str()),
            Grouping::Phase => exp.is_social().then(|| phase.as_str()),
            Grouping::GroupSize | Grouping::Evaluation => {
                let c = code_context(exp, phase).ok()?;
                let code = if self == Grouping::GroupSize { c.group_size_code } else { c.eval_code };
                Some(self.contexts()[code as usize])
            }
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub grouping: Grouping,
    pub a: String,
    pub b: String,
    pub n_pairs: usize,
    pub mean_a: Option<f64>,
    pub mean_b: Option<f64>,
    pub statistic: Option<f64>,
    pub p: Option<f64>,
    /// Benjamini–Hochberg adjusted within the grouping.
    pub adjusted_p: Option<f64>,
    pub skipped: Option<String>,
}

/// Quartile summary of participant means in one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSummary {
    pub grouping: Grouping,
    pub context: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    /// `(participant, mean report)` pairs.
    pub values: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub comparisons: Vec<Comparison>,
    pub summaries: Vec<ContextSummary>,
}

/// Per-participant mean report in each context of a grouping.
pub fn participant_context_means(manifest: &Manifest, grouping: Grouping) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut acc: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for entry in &manifest.participants {
        for s in &entry.segments {
            let (Some(r), Some(ctx)) = (s.self_report, grouping.context_of(s.experience, s.phase)) else { continue };
            acc.entry(ctx.to_string()).or_default().entry(entry.id.clone()).or_default().push(r as f64);
        }
    }
    acc.into_iter().map(|(c, m)| (c, m.into_iter().map(|(p, v)| (p, mean(&v))).collect())).collect()
}

pub fn compare_grouping(manifest: &Manifest, grouping: Grouping) -> (Vec<Comparison>, Vec<ContextSummary>) {
    let means = participant_context_means(manifest, grouping);
    let contexts = grouping.contexts();
    let empty = BTreeMap::new();
    let mut summaries = Vec::new();
    for &c in &contexts {
        let m = means.get(c).unwrap_or(&empty);
        if m.is_empty() {
            continue;
        }
        let v: Vec<f64> = m.values().copied().collect();
        summaries.push(ContextSummary {
            grouping,
            context: c.to_string(),
            n: v.len(),
            min: quantile(&v, 0.0),
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: quantile(&v, 1.0),
            mean: mean(&v),
            values: m.iter().map(|(p, &x)| (p.clone(), x)).collect(),
        });
    }
    let mut out = Vec::new();
    for i in 0..contexts.len() {
        for j in i + 1..contexts.len() {
            let (ma, mb) = (means.get(contexts[i]).unwrap_or(&empty), means.get(contexts[j]).unwrap_or(&empty));
            let (xa, xb): (Vec<f64>, Vec<f64>) =
                ma.iter().filter_map(|(p, &a)| mb.get(p).map(|&b| (a, b))).unzip();
            let mut c = Comparison {
                grouping,
                a: contexts[i].to_string(),
                b: contexts[j].to_string(),
                n_pairs: xa.len(),
                mean_a: (!xa.is_empty()).then(|| mean(&xa)),
                mean_b: (!xb.is_empty()).then(|| mean(&xb)),
                statistic: None,
                p: None,
                adjusted_p: None,
                skipped: None,
            };
            if xa.len() < MIN_PAIRS {
                c.skipped = Some(format!("{} paired participants; need {MIN_PAIRS}", xa.len()));
            } else {
                match wilcoxon_signed_rank(&xa, &xb) {
                    Ok(t) => {
                        c.statistic = Some(t.statistic);
                        c.p = Some(t.p);
                    }
                    Err(e) => c.skipped = Some(e.to_string()),
                }
            }
            out.push(c);
        }
    }
    let tested: Vec<usize> = (0..out.len()).filter(|&i| out[i].p.is_some()).collect();
    let adj = bh_adjust(&tested.iter().map(|&i| out[i].p.unwrap()).collect::<Vec<_>>());
    for (&i, a) in tested.iter().zip(adj) {
        out[i].adjusted_p = Some(a);
    }
    (out, summaries)
}

/// All pairwise comparisons within each of the four groupings.
pub fn context_comparisons(manifest: &Manifest) -> ComparisonReport {
    let mut comparisons = Vec::new();
    let mut summaries = Vec::new();
    for g in Grouping::ALL {
        let (c, s) = compare_grouping(manifest, g);
        comparisons.extend(c);
        summaries.extend(s);
    }
    ComparisonReport { comparisons, summaries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::descriptives::tests::entry;

    #[test]
    fn pair_counts_per_grouping() {
        let m = Manifest { participants: (0..6).map(|i| entry(&format!("P{i}"), &[1 + (i % 5) as u8, 3])).collect() };
        let r = context_comparisons(&m);
        let count = |g| r.comparisons.iter().filter(|c| c.grouping == g).count();
        assert_eq!((count(Grouping::Experience), count(Grouping::Phase)), (10, 6));
        assert_eq!((count(Grouping::GroupSize), count(Grouping::Evaluation)), (1, 1));
    }

    #[test]
    fn single_participant_skips_everything() {
        let m = Manifest { participants: vec![entry("A", &[1, 4, 2])] };
        let r = context_comparisons(&m);
        assert!(r.comparisons.iter().all(|c| c.skipped.is_some() && c.p.is_none()));
    }
}
