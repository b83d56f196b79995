use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::table::{FeatureRow, FeatureTable, FlagKind, TableFlag};
use super::FeatureError;
use crate::util::{mean, quantile_sorted, sample_std};

/// Within-person z-scoring of the biobehavioral columns.
///
/// Trait and context columns are constant or near-constant within a person
/// and pass through untouched.
pub fn standardize_per_person(table: &FeatureTable) -> FeatureTable {
    let mut out = table.clone();
    let cols = table.biobehavioral_columns();
    for pid in table.participants() {
        let idx: Vec<usize> = table.rows_of(&pid).map(|(i, _)| i).collect();
        for &j in &cols {
            let vals: Vec<f64> = idx.iter().filter_map(|&i| table.rows[i].values[j]).collect();
            let flag = |kind| TableFlag { participant_id: pid.clone(), feature: table.schema[j].name.clone(), kind };
            if vals.len() < 2 {
                if !vals.is_empty() {
                    out.flags.push(flag(FlagKind::TooFewRows));
                }
                for &i in &idx {
                    out.rows[i].values[j] = None;
                }
                continue;
            }
            let (m, s) = (mean(&vals), sample_std(&vals));
            let degenerate = !(s > 1e-12 * m.abs().max(1.0));
            if degenerate {
                out.flags.push(flag(FlagKind::ZeroVariance));
            }
            for &i in &idx {
                if let Some(v) = table.rows[i].values[j] {
                    out.rows[i].values[j] = Some(if degenerate { 0.0 } else { (v - m) / s });
                }
            }
        }
    }
    out
}

/// Tukey fences per column, `None` where a column has no observed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fences {
    pub columns: Vec<usize>,
    pub bounds: Vec<Option<(f64, f64)>>,
}

impl Fences {
    pub const K: f64 = 1.5;

    /// Fit fences on the given columns over every row of `table`.
    pub fn fit(table: &FeatureTable, columns: &[usize]) -> Self {
        let bounds = columns
            .iter()
            .map(|&j| {
                let mut v: Vec<f64> = table.rows.iter().filter_map(|r| r.values[j]).collect();
                if v.is_empty() {
                    return None;
                }
                v.sort_by(f64::total_cmp);
                let (q1, q3) = (quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.75));
                let iqr = q3 - q1;
                Some((q1 - Self::K * iqr, q3 + Self::K * iqr))
            })
            .collect();
        Self { columns: columns.to_vec(), bounds }
    }

    pub fn apply(&self, table: &FeatureTable) -> FeatureTable {
        let mut out = table.clone();
        for row in &mut out.rows {
            self.apply_row(row);
        }
        out
    }

    pub fn apply_row(&self, row: &mut FeatureRow) {
        for (&j, b) in self.columns.iter().zip(&self.bounds) {
            if let (Some((lo, hi)), Some(v)) = (b, row.values[j].as_mut()) {
                *v = v.clamp(*lo, *hi);
            }
        }
    }
}

/// Sample-wide winsorization of the biobehavioral columns at the Tukey fences.
pub fn clip_outliers(table: &FeatureTable) -> FeatureTable {
    Fences::fit(table, &table.biobehavioral_columns()).apply(table)
}

/// Binary operationalizations of the 1..5 state-anxiety self-report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    #[default]
    RawGt3,
    ExtremeEq5,
    #[serde(rename = "within_person")]
    WithinPersonGt0,
    AboveBaseline,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::RawGt3, Outcome::ExtremeEq5, Outcome::WithinPersonGt0, Outcome::AboveBaseline];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::RawGt3 => "raw_gt3",
            Outcome::ExtremeEq5 => "extreme_eq5",
            Outcome::WithinPersonGt0 => "within_person",
            Outcome::AboveBaseline => "above_baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.as_str() == s)
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::RawGt3 => "Anxious (Score > 3)",
            Outcome::ExtremeEq5 => "Extremely Anxious (Score = 5)",
            Outcome::WithinPersonGt0 => "Above Personal Mean",
            Outcome::AboveBaseline => "Above Baseline",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Label one row given all rows belonging to the same participant.
pub fn label_outcome(row: &FeatureRow, participant_rows: &[&FeatureRow], outcome: Outcome) -> Result<u8, FeatureError> {
    let r = row.self_report;
    let v = match outcome {
        Outcome::RawGt3 => r > 3,
        Outcome::ExtremeEq5 => r == 5,
        Outcome::WithinPersonGt0 => {
            if participant_rows.is_empty() {
                return Err(FeatureError::MissingReference { outcome: outcome.as_str(), row: 0 });
            }
            let m = participant_rows.iter().map(|p| p.self_report as f64).sum::<f64>() / participant_rows.len() as f64;
            r as f64 > m
        }
        Outcome::AboveBaseline => match row.baseline_self_report {
            Some(b) => r > b,
            None => return Err(FeatureError::MissingReference { outcome: outcome.as_str(), row: 0 }),
        },
    };
    Ok(v as u8)
}

/// Labels for every row of the table, in row order.
pub fn label_table(table: &FeatureTable, outcome: Outcome) -> Result<Vec<u8>, FeatureError> {
    let mut groups: BTreeMap<&str, Vec<&FeatureRow>> = BTreeMap::new();
    for r in &table.rows {
        groups.entry(r.participant_id.as_str()).or_default().push(r);
    }
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            label_outcome(r, &groups[r.participant_id.as_str()], outcome).map_err(|e| match e {
                FeatureError::MissingReference { outcome, .. } => FeatureError::MissingReference { outcome, row: i },
                e => e,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featureset::schema::{FeatureInfo, Sensor};
    use crate::ingest::{Experience, Phase};
    use proptest::prelude::*;

    fn schema(n: usize) -> Vec<FeatureInfo> {
        (0..n)
            .map(|j| FeatureInfo {
                name: format!("F{j}"),
                sensor: Sensor::Eda,
                domain: "test".into(),
                units: "1".into(),
                nullable: true,
            })
            .collect()
    }

    fn row(pid: &str, report: u8, values: Vec<Option<f64>>) -> FeatureRow {
        FeatureRow {
            participant_id: pid.into(),
            experience: Experience::GroupEval,
            phase: Phase::Anticipatory,
            self_report: report,
            baseline_self_report: Some(3),
            values,
        }
    }

    fn table(cols: Vec<Vec<f64>>, pids: &[&str]) -> FeatureTable {
        let n = cols[0].len();
        let mut t = FeatureTable::new(schema(cols.len()));
        for i in 0..n {
            t.rows.push(row(pids[i % pids.len()], 1 + (i % 5) as u8, cols.iter().map(|c| Some(c[i])).collect()));
        }
        t
    }

    #[test]
    fn tukey_clip_hand_case() {
        let mut v: Vec<f64> = (1..=9).map(f64::from).collect();
        v.push(100.0);
        let t = clip_outliers(&table(vec![v], &["A"]));
        // Q1 = 3.25, Q3 = 7.75, IQR = 4.5
        assert_eq!(t.rows[9].values[0], Some(7.75 + 1.5 * 4.5));
        for i in 0..9 {
            assert_eq!(t.rows[i].values[0], Some((i + 1) as f64));
        }
    }

    #[test]
    fn clip_identity_and_constant() {
        let t = table(vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0; 4]], &["A"]);
        assert_eq!(clip_outliers(&t), t);
    }

    #[test]
    fn standardize_moments_and_flags() {
        let t = table(
            vec![vec![1.0, 10.0, 2.0, 20.0, 4.0, 40.0], vec![7.0, 1.0, 7.0, 2.0, 7.0, 3.0]],
            &["A", "B"],
        );
        let s = standardize_per_person(&t);
        for pid in ["A", "B"] {
            let v: Vec<f64> = s.rows_of(pid).map(|(_, r)| r.values[0].unwrap()).collect();
            assert!(mean(&v).abs() < 1e-12);
            assert!((sample_std(&v) - 1.0).abs() < 1e-12);
        }
        let a: Vec<_> = s.rows_of("A").map(|(_, r)| r.values[1]).collect();
        assert_eq!(a, vec![Some(0.0); 3]);
        assert_eq!(s.flags, vec![TableFlag { participant_id: "A".into(), feature: "F1".into(), kind: FlagKind::ZeroVariance }]);
    }

    #[test]
    fn standardize_single_row_is_flagged() {
        let mut t = table(vec![vec![1.0, 2.0, 3.0]], &["A"]);
        t.rows.push(row("B", 4, vec![Some(9.0)]));
        let s = standardize_per_person(&t);
        assert_eq!(s.rows[3].values[0], None);
        assert_eq!(s.flags[0].kind, FlagKind::TooFewRows);
    }

    #[test]
    fn offsets_cancel_across_participants() {
        let shape = [0.3, -1.2, 2.5, 0.1];
        let mut t = FeatureTable::new(schema(1));
        for (pid, off) in [("A", 10.0), ("B", -400.0)] {
            for (k, s) in shape.iter().enumerate() {
                t.rows.push(row(pid, 1 + k as u8, vec![Some(s + off)]));
            }
        }
        let s = standardize_per_person(&t);
        for k in 0..4 {
            let (a, b) = (s.rows[k].values[0].unwrap(), s.rows[4 + k].values[0].unwrap());
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn outcome_rules() {
        let r = |x| row("A", x, vec![]);
        let check = |x, o| label_outcome(&r(x), &[], o).unwrap();
        assert_eq!(check(4, Outcome::RawGt3), 1);
        assert_eq!(check(3, Outcome::RawGt3), 0);
        assert_eq!(check(5, Outcome::ExtremeEq5), 1);
        assert_eq!(check(4, Outcome::ExtremeEq5), 0);
        assert_eq!(check(4, Outcome::AboveBaseline), 1);
        assert_eq!(check(3, Outcome::AboveBaseline), 0);
        let rows = [r(2), r(2), r(4)];
        let refs: Vec<&FeatureRow> = rows.iter().collect();
        assert_eq!(label_outcome(&rows[2], &refs, Outcome::WithinPersonGt0).unwrap(), 1);
        assert_eq!(label_outcome(&rows[0], &refs, Outcome::WithinPersonGt0).unwrap(), 0);
        let mut nb = r(4);
        nb.baseline_self_report = None;
        assert!(matches!(label_outcome(&nb, &[], Outcome::AboveBaseline), Err(FeatureError::MissingReference { .. })));
        for o in Outcome::ALL {
            assert_eq!(Outcome::parse(o.as_str()), Some(o));
        }
    }

    fn arb_table() -> impl Strategy<Value = FeatureTable> {
        (1usize..4, 2usize..6).prop_flat_map(|(cols, per)| {
            let n = per * 3;
            (
                prop::collection::vec(prop::collection::vec(-50.0f64..50.0, n), cols),
                prop::collection::vec(1u8..=5, n),
            )
                .prop_map(move |(data, reports)| {
                    let mut t = table(data, &["A", "B", "C"]);
                    for (r, rep) in t.rows.iter_mut().zip(reports) {
                        r.self_report = rep;
                    }
                    t
                })
        })
    }

    /// Tukey winsorization is idempotent when the quartiles are plain order
    /// statistics (n = 4m + 1).
    fn heavy_tailed(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((-1.0f64..1.0, prop::bool::weighted(0.15), -1.0f64..1.0), n).prop_map(|v| {
            v.into_iter().map(|(a, out, b)| if out { a + 100.0 * b } else { a }).collect()
        })
    }

    proptest! {
        #[test]
        fn clip_is_idempotent(m in 1usize..15, seed_vals in heavy_tailed(57)) {
            let n = 4 * m + 1;
            let t = table(vec![seed_vals[..n].to_vec()], &["A"]);
            let once = clip_outliers(&t);
            prop_assert_eq!(clip_outliers(&once), once);
        }

        #[test]
        fn clip_is_idempotent_when_quartile_neighbours_are_inliers(vals in heavy_tailed(40), n in 4usize..40) {
            let v = &vals[..n];
            let mut s = v.to_vec();
            s.sort_by(f64::total_cmp);
            let (q1, q3) = (quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.75));
            let (lo, hi) = (q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1));
            let p = (n - 1) as f64;
            prop_assume!(s[(0.25 * p).floor() as usize] >= lo && s[(0.75 * p).ceil() as usize] <= hi);
            let t = table(vec![v.to_vec()], &["A"]);
            let once = clip_outliers(&t);
            prop_assert_eq!(clip_outliers(&once), once);
        }

        #[test]
        fn labels_ignore_feature_transforms(t in arb_table()) {
            for o in [Outcome::RawGt3, Outcome::ExtremeEq5, Outcome::WithinPersonGt0, Outcome::AboveBaseline] {
                let before = label_table(&t, o).unwrap();
                prop_assert_eq!(&label_table(&standardize_per_person(&t), o).unwrap(), &before);
                prop_assert_eq!(&label_table(&clip_outliers(&t), o).unwrap(), &before);
            }
        }

        #[test]
        fn standardized_moments(t in arb_table()) {
            let s = standardize_per_person(&t);
            for pid in s.participants() {
                for j in 0..s.schema.len() {
                    let v: Vec<f64> = s.rows_of(&pid).filter_map(|(_, r)| r.values[j]).collect();
                    let flagged = s.flags.iter().any(|f| f.participant_id == pid && f.feature == s.schema[j].name);
                    prop_assert!(mean(&v).abs() < 1e-9);
                    if !flagged {
                        prop_assert!((sample_std(&v) - 1.0).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
