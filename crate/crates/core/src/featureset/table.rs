use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schema::{full_schema, FeatureInfo, Sensor};
use super::window::{window_features, WindowMode, N_BIO};
use super::FeatureError;
use crate::ingest::{
    code_context, fmt_f64, trait_totals, DatasetDir, Experience, ParticipantEntry, Phase, SessionRecordings,
};

/// One (participant, experience, phase) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub participant_id: String,
    pub experience: Experience,
    pub phase: Phase,
    pub self_report: u8,
    pub baseline_self_report: Option<u8>,
    /// Values in schema order; `None` marks a feature that could not be computed.
    pub values: Vec<Option<f64>>,
}

/// Cells that a transform could not treat normally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableFlag {
    pub participant_id: String,
    pub feature: String,
    pub kind: FlagKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    /// Zero within-person spread; standardized values set to 0.
    ZeroVariance,
    /// Fewer than two observed values; standardized values left missing.
    TooFewRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub schema: Vec<FeatureInfo>,
    pub rows: Vec<FeatureRow>,
    #[serde(default)]
    pub flags: Vec<TableFlag>,
}

impl FeatureTable {
    pub fn new(schema: Vec<FeatureInfo>) -> Self {
        Self { schema, rows: Vec::new(), flags: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|f| f.name == name)
    }

    pub fn column_values(&self, j: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.values[j]).collect()
    }

    /// Distinct participant ids in first-appearance order.
    pub fn participants(&self) -> Vec<String> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.rows {
            if seen.insert(r.participant_id.as_str()) {
                out.push(r.participant_id.clone());
            }
        }
        out
    }

    pub fn rows_of<'a>(&'a self, pid: &'a str) -> impl Iterator<Item = (usize, &'a FeatureRow)> + 'a {
        self.rows.iter().enumerate().filter(move |(_, r)| r.participant_id == pid)
    }

    pub fn biobehavioral_columns(&self) -> Vec<usize> {
        (0..self.schema.len()).filter(|&j| self.schema[j].sensor.is_biobehavioral()).collect()
    }

    pub fn columns_of(&self, sensor: Sensor) -> Vec<usize> {
        (0..self.schema.len()).filter(|&j| self.schema[j].sensor == sensor).collect()
    }

    /// Subset of rows, keeping the schema.
    pub fn filter_rows(&self, keep: impl Fn(&FeatureRow) -> bool) -> FeatureTable {
        FeatureTable {
            schema: self.schema.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            flags: self.flags.clone(),
        }
    }

    pub fn schema_json(&self) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            id_columns: [&'static str; 5],
            features: &'a [FeatureInfo],
        }
        serde_json::to_string_pretty(&Sidecar { id_columns: ID_COLUMNS, features: &self.schema })
            .expect("schema serializes")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header: Vec<&str> = ID_COLUMNS.to_vec();
        header.extend(self.schema.iter().map(|f| f.name.as_str()));
        writeln!(w, "{}", header.join(","))?;
        for r in &self.rows {
            let mut cells = vec![
                r.participant_id.clone(),
                r.experience.to_string(),
                r.phase.to_string(),
                r.self_report.to_string(),
                r.baseline_self_report.map(|v| v.to_string()).unwrap_or_default(),
            ];
            cells.extend(r.values.iter().map(|v| v.map(fmt_f64).unwrap_or_default()));
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Write `<stem>.csv` and `<stem>.schema.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), FeatureError> {
        let io = |e: std::io::Error| FeatureError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(io)?;
        std::fs::write(dir.join(format!("{stem}.csv")), buf).map_err(io)?;
        std::fs::write(dir.join(format!("{stem}.schema.json")), self.schema_json()).map_err(io)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<FeatureTable, FeatureError> {
        let io = |e: std::io::Error| FeatureError::Io(format!("{}: {e}", dir.display()));
        let schema_text = std::fs::read_to_string(dir.join(format!("{stem}.schema.json"))).map_err(io)?;
        #[derive(Deserialize)]
        struct Sidecar {
            features: Vec<FeatureInfo>,
        }
        let side: Sidecar = serde_json::from_str(&schema_text).map_err(|e| FeatureError::Parse(e.to_string()))?;
        let f = std::fs::File::open(dir.join(format!("{stem}.csv"))).map_err(io)?;
        Self::read_csv(std::io::BufReader::new(f), side.features)
    }

    pub fn read_csv<R: BufRead>(reader: R, schema: Vec<FeatureInfo>) -> Result<FeatureTable, FeatureError> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| FeatureError::Parse("empty feature csv".into()))?
            .map_err(|e| FeatureError::Parse(e.to_string()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let expected: Vec<String> =
            ID_COLUMNS.iter().map(|s| s.to_string()).chain(schema.iter().map(|f| f.name.clone())).collect();
        if cols.len() != expected.len() || cols.iter().zip(&expected).any(|(a, b)| a != b) {
            return Err(FeatureError::Parse("feature csv header does not match its schema".into()));
        }
        let mut table = FeatureTable::new(schema);
        for (ln, line) in lines.enumerate() {
            let line = line.map_err(|e| FeatureError::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| FeatureError::Parse(format!("line {}: bad {what}", ln + 2));
            if cells.len() != expected.len() {
                return Err(bad("column count"));
            }
            let opt = |s: &str| -> Result<Option<f64>, FeatureError> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>().map(Some).map_err(|_| bad("number"))
                }
            };
            table.rows.push(FeatureRow {
                participant_id: cells[0].to_string(),
                experience: Experience::parse(cells[1]).ok_or_else(|| bad("experience"))?,
                phase: Phase::parse(cells[2]).ok_or_else(|| bad("phase"))?,
                self_report: cells[3].parse().map_err(|_| bad("self_report"))?,
                baseline_self_report: if cells[4].is_empty() {
                    None
                } else {
                    Some(cells[4].parse().map_err(|_| bad("baseline_self_report"))?)
                },
                values: cells[5..].iter().map(|c| opt(c)).collect::<Result<_, _>>()?,
            });
        }
        Ok(table)
    }
}

pub const ID_COLUMNS: [&str; 5] = ["participant_id", "experience", "phase", "self_report", "baseline_self_report"];

/// Rows for one participant: every social, non-baseline segment with a
/// self-report.
pub fn participant_rows(
    entry: &ParticipantEntry,
    recs: &SessionRecordings,
    mode: WindowMode,
) -> Result<Vec<FeatureRow>, FeatureError> {
    let traits = trait_totals(&entry.traits)?;
    let mut rows = Vec::new();
    for exp in Experience::SOCIAL {
        for phase in Phase::SOCIAL {
            let Some(seg) = entry.segment(exp, phase) else { continue };
            let Some(report) = seg.self_report else { continue };
            let sliced = recs.slice(seg)?;
            let (mut values, _) = window_features(&sliced, seg.t_start, seg.t_end, mode)?;
            debug_assert_eq!(values.len(), N_BIO);
            let ctx = code_context(exp, phase)?;
            values.extend([ctx.group_size_code as f64, ctx.eval_code as f64, ctx.phase_code as f64].map(Some));
            values.extend(
                [traits.sias_total as f64, traits.bfne_total as f64, traits.ders_mean, traits.dass_dep_total as f64]
                    .map(Some),
            );
            rows.push(FeatureRow {
                participant_id: entry.id.clone(),
                experience: exp,
                phase,
                self_report: report,
                baseline_self_report: entry.segment(exp, Phase::Baseline).and_then(|s| s.self_report),
                values,
            });
        }
    }
    Ok(rows)
}

/// Assemble the table from in-memory sessions; participants are processed in
/// parallel and rows kept in input order.
pub fn build_table(
    sessions: &[(ParticipantEntry, SessionRecordings)],
    mode: WindowMode,
) -> Result<FeatureTable, FeatureError> {
    let parts: Vec<Vec<FeatureRow>> =
        sessions.par_iter().map(|(e, r)| participant_rows(e, r, mode)).collect::<Result<_, _>>()?;
    let mut t = FeatureTable::new(full_schema());
    t.rows = parts.into_iter().flatten().collect();
    Ok(t)
}

/// Assemble the table from a dataset directory, loading one participant's
/// recordings at a time per worker.
pub fn build_table_from_dir(dir: &DatasetDir, mode: WindowMode) -> Result<FeatureTable, FeatureError> {
    let manifest = dir.load_manifest()?;
    let parts: Vec<Vec<FeatureRow>> = manifest
        .participants
        .par_iter()
        .map(|e| {
            let recs = dir.load_recordings(&e.id)?;
            participant_rows(e, &recs, mode)
        })
        .collect::<Result<_, _>>()?;
    let mut t = FeatureTable::new(full_schema());
    t.rows = parts.into_iter().flatten().collect();
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> FeatureTable {
        let schema = full_schema();
        let n = schema.len();
        let mut t = FeatureTable::new(schema);
        for (i, pid) in ["A", "B"].iter().enumerate() {
            t.rows.push(FeatureRow {
                participant_id: pid.to_string(),
                experience: Experience::GroupEval,
                phase: Phase::Concurrent,
                self_report: 3 + i as u8,
                baseline_self_report: if i == 0 { Some(2) } else { None },
                values: (0..n).map(|j| if j % 7 == 0 { None } else { Some(j as f64 * 0.1 + i as f64 / 3.0) }).collect(),
            });
        }
        t
    }

    #[test]
    fn csv_round_trip() {
        let t = tiny();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = FeatureTable::read_csv(buf.as_slice(), t.schema.clone()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let t = tiny();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let mut schema = t.schema.clone();
        schema.pop();
        assert!(FeatureTable::read_csv(buf.as_slice(), schema).is_err());
    }
}
