//! Writes analysis results as CSV/JSON tables, SVG plots and a run manifest.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ablations::{AblationCell, AblationReport};
use super::comparisons::{ComparisonReport, Grouping};
use super::descriptives::DescriptiveReport;
use super::individual::IndividualReport;
use super::screen::{ScreenReport, ScreenRow};
use super::svg;
use super::{CvReport, ExperimentConfig, ExperimentResults};
use crate::error::{Error, Result};

pub const RANDOM_BASELINE_LABEL: &str = "Baseline (Random Guess)";
pub const TABLE3_COLUMNS: [&str; 6] = ["Feature", "Estimate", "Std. Error", "z value", "p value", "Adjusted p value"];
pub const TABLE4_COLUMNS: [&str; 6] = ["Configuration", "Model", "Balanced Accuracy", "BA SD", "Macro F1", "F1 SD"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// SHA-256 of a file; `path` in the result is `file` relative to `root`.
pub fn file_digest(root: &Path, file: &Path) -> Result<FileDigest> {
    let mut f = std::fs::File::open(file).map_err(|e| Error::io(file, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(file, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        bytes += n as u64;
    }
    let rel = file.strip_prefix(root).unwrap_or(file);
    Ok(FileDigest { path: rel.to_string_lossy().replace('\\', "/"), bytes, sha256: hex::encode(h.finalize()) })
}

/// What produced a set of results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunInfo {
    pub command: Vec<String>,
    pub config: ExperimentConfig,
    pub inputs: Vec<FileDigest>,
    /// Extra parameters of the run (e.g. generator settings).
    pub parameters: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub config: ExperimentConfig,
    pub seed: u64,
    /// How every random stream is derived from the seed.
    pub seed_streams: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

fn seed_streams() -> BTreeMap<String, String> {
    BTreeMap::from([
        (
            "cv_fold".to_string(),
            "mix_seed(mix_seed(seed, rep + 1), fnv1a(participant) ^ fnv1a(model))".to_string(),
        ),
        ("synth_participant".to_string(), "mix_seed(seed, participant_index)".to_string()),
    ])
}

struct Writer {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn put(&mut self, rel: &str, content: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.put(rel, &s)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv<H: AsRef<str>, S: AsRef<str>>(header: &[H], rows: &[Vec<S>]) -> String {
    let mut out = header.iter().map(|h| csv_field(h.as_ref())).collect::<Vec<_>>().join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.iter().map(|c| csv_field(c.as_ref())).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

fn fx(v: f64, d: usize) -> String {
    format!("{v:.d$}")
}

fn fo(v: Option<f64>, d: usize) -> String {
    v.map(|x| fx(x, d)).unwrap_or_default()
}

fn fp(v: Option<f64>) -> String {
    match v {
        Some(p) if p < 1e-3 => format!("{p:.3e}"),
        Some(p) => format!("{p:.4}"),
        None => String::new(),
    }
}

/// Screen rows: feature, estimate, standard error, z, p and adjusted p.
fn table3(rows: &[&ScreenRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.feature.clone(), fo(r.estimate, 4), fo(r.std_error, 4), fo(r.z, 3), fp(r.p), fp(r.adjusted_p)])
        .collect();
    csv(&TABLE3_COLUMNS, &body)
}

fn table3_full(rows: &[ScreenRow]) -> String {
    let mut header = TABLE3_COLUMNS.to_vec();
    header.extend(["Sensor", "N", "Note"]);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.feature.clone(),
                fo(r.estimate, 4),
                fo(r.std_error, 4),
                fo(r.z, 3),
                fp(r.p),
                fp(r.adjusted_p),
                r.sensor.to_string(),
                r.n_rows.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv(&header, &body)
}

/// Model comparison grid: every model of every configuration, plus a random
/// guess row per configuration.
pub fn table4(configs: &[(String, Vec<(String, f64, f64, f64, f64)>)]) -> String {
    let mut body = Vec::new();
    for (name, models) in configs {
        for (label, ba, ba_sd, f1, f1_sd) in models {
            body.push(vec![name.clone(), label.clone(), fx(*ba, 3), fx(*ba_sd, 3), fx(*f1, 3), fx(*f1_sd, 3)]);
        }
        body.push(vec![name.clone(), RANDOM_BASELINE_LABEL.to_string(), fx(0.5, 3), fx(0.0, 3), String::new(), String::new()]);
    }
    csv(&TABLE4_COLUMNS, &body)
}

fn cv_rows(r: &CvReport) -> (String, Vec<(String, f64, f64, f64, f64)>) {
    (
        r.configuration(),
        r.result.models.iter().map(|m| (m.label.clone(), m.ba_mean, m.ba_sd, m.f1_mean, m.f1_sd)).collect(),
    )
}

fn cell_rows(name: String, c: &AblationCell) -> (String, Vec<(String, f64, f64, f64, f64)>) {
    (name, c.models.iter().map(|m| (m.label.clone(), m.ba_mean, m.ba_sd, m.f1_mean, m.f1_sd)).collect())
}

const CELL_COLUMNS: [&str; 7] = ["Model", "Balanced Accuracy", "BA SD", "Macro F1", "F1 SD", "Top Features", "Note"];

fn cell_lines(prefix: &[String], c: &AblationCell) -> Vec<Vec<String>> {
    if let Some(e) = &c.error {
        let mut row = prefix.to_vec();
        row.extend([String::new(), String::new(), String::new(), String::new(), String::new(), String::new(), e.clone()]);
        return vec![row];
    }
    c.models
        .iter()
        .map(|m| {
            let mut row = prefix.to_vec();
            let top: Vec<String> = m.top_features.iter().map(|(f, n)| format!("{f}:{n}")).collect();
            row.extend([
                m.label.clone(),
                fx(m.ba_mean, 3),
                fx(m.ba_sd, 3),
                fx(m.f1_mean, 3),
                fx(m.f1_sd, 3),
                top.join(";"),
                String::new(),
            ]);
            row
        })
        .collect()
}

fn with_prefix(prefix: &[&str]) -> Vec<String> {
    prefix.iter().chain(CELL_COLUMNS.iter()).map(|s| s.to_string()).collect()
}

fn processing_name(o: crate::featureset::Outcome) -> &'static str {
    match o {
        crate::featureset::Outcome::WithinPersonGt0 => "within_person",
        _ => "raw",
    }
}

fn write_descriptives(w: &mut Writer, d: &DescriptiveReport) -> Result<()> {
    let hist: Vec<Vec<String>> = (0..5).map(|i| vec![(i + 1).to_string(), d.histogram[i].to_string()]).collect();
    w.put("descriptives/histogram.csv", &csv(&["score", "count"], &hist))?;
    let adj: Vec<Vec<String>> = d.adjusted_histogram.iter().map(|(v, c)| vec![fx(*v, 4), c.to_string()]).collect();
    w.put("descriptives/adjusted_histogram.csv", &csv(&["adjusted_score", "count"], &adj))?;
    let parts: Vec<Vec<String>> = d
        .participants
        .iter()
        .map(|p| {
            vec![
                p.participant.clone(),
                p.reports.len().to_string(),
                fx(p.mean, 4),
                fx(p.sd, 4),
                fx(p.median, 2),
                fx(p.q1, 2),
                fx(p.q3, 2),
                p.low_variability.to_string(),
            ]
        })
        .collect();
    w.put(
        "descriptives/participants.csv",
        &csv(&["participant", "n_reports", "mean", "sd", "median", "q1", "q3", "low_variability"], &parts),
    )?;
    let pres: Vec<Vec<String>> = (0..5)
        .map(|i| vec![(i + 1).to_string(), fx(d.reported_at_least_once[i], 4), fx(d.cumulative[i], 4)])
        .collect();
    w.put("descriptives/score_presence.csv", &csv(&["score", "reported_at_least_once", "cumulative"], &pres))?;
    w.json("descriptives/descriptives.json", d)?;
    let bars: Vec<(String, f64, Option<f64>)> = (0..5).map(|i| ((i + 1).to_string(), d.histogram[i] as f64, None)).collect();
    w.put("descriptives/histogram.svg", &svg::bar_chart("State anxiety reports", "count", &bars, None, None))?;
    let bars: Vec<(String, f64, Option<f64>)> =
        (0..5).map(|i| ((i + 1).to_string(), d.reported_at_least_once[i], None)).collect();
    w.put(
        "descriptives/score_presence.svg",
        &svg::bar_chart("Participants reporting each score at least once", "proportion", &bars, Some((0.0, 1.0)), None),
    )
}

fn write_comparisons(w: &mut Writer, c: &ComparisonReport) -> Result<()> {
    let rows: Vec<Vec<String>> = c
        .comparisons
        .iter()
        .map(|x| {
            vec![
                x.grouping.to_string(),
                x.a.clone(),
                x.b.clone(),
                x.n_pairs.to_string(),
                fo(x.mean_a, 4),
                fo(x.mean_b, 4),
                fo(x.statistic, 1),
                fp(x.p),
                fp(x.adjusted_p),
                x.skipped.clone().unwrap_or_default(),
            ]
        })
        .collect();
    w.put(
        "descriptives/comparisons.csv",
        &csv(&["grouping", "a", "b", "n_pairs", "mean_a", "mean_b", "statistic", "p", "adjusted_p", "skipped"], &rows),
    )?;
    let q: Vec<Vec<String>> = c
        .summaries
        .iter()
        .map(|s| {
            vec![
                s.grouping.to_string(),
                s.context.clone(),
                s.n.to_string(),
                fx(s.min, 4),
                fx(s.q1, 4),
                fx(s.median, 4),
                fx(s.q3, 4),
                fx(s.max, 4),
                fx(s.mean, 4),
            ]
        })
        .collect();
    w.put(
        "descriptives/context_quartiles.csv",
        &csv(&["grouping", "context", "n", "min", "q1", "median", "q3", "max", "mean"], &q),
    )?;
    w.json("descriptives/comparisons.json", c)?;
    for g in Grouping::ALL {
        let groups: Vec<(String, [f64; 5], Vec<f64>)> = c
            .summaries
            .iter()
            .filter(|s| s.grouping == g)
            .map(|s| (s.context.clone(), [s.min, s.q1, s.median, s.q3, s.max], s.values.iter().map(|v| v.1).collect()))
            .collect();
        if !groups.is_empty() {
            w.put(
                &format!("descriptives/context_{g}.svg"),
                &svg::quartile_plot(&format!("State anxiety by {}", g.as_str().replace('_', " ")), "mean report", &groups),
            )?;
        }
    }
    Ok(())
}

fn write_screen(w: &mut Writer, dir: &str, s: &ScreenReport) -> Result<()> {
    w.put(&format!("{dir}/table3.csv"), &table3(&s.significant()))?;
    w.put(&format!("{dir}/table3_full.csv"), &table3_full(&s.rows))?;
    w.json(&format!("{dir}/screen.json"), s)
}

fn write_cv(w: &mut Writer, dir: &str, r: &CvReport) -> Result<()> {
    w.put(&format!("{dir}/table4.csv"), &table4(&[cv_rows(r)]))?;
    let mut freq = Vec::new();
    let mut acc = Vec::new();
    for m in &r.result.models {
        for (f, n) in &m.feature_frequency {
            freq.push(vec![m.kind.to_string(), f.clone(), n.to_string()]);
        }
        for (p, a) in &m.participant_accuracy {
            acc.push(vec![m.kind.to_string(), p.clone(), fx(*a, 4)]);
        }
    }
    w.put(&format!("{dir}/feature_frequency.csv"), &csv(&["model", "feature", "count"], &freq))?;
    w.put(&format!("{dir}/participant_accuracy.csv"), &csv(&["model", "participant", "accuracy"], &acc))?;
    w.json(&format!("{dir}/cv_result.json"), r)?;
    let bars: Vec<(String, f64, Option<f64>)> =
        r.result.models.iter().map(|m| (m.label.clone(), m.ba_mean, Some(m.ba_sd))).collect();
    w.put(
        &format!("{dir}/balanced_accuracy.svg"),
        &svg::bar_chart(&format!("Balanced accuracy ({})", r.configuration()), "balanced accuracy", &bars, Some((0.0, 1.0)), Some(0.5)),
    )
}

fn best_bars<'a>(cells: impl Iterator<Item = (String, &'a AblationCell)>) -> Vec<(String, f64, Option<f64>)> {
    cells.filter_map(|(name, c)| c.best().map(|m| (name, m.ba_mean, Some(m.ba_sd)))).collect()
}

fn write_ablations(w: &mut Writer, a: &AblationReport) -> Result<()> {
    let mut rows = Vec::new();
    for c in &a.feature_sets {
        rows.extend(cell_lines(&[c.key.variant.to_string(), processing_name(c.key.outcome).to_string()], c));
    }
    w.put("ablations/feature_sets.csv", &csv(&with_prefix(&["Variant", "Outcome Processing"]), &rows))?;
    let configs: Vec<_> = a
        .feature_sets
        .iter()
        .map(|c| cell_rows(format!("{}/{}", c.key.variant, processing_name(c.key.outcome)), c))
        .collect();
    w.put("ablations/table4.csv", &table4(&configs))?;

    let mut rows = Vec::new();
    for s in &a.sensors {
        let with = if s.with_context_trait { "yes" } else { "no" };
        rows.extend(cell_lines(&[s.sensor.to_string(), with.to_string()], &s.cell));
    }
    w.put("ablations/sensors.csv", &csv(&with_prefix(&["Sensor", "Context+Trait"]), &rows))?;

    let mut rows = Vec::new();
    for t in &a.top_k {
        rows.extend(cell_lines(&[t.family.clone(), t.k.to_string()], &t.cell));
    }
    w.put("ablations/top_k.csv", &csv(&with_prefix(&["Family", "K"]), &rows))?;

    let mut rows = Vec::new();
    for c in &a.outcomes {
        rows.extend(cell_lines(&[c.key.outcome.to_string()], c));
    }
    w.put("ablations/outcomes.csv", &csv(&with_prefix(&["Outcome"]), &rows))?;
    w.json("ablations/ablations.json", a)?;

    let bars = best_bars(a.feature_sets.iter().map(|c| (format!("{}/{}", c.key.variant, processing_name(c.key.outcome)), c)));
    w.put(
        "ablations/feature_sets.svg",
        &svg::bar_chart("Feature-set ablation (best model)", "balanced accuracy", &bars, Some((0.0, 1.0)), Some(0.5)),
    )?;
    let bars = best_bars(a.sensors.iter().map(|s| {
        (format!("{}{}", s.sensor, if s.with_context_trait { "+ctx+trait" } else { "" }), &s.cell)
    }));
    w.put(
        "ablations/sensors.svg",
        &svg::bar_chart("Sensor ablation (best model)", "balanced accuracy", &bars, Some((0.0, 1.0)), Some(0.5)),
    )?;
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for t in &a.top_k {
        if let Some(m) = t.cell.best() {
            series.entry(t.family.clone()).or_default().push((t.k as f64, m.ba_mean));
        }
    }
    let series: Vec<(String, Vec<(f64, f64)>)> = series.into_iter().collect();
    w.put("ablations/top_k.svg", &svg::line_chart("Top-K sweep (best model)", "K", "balanced accuracy", &series))?;
    let bars = best_bars(a.outcomes.iter().map(|c| (c.key.outcome.to_string(), c)));
    w.put(
        "ablations/outcomes.svg",
        &svg::bar_chart("Outcome definitions (best model)", "balanced accuracy", &bars, Some((0.0, 1.0)), Some(0.5)),
    )
}

fn write_individual(w: &mut Writer, r: &IndividualReport) -> Result<()> {
    let rows: Vec<Vec<String>> = r
        .correlations
        .iter()
        .map(|c| vec![c.x.clone(), c.y.clone(), c.n.to_string(), fo(c.r, 4), fp(c.p), c.skipped.clone().unwrap_or_default()])
        .collect();
    w.put("individual/correlations.csv", &csv(&["x", "y", "n", "r", "p", "skipped"], &rows))?;
    let pts: Vec<Vec<String>> = r
        .points
        .iter()
        .map(|p| vec![p.participant.clone(), fx(p.accuracy, 4), fx(p.sias, 0), fx(p.state_mean, 4), fx(p.state_sd, 4)])
        .collect();
    w.put("individual/scatter.csv", &csv(&["participant", "accuracy", "sias", "state_mean", "state_sd"], &pts))?;
    w.json("individual/individual.json", r)?;
    for c in &r.correlations {
        let get = |v: &str| -> Vec<f64> {
            r.points
                .iter()
                .map(|p| match v {
                    "accuracy" => p.accuracy,
                    "sias" => p.sias,
                    "state_mean" => p.state_mean,
                    _ => p.state_sd,
                })
                .collect()
        };
        let title = match c.r {
            Some(rv) => format!("{} vs {} (r = {rv:.2})", c.y, c.x),
            None => format!("{} vs {}", c.y, c.x),
        };
        w.put(&format!("individual/scatter_{}_{}.svg", c.x, c.y), &svg::scatter(&title, &c.x, &c.y, &get(&c.x), &get(&c.y)))?;
    }
    Ok(())
}

/// Write every completed analysis under `out` together with `results.json`
/// and `run_manifest.json`. Returns the written paths.
pub fn emit_report(results: &ExperimentResults, out: &Path, run: &RunInfo) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::EmptyResults("no analysis produced results".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut w = Writer { root: out.to_path_buf(), written: Vec::new() };
    if let Some(d) = &results.descriptives {
        write_descriptives(&mut w, d)?;
    }
    if let Some(c) = &results.comparisons {
        write_comparisons(&mut w, c)?;
    }
    if let Some(s) = &results.screen {
        write_screen(&mut w, "screen", s)?;
    }
    if let Some(s) = &results.screen_whole {
        write_screen(&mut w, "screen/whole_window", s)?;
    }
    if let Some(r) = &results.cv {
        write_cv(&mut w, "cv", r)?;
    }
    if let Some(r) = &results.cv_whole {
        write_cv(&mut w, "cv/whole_window", r)?;
    }
    let grid: Vec<_> = results.cv.iter().chain(&results.cv_whole).map(cv_rows).collect();
    if !grid.is_empty() {
        w.put("cv/table4_all.csv", &table4(&grid))?;
    }
    if let Some(a) = &results.ablations {
        write_ablations(&mut w, a)?;
    }
    if let Some(i) = &results.individual {
        write_individual(&mut w, i)?;
    }
    w.json("results.json", results)?;
    write_run_manifest(out, run, &mut w.written)?;
    Ok(w.written)
}

/// Write `run_manifest.json` under `out`, digesting `written` (paths under
/// `out`), and append it to `written`.
pub fn write_run_manifest(out: &Path, run: &RunInfo, written: &mut Vec<PathBuf>) -> Result<()> {
    let outputs = written.iter().map(|p| file_digest(out, p)).collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: run.command.clone(),
        config: run.config.clone(),
        seed: run.config.seed,
        seed_streams: seed_streams(),
        parameters: run.parameters.clone(),
        inputs: run.inputs.clone(),
        outputs,
    };
    let mut w = Writer { root: out.to_path_buf(), written: Vec::new() };
    w.json("run_manifest.json", &manifest)?;
    written.extend(w.written);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_results_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let e = emit_report(&ExperimentResults::default(), dir.path(), &RunInfo::default()).unwrap_err();
        assert!(matches!(e, Error::EmptyResults(_)));
    }

    #[test]
    fn table4_has_baseline_per_configuration() {
        let t = table4(&[
            ("a".into(), vec![("M1".into(), 0.61, 0.01, 0.6, 0.02), ("M2".into(), 0.7, 0.0, 0.69, 0.0)]),
            ("b".into(), vec![("M1".into(), 0.5, 0.0, 0.5, 0.0)]),
        ]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], TABLE4_COLUMNS.join(","));
        assert_eq!(lines.len(), 1 + 3 + 2);
        assert_eq!(lines[3], "a,Baseline (Random Guess),0.500,0.000,,");
    }

    #[test]
    fn csv_quotes_when_needed() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("x\"y"), "\"x\"\"y\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
