//! Device-export parsing, session manifests, context coding and
//! questionnaire totals.
//!
//! Sensor CSV layout (one file per channel): line 1 is the UTC start time in
//! decimal seconds, line 2 the sample rate in Hz, then one sample per line.
//! Accelerometer lines carry `x,y,z` integer counts at 1/64 g per count.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Accelerometer counts per g in the device export.
pub const ACC_COUNTS_PER_G: f64 = 64.0;

pub const MIN_SEGMENT_SECONDS: f64 = 30.0;
pub const MAX_SEGMENT_SECONDS: f64 = 900.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("recording has no samples")]
    EmptyRecording,
    #[error("segment [{t_start}, {t_end}) does not overlap the recording")]
    EmptySegment { t_start: f64, t_end: f64 },
    #[error("context coding is not applicable to {0}")]
    NotApplicable(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Channel {
    Bvp,
    Eda,
    Temp,
    #[serde(rename = "ACC")]
    Acc3,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Bvp, Channel::Eda, Channel::Temp, Channel::Acc3];

    /// File stem used in session directories (`BVP.csv`, `ACC.csv`, ...).
    pub fn file_stem(self) -> &'static str {
        match self {
            Channel::Bvp => "BVP",
            Channel::Eda => "EDA",
            Channel::Temp => "TEMP",
            Channel::Acc3 => "ACC",
        }
    }

    /// Vendor default sampling rate.
    pub fn default_rate(self) -> f64 {
        match self {
            Channel::Bvp => 64.0,
            Channel::Eda | Channel::Temp => 4.0,
            Channel::Acc3 => 32.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Scalar(Vec<f64>),
    /// Accelerometer triples in g.
    Vector(Vec<[f64; 3]>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Scalar(v) => v.len(),
            Samples::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn slice(&self, lo: usize, hi: usize) -> Samples {
        match self {
            Samples::Scalar(v) => Samples::Scalar(v[lo..hi].to_vec()),
            Samples::Vector(v) => Samples::Vector(v[lo..hi].to_vec()),
        }
    }
}

/// One channel's uniformly sampled stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecording {
    pub channel: Channel,
    pub start_time: f64,
    pub rate: f64,
    pub samples: Samples,
}

impl SensorRecording {
    pub fn new(channel: Channel, start_time: f64, rate: f64, samples: Samples) -> Result<Self, IngestError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(IngestError::Validation(format!("rate must be positive, got {rate}")));
        }
        if samples.is_empty() {
            return Err(IngestError::EmptyRecording);
        }
        let vector = matches!(samples, Samples::Vector(_));
        if vector != (channel == Channel::Acc3) {
            return Err(IngestError::Validation(format!(
                "{channel:?} recording carries the wrong sample shape"
            )));
        }
        Ok(Self { channel, start_time, rate, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Timestamp of sample `i`.
    pub fn time_of(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.rate
    }

    /// End of the covered span (time of the sample after the last one).
    pub fn end_time(&self) -> f64 {
        self.time_of(self.len())
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.rate
    }

    pub fn scalars(&self) -> Option<&[f64]> {
        match &self.samples {
            Samples::Scalar(v) => Some(v),
            Samples::Vector(_) => None,
        }
    }

    pub fn vectors(&self) -> Option<&[[f64; 3]]> {
        match &self.samples {
            Samples::Vector(v) => Some(v),
            Samples::Scalar(_) => None,
        }
    }

    /// Samples whose timestamps fall in the half-open interval `[t_start, t_end)`.
    pub fn slice_time(&self, t_start: f64, t_end: f64) -> Result<SensorRecording, IngestError> {
        // smallest i with start + i/rate >= t_start
        let first = index_at_or_after(self.start_time, self.rate, t_start).min(self.len());
        let end = index_at_or_after(self.start_time, self.rate, t_end).min(self.len());
        if end <= first {
            return Err(IngestError::EmptySegment { t_start, t_end });
        }
        Ok(SensorRecording {
            channel: self.channel,
            start_time: self.time_of(first),
            rate: self.rate,
            samples: self.samples.slice(first, end),
        })
    }
}

fn index_at_or_after(start: f64, rate: f64, t: f64) -> usize {
    if t <= start {
        return 0;
    }
    let raw = ((t - start) * rate).ceil();
    let mut i = raw.max(0.0) as usize;
    // guard against representation error at exact sample instants
    while i > 0 && start + (i - 1) as f64 / rate >= t {
        i -= 1;
    }
    while start + i as f64 / rate < t {
        i += 1;
    }
    i
}

/// Restrict a recording to a phase segment.
pub fn slice_segment(rec: &SensorRecording, seg: &PhaseSegment) -> Result<SensorRecording, IngestError> {
    rec.slice_time(seg.t_start, seg.t_end)
}

fn parse_f64(text: &str, line: usize, what: &str) -> Result<f64, IngestError> {
    let t = text.trim();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| IngestError::Parse { line, reason: format!("{what}: not a finite number: {t:?}") })
}

/// Parse a device export stream for the given channel.
pub fn parse_sensor_csv<R: BufRead>(reader: R, channel: Channel) -> Result<SensorRecording, IngestError> {
    let mut lines = reader.lines().enumerate();
    let mut next_line = |what: &str| -> Result<Option<(usize, String)>, IngestError> {
        match lines.next() {
            None => Ok(None),
            Some((i, Ok(l))) => Ok(Some((i + 1, l))),
            Some((i, Err(e))) => Err(IngestError::Parse { line: i + 1, reason: format!("{what}: {e}") }),
        }
    };
    let (l1, start_line) = next_line("start time")?
        .ok_or(IngestError::Parse { line: 1, reason: "missing start time header".into() })?;
    // Some exports repeat the header value per column; the first field is authoritative.
    let start = parse_f64(start_line.split(',').next().unwrap_or(""), l1, "start time")?;
    let (l2, rate_line) = next_line("rate")?
        .ok_or(IngestError::Parse { line: 2, reason: "missing sample-rate header".into() })?;
    let rate = parse_f64(rate_line.split(',').next().unwrap_or(""), l2, "sample rate")?;
    if rate <= 0.0 {
        return Err(IngestError::Parse { line: l2, reason: format!("sample rate must be positive, got {rate}") });
    }

    let samples = if channel == Channel::Acc3 {
        let mut out = Vec::new();
        while let Some((ln, line)) = next_line("sample")? {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let mut triple = [0.0; 3];
            for slot in triple.iter_mut() {
                let f = fields
                    .next()
                    .ok_or_else(|| IngestError::Parse { line: ln, reason: "expected x,y,z".into() })?;
                *slot = parse_f64(f, ln, "acc count")? / ACC_COUNTS_PER_G;
            }
            if fields.next().is_some() {
                return Err(IngestError::Parse { line: ln, reason: "expected exactly three fields".into() });
            }
            out.push(triple);
        }
        Samples::Vector(out)
    } else {
        let mut out = Vec::new();
        while let Some((ln, line)) = next_line("sample")? {
            if line.trim().is_empty() {
                continue;
            }
            out.push(parse_f64(&line, ln, "sample")?);
        }
        Samples::Scalar(out)
    };
    if samples.is_empty() {
        return Err(IngestError::EmptyRecording);
    }
    SensorRecording::new(channel, start, rate, samples)
}

/// Render a recording in the device export format. Accelerometer samples are
/// written back as integer counts.
pub fn write_sensor_csv<W: std::io::Write>(rec: &SensorRecording, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", fmt_f64(rec.start_time))?;
    writeln!(w, "{}", fmt_f64(rec.rate))?;
    match &rec.samples {
        Samples::Scalar(v) => {
            for x in v {
                writeln!(w, "{}", fmt_f64(*x))?;
            }
        }
        Samples::Vector(v) => {
            for [x, y, z] in v {
                writeln!(
                    w,
                    "{},{},{}",
                    (x * ACC_COUNTS_PER_G).round() as i64,
                    (y * ACC_COUNTS_PER_G).round() as i64,
                    (z * ACC_COUNTS_PER_G).round() as i64
                )?;
            }
        }
    }
    Ok(())
}

/// Shortest decimal that parses back to the same f64, always with a decimal point.
pub fn fmt_f64(x: f64) -> String {
    let s = format!("{x:?}");
    s
}

pub fn read_sensor_file(path: &Path, channel: Channel) -> Result<SensorRecording, IngestError> {
    let f = std::fs::File::open(path)
        .map_err(|e| IngestError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_sensor_csv(std::io::BufReader::new(f), channel)
}

// ---------------------------------------------------------------------------
// Session structure

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experience {
    AloneVideo,
    DyadEval,
    DyadNonEval,
    GroupEval,
    GroupNonEval,
}

impl Experience {
    pub const ALL: [Experience; 5] = [
        Experience::AloneVideo,
        Experience::DyadEval,
        Experience::DyadNonEval,
        Experience::GroupEval,
        Experience::GroupNonEval,
    ];
    pub const SOCIAL: [Experience; 4] =
        [Experience::DyadEval, Experience::DyadNonEval, Experience::GroupEval, Experience::GroupNonEval];

    pub fn is_social(self) -> bool {
        self != Experience::AloneVideo
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Experience::AloneVideo => "alone_video",
            Experience::DyadEval => "dyad_eval",
            Experience::DyadNonEval => "dyad_non_eval",
            Experience::GroupEval => "group_eval",
            Experience::GroupNonEval => "group_non_eval",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.as_str() == s)
    }
}

impl fmt::Display for Experience {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Baseline,
    Anticipatory,
    Concurrent,
    PostEvent,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Baseline, Phase::Anticipatory, Phase::Concurrent, Phase::PostEvent];
    pub const SOCIAL: [Phase; 3] = [Phase::Anticipatory, Phase::Concurrent, Phase::PostEvent];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Baseline => "baseline",
            Phase::Anticipatory => "anticipatory",
            Phase::Concurrent => "concurrent",
            Phase::PostEvent => "post_event",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One participant × experience × phase span with its self-report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSegment {
    #[serde(default, skip_serializing)]
    pub participant_id: String,
    pub experience: Experience,
    pub phase: Phase,
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default)]
    pub self_report: Option<u8>,
}

impl PhaseSegment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let d = self.duration();
        if !(self.t_end > self.t_start) {
            return Err(IngestError::Validation(format!(
                "{} {}/{}: t_end must exceed t_start",
                self.participant_id, self.experience, self.phase
            )));
        }
        if !(MIN_SEGMENT_SECONDS..=MAX_SEGMENT_SECONDS).contains(&d) {
            return Err(IngestError::Validation(format!(
                "{} {}/{}: duration {d:.1} s outside [{MIN_SEGMENT_SECONDS}, {MAX_SEGMENT_SECONDS}]",
                self.participant_id, self.experience, self.phase
            )));
        }
        if let Some(r) = self.self_report {
            if !(1..=5).contains(&r) {
                return Err(IngestError::Validation(format!(
                    "{} {}/{}: self-report {r} outside 1..5",
                    self.participant_id, self.experience, self.phase
                )));
            }
        }
        Ok(())
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

/// Situational codes for a social phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContextFeatures {
    /// 0 = dyadic, 1 = group.
    pub group_size_code: u8,
    /// 0 = no explicit evaluation, 1 = explicit evaluation.
    pub eval_code: u8,
    /// 1 = anticipatory, 2 = concurrent, 3 = post-event.
    pub phase_code: u8,
}

pub fn code_context(experience: Experience, phase: Phase) -> Result<ContextFeatures, IngestError> {
    let (group_size_code, eval_code) = match experience {
        Experience::AloneVideo => return Err(IngestError::NotApplicable(format!("{experience}/{phase}"))),
        Experience::DyadEval => (0, 1),
        Experience::DyadNonEval => (0, 0),
        Experience::GroupEval => (1, 1),
        Experience::GroupNonEval => (1, 0),
    };
    let phase_code = match phase {
        Phase::Baseline => return Err(IngestError::NotApplicable(format!("{experience}/{phase}"))),
        Phase::Anticipatory => 1,
        Phase::Concurrent => 2,
        Phase::PostEvent => 3,
    };
    Ok(ContextFeatures { group_size_code, eval_code, phase_code })
}

/// Raw questionnaire responses as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitItems {
    pub sias: Vec<u8>,
    pub bfne: Vec<u8>,
    pub ders_sf: Vec<u8>,
    pub dass_dep: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitScores {
    pub sias_total: u32,
    pub bfne_total: u32,
    pub ders_mean: f64,
    pub dass_dep_total: u32,
}

fn check_items(name: &str, items: &[u8], count: usize, lo: u8, hi: u8) -> Result<(), IngestError> {
    if items.len() != count {
        return Err(IngestError::Validation(format!("{name}: expected {count} items, got {}", items.len())));
    }
    if let Some(bad) = items.iter().find(|&&v| v < lo || v > hi) {
        return Err(IngestError::Validation(format!("{name}: item value {bad} outside {lo}..={hi}")));
    }
    Ok(())
}

/// Instrument totals: SIAS, BFNE and DASS-21 depression are item sums,
/// DERS-SF is the item mean.
pub fn trait_totals(items: &TraitItems) -> Result<TraitScores, IngestError> {
    check_items("SIAS", &items.sias, 20, 0, 4)?;
    check_items("BFNE", &items.bfne, 8, 1, 5)?;
    check_items("DERS-SF", &items.ders_sf, 18, 1, 5)?;
    check_items("DASS-21 depression", &items.dass_dep, 7, 0, 3)?;
    let sum = |v: &[u8]| v.iter().map(|&x| x as u32).sum::<u32>();
    Ok(TraitScores {
        sias_total: sum(&items.sias),
        bfne_total: sum(&items.bfne),
        ders_mean: sum(&items.ders_sf) as f64 / items.ders_sf.len() as f64,
        dass_dep_total: sum(&items.dass_dep),
    })
}

// ---------------------------------------------------------------------------
// Manifest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantEntry {
    pub id: String,
    pub traits: TraitItems,
    pub segments: Vec<PhaseSegment>,
}

impl ParticipantEntry {
    pub fn segment(&self, experience: Experience, phase: Phase) -> Option<&PhaseSegment> {
        self.segments.iter().find(|s| s.experience == experience && s.phase == phase)
    }

    pub fn self_reports(&self) -> impl Iterator<Item = u8> + '_ {
        self.segments.iter().filter_map(|s| s.self_report)
    }
}

/// The session manifest: a JSON array of participants.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Manifest {
    pub participants: Vec<ParticipantEntry>,
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self, IngestError> {
        let mut m: Manifest = serde_json::from_str(text).map_err(|e| IngestError::Parse {
            line: e.line(),
            reason: e.to_string(),
        })?;
        m.fill_ids();
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IngestError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_json(&text)
    }

    fn fill_ids(&mut self) {
        for p in &mut self.participants {
            for s in &mut p.segments {
                s.participant_id = p.id.clone();
            }
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.participants {
            if !seen.insert(p.id.as_str()) {
                return Err(IngestError::Validation(format!("duplicate participant id {}", p.id)));
            }
            trait_totals(&p.traits)?;
            let mut keys = std::collections::BTreeSet::new();
            for s in &p.segments {
                s.validate()?;
                if !keys.insert((s.experience, s.phase)) {
                    return Err(IngestError::Validation(format!(
                        "{}: duplicate segment {}/{}",
                        p.id, s.experience, s.phase
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn participant(&self, id: &str) -> Option<&ParticipantEntry> {
        self.participants.iter().find(|p| p.id == id)
    }
}

/// All four channels of one participant's session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecordings {
    pub bvp: SensorRecording,
    pub eda: SensorRecording,
    pub temp: SensorRecording,
    pub acc: SensorRecording,
}

impl SessionRecordings {
    pub fn get(&self, ch: Channel) -> &SensorRecording {
        match ch {
            Channel::Bvp => &self.bvp,
            Channel::Eda => &self.eda,
            Channel::Temp => &self.temp,
            Channel::Acc3 => &self.acc,
        }
    }

    /// Slice every channel to one phase segment.
    pub fn slice(&self, seg: &PhaseSegment) -> Result<SessionRecordings, IngestError> {
        Ok(SessionRecordings {
            bvp: slice_segment(&self.bvp, seg)?,
            eda: slice_segment(&self.eda, seg)?,
            temp: slice_segment(&self.temp, seg)?,
            acc: slice_segment(&self.acc, seg)?,
        })
    }
}

/// A dataset directory: `manifest.json` plus `<participant>/<CHANNEL>.csv`.
#[derive(Debug, Clone)]
pub struct DatasetDir {
    pub root: PathBuf,
}

impl DatasetDir {
    pub const MANIFEST: &'static str = "manifest.json";

    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(Self::MANIFEST)
    }

    pub fn recording_path(&self, participant: &str, ch: Channel) -> PathBuf {
        self.root.join(participant).join(format!("{}.csv", ch.file_stem()))
    }

    pub fn load_manifest(&self) -> Result<Manifest, IngestError> {
        Manifest::load(&self.manifest_path())
    }

    pub fn load_recordings(&self, participant: &str) -> Result<SessionRecordings, IngestError> {
        let get = |ch| read_sensor_file(&self.recording_path(participant, ch), ch);
        Ok(SessionRecordings {
            bvp: get(Channel::Bvp)?,
            eda: get(Channel::Eda)?,
            temp: get(Channel::Temp)?,
            acc: get(Channel::Acc3)?,
        })
    }

    /// Every input file in a stable order, for digesting.
    pub fn input_files(&self, manifest: &Manifest) -> Vec<PathBuf> {
        let mut v = vec![self.manifest_path()];
        for p in &manifest.participants {
            for ch in Channel::ALL {
                v.push(self.recording_path(&p.id, ch));
            }
        }
        v
    }
}

/// Summary counts from a successful ingest pass.
#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub participants: usize,
    pub segments: usize,
    pub social_segments: usize,
    pub reports: usize,
    pub samples: BTreeMap<String, usize>,
}

pub fn ingest_dataset(dir: &DatasetDir) -> Result<(Manifest, IngestSummary), IngestError> {
    let manifest = dir.load_manifest()?;
    let mut samples = BTreeMap::new();
    for p in &manifest.participants {
        let recs = dir.load_recordings(&p.id)?;
        for ch in Channel::ALL {
            *samples.entry(ch.file_stem().to_string()).or_insert(0) += recs.get(ch).len();
        }
        for s in &p.segments {
            for ch in Channel::ALL {
                slice_segment(recs.get(ch), s)?;
            }
        }
    }
    let summary = IngestSummary {
        participants: manifest.participants.len(),
        segments: manifest.participants.iter().map(|p| p.segments.len()).sum(),
        social_segments: manifest
            .participants
            .iter()
            .flat_map(|p| &p.segments)
            .filter(|s| s.experience.is_social() && s.phase != Phase::Baseline)
            .count(),
        reports: manifest.participants.iter().map(|p| p.self_reports().count()).sum(),
        samples,
    };
    Ok((manifest, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str, ch: Channel) -> Result<SensorRecording, IngestError> {
        parse_sensor_csv(text.as_bytes(), ch)
    }

    #[test]
    fn parses_scalar_channel() {
        let rec = parse("1697040000.0\n64.0\n0.1\n0.2\n", Channel::Bvp).unwrap();
        assert_eq!(rec.start_time, 1697040000.0);
        assert_eq!(rec.rate, 64.0);
        assert_eq!(rec.scalars().unwrap(), &[0.1, 0.2]);
    }

    #[test]
    fn acc_counts_are_scaled_to_g() {
        let rec = parse("1697040000.0\n32.0\n0,0,64\n", Channel::Acc3).unwrap();
        assert_eq!(rec.vectors().unwrap(), &[[0.0, 0.0, 1.0]]);
    }

    #[test]
    fn header_only_is_empty_recording() {
        assert_eq!(parse("1697040000.0\n64.0\n", Channel::Bvp), Err(IngestError::EmptyRecording));
    }

    #[test]
    fn malformed_inputs_report_lines() {
        match parse("abc\n64\n1\n", Channel::Bvp) {
            Err(IngestError::Parse { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse("0\n64\n1\nx\n", Channel::Bvp) {
            Err(IngestError::Parse { line: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse("0\n-4\n1\n", Channel::Eda) {
            Err(IngestError::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("0\n32\n1,2\n", Channel::Acc3), Err(IngestError::Parse { line: 3, .. })));
    }

    fn ramp(n: usize, rate: f64, start: f64) -> SensorRecording {
        SensorRecording::new(Channel::Eda, start, rate, Samples::Scalar((0..n).map(|i| i as f64).collect()))
            .unwrap()
    }

    fn seg(t0: f64, t1: f64) -> PhaseSegment {
        PhaseSegment {
            participant_id: "P".into(),
            experience: Experience::DyadEval,
            phase: Phase::Concurrent,
            t_start: t0,
            t_end: t1,
            self_report: Some(3),
        }
    }

    #[test]
    fn slicing_is_half_open() {
        let rec = ramp(400, 4.0, 0.0);
        let s = slice_segment(&rec, &seg(10.0, 20.0)).unwrap();
        assert_eq!(s.len(), 40);
        assert_eq!(s.start_time, 10.0);
        assert_eq!(s.scalars().unwrap()[0], 40.0);

        let whole = slice_segment(&rec, &seg(0.0, 100.0)).unwrap();
        assert_eq!(whole, rec);

        assert!(matches!(slice_segment(&rec, &seg(200.0, 210.0)), Err(IngestError::EmptySegment { .. })));
    }

    #[test]
    fn context_codes() {
        let c = code_context(Experience::DyadNonEval, Phase::Anticipatory).unwrap();
        assert_eq!((c.group_size_code, c.eval_code, c.phase_code), (0, 0, 1));
        let c = code_context(Experience::GroupEval, Phase::PostEvent).unwrap();
        assert_eq!((c.group_size_code, c.eval_code, c.phase_code), (1, 1, 3));
        assert!(matches!(
            code_context(Experience::AloneVideo, Phase::Concurrent),
            Err(IngestError::NotApplicable(_))
        ));
        assert!(matches!(code_context(Experience::DyadEval, Phase::Baseline), Err(IngestError::NotApplicable(_))));
    }

    #[test]
    fn context_codes_are_injective_on_social_domain() {
        let mut seen = std::collections::HashSet::new();
        for e in Experience::SOCIAL {
            for p in Phase::SOCIAL {
                assert!(seen.insert(code_context(e, p).unwrap()));
            }
        }
        assert_eq!(seen.len(), 12);
    }

    fn items(sias: u8, bfne: u8, ders: u8, dass: u8) -> TraitItems {
        TraitItems { sias: vec![sias; 20], bfne: vec![bfne; 8], ders_sf: vec![ders; 18], dass_dep: vec![dass; 7] }
    }

    #[test]
    fn trait_scoring() {
        assert_eq!(trait_totals(&items(4, 5, 5, 3)).unwrap().sias_total, 80);
        let t = trait_totals(&items(0, 1, 3, 0)).unwrap();
        assert_eq!((t.sias_total, t.bfne_total, t.dass_dep_total), (0, 8, 0));
        assert_eq!(t.ders_mean, 3.0);
        let mut bad = items(0, 1, 1, 0);
        bad.sias.pop();
        assert!(matches!(trait_totals(&bad), Err(IngestError::Validation(_))));
        assert!(matches!(trait_totals(&items(5, 1, 1, 0)), Err(IngestError::Validation(_))));
        assert!(matches!(trait_totals(&items(0, 0, 1, 0)), Err(IngestError::Validation(_))));
    }

    #[test]
    fn manifest_round_trip_and_validation() {
        let m = Manifest {
            participants: vec![ParticipantEntry {
                id: "P01".into(),
                traits: items(2, 3, 2, 1),
                segments: vec![seg(0.0, 120.0)],
            }],
        };
        let text = m.to_json();
        assert!(text.trim_start().starts_with('['));
        let back = Manifest::from_json(&text).unwrap();
        assert_eq!(back.participants[0].segments[0].participant_id, "P01");
        assert_eq!(back.participants[0].segments[0].t_end, 120.0);

        let mut short = m.clone();
        short.participants[0].segments[0].t_end = 10.0;
        assert!(Manifest::from_json(&short.to_json()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            start in 1.0e9f64..2.0e9,
            rate in prop::sample::select(vec![4.0f64, 32.0, 64.0]),
            values in prop::collection::vec(-1.0e3f64..1.0e3, 1..50),
        ) {
            let rec = SensorRecording::new(Channel::Bvp, start, rate, Samples::Scalar(values)).unwrap();
            let mut buf = Vec::new();
            write_sensor_csv(&rec, &mut buf).unwrap();
            let back = parse_sensor_csv(buf.as_slice(), Channel::Bvp).unwrap();
            prop_assert_eq!(back, rec);
        }

        #[test]
        fn acc_round_trip_is_exact(counts in prop::collection::vec((-128i32..128, -128i32..128, -128i32..128), 1..40)) {
            let v: Vec<[f64; 3]> = counts.iter().map(|&(x, y, z)| [x as f64 / 64.0, y as f64 / 64.0, z as f64 / 64.0]).collect();
            let rec = SensorRecording::new(Channel::Acc3, 1.0e9, 32.0, Samples::Vector(v)).unwrap();
            let mut buf = Vec::new();
            write_sensor_csv(&rec, &mut buf).unwrap();
            let back = parse_sensor_csv(buf.as_slice(), Channel::Acc3).unwrap();
            prop_assert_eq!(back, rec);
        }

        #[test]
        fn slicing_is_idempotent(n in 40usize..400, a in 0.0f64..50.0, len in 1.0f64..60.0) {
            let rec = ramp(n, 4.0, 3.0);
            let s = seg(3.0 + a, 3.0 + a + len);
            if let Ok(once) = slice_segment(&rec, &s) {
                let twice = slice_segment(&once, &s).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
