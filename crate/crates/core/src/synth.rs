//! Deterministic synthetic cohorts with planted anxiety effects.
//!
//! Each participant gets a latent state-anxiety value per phase drawn from an
//! ordinal-probit model; the self-report is that latent value cut at fixed
//! thresholds, and phases reported above 3 are "anxious". Anxious phases
//! alter heart-rate dynamics, SCR rate, movement and skin temperature by the
//! amounts in [`EffectProfile`].

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as NormalDist};

use crate::featureset::{full_schema, participant_rows, FeatureError, FeatureRow, FeatureTable, WindowMode};
use crate::ingest::{
    code_context, write_sensor_csv, Channel, DatasetDir, Experience, Manifest, ParticipantEntry, Phase, PhaseSegment,
    Samples, SensorRecording, SessionRecordings, TraitItems, ACC_COUNTS_PER_G,
};
use crate::util::mix_seed;

/// Cut points of the latent scale; reports are `1 + #{τ < L}`.
pub const REPORT_THRESHOLDS: [f64; 4] = [-1.0, -0.2, 0.6, 1.4];
pub const SESSION_START: f64 = 1_600_000_000.0;
pub const PHASE_SECONDS: (u32, u32) = (120, 360);
/// Standard deviation of each participant's latent offset.
pub const LATENT_OFFSET_SD: f64 = 0.5;
/// Latent shift of non-social and baseline phases.
pub const CALM_SHIFT: f64 = -0.6;

/// Log-odds-scale contributions of each context code to the latent value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ContextWeights {
    /// Indexed by group-size code (0 dyad, 1 group).
    pub group: [f64; 2],
    /// Indexed by evaluation code (0 none, 1 explicit).
    pub eval: [f64; 2],
    /// Indexed by phase code minus one (anticipatory, concurrent, post-event).
    pub phase: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectProfile {
    /// Fraction by which anxious phases shrink beat-to-beat variability.
    pub hrv_suppression: f64,
    /// Drop in mean NN (ms) when anxious.
    pub hr_shift: f64,
    /// Extra SCRs per minute when anxious.
    pub scr_rate_boost: f64,
    /// Extra accelerometer noise (g) when anxious.
    pub motion_sd_boost: f64,
    /// Skin-temperature offset (°C) when anxious.
    pub temp_drift: f64,
    pub context_weights: ContextWeights,
    /// Latent shift per standard deviation of SIAS above the scale midpoint.
    pub trait_coupling: f64,
    /// Standard deviation of the per-phase latent noise.
    pub noise_sd: f64,
}

impl EffectProfile {
    /// No physiological effects, no context or trait signal.
    pub fn null() -> Self {
        Self {
            hrv_suppression: 0.0,
            hr_shift: 0.0,
            scr_rate_boost: 0.0,
            motion_sd_boost: 0.0,
            temp_drift: 0.0,
            context_weights: ContextWeights::default(),
            trait_coupling: 0.0,
            noise_sd: 1.0,
        }
    }

    pub fn moderate() -> Self {
        Self {
            hrv_suppression: 0.2,
            hr_shift: 30.0,
            scr_rate_boost: 1.0,
            motion_sd_boost: 0.01,
            temp_drift: -0.1,
            context_weights: ContextWeights { group: [0.0, 0.2], eval: [0.0, 0.4], phase: [0.4, 0.2, -0.4] },
            trait_coupling: 0.4,
            noise_sd: 1.0,
        }
    }

    pub fn strong() -> Self {
        Self {
            hrv_suppression: 0.5,
            hr_shift: 80.0,
            scr_rate_boost: 3.0,
            motion_sd_boost: 0.03,
            temp_drift: -0.3,
            context_weights: ContextWeights { group: [0.0, 0.4], eval: [0.0, 0.9], phase: [0.7, 0.3, -0.6] },
            trait_coupling: 0.5,
            noise_sd: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.hrv_suppression) {
            return Err(format!("hrv_suppression {} outside [0, 1)", self.hrv_suppression));
        }
        if self.scr_rate_boost < 0.0 || self.motion_sd_boost < 0.0 || self.noise_sd < 0.0 {
            return Err("rates and spreads must be non-negative".into());
        }
        Ok(())
    }

    fn context_shift(&self, exp: Experience, phase: Phase) -> f64 {
        match code_context(exp, phase) {
            Ok(c) => {
                let w = &self.context_weights;
                w.group[c.group_size_code as usize] + w.eval[c.eval_code as usize] + w.phase[c.phase_code as usize - 1]
            }
            Err(_) => CALM_SHIFT,
        }
    }
}

/// Report for a latent value.
pub fn report_from_latent(l: f64) -> u8 {
    1 + REPORT_THRESHOLDS.iter().filter(|&&t| l > t).count() as u8
}

/// Probabilities of reports 1..=5 when the latent value is `N(mean, sd²)`.
pub fn ordinal_probabilities(mean: f64, sd: f64) -> [f64; 5] {
    let n = NormalDist::new(mean, sd).expect("positive sd");
    let c: Vec<f64> = REPORT_THRESHOLDS.iter().map(|&t| n.cdf(t)).collect();
    [c[0], c[1] - c[0], c[2] - c[1], c[3] - c[2], 1.0 - c[3]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTruth {
    pub experience: Experience,
    pub phase: Phase,
    pub latent: f64,
    pub report: u8,
    pub anxious: bool,
}

/// Latent quantities behind one participant's signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub participant: String,
    pub beat_times: Vec<f64>,
    pub scr_onsets: Vec<f64>,
    pub scr_peaks: Vec<f64>,
    pub phases: Vec<PhaseTruth>,
    pub latent_offset: f64,
}

#[derive(Debug, Clone)]
pub struct SynthParticipant {
    pub entry: ParticipantEntry,
    pub recordings: SessionRecordings,
    pub truth: GroundTruth,
}

fn items<R: Rng>(rng: &mut R, n: usize, centre: f64, lo: u8, hi: u8) -> Vec<u8> {
    (0..n)
        .map(|_| (centre + 0.8 * rng.sample::<f64, _>(StandardNormal)).round().clamp(lo as f64, hi as f64) as u8)
        .collect()
}

fn pulse(t: f64, centre: f64, width: f64) -> f64 {
    let z = (t - centre) / width;
    (-0.5 * z * z).exp()
}

/// SCR shape: raised-cosine rise to 1 over `rise` seconds, then exponential
/// decay with time constant `tau`.
fn scr_kernel(u: f64, rise: f64, tau: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u < rise {
        0.5 * (1.0 - (std::f64::consts::PI * u / rise).cos())
    } else {
        (-(u - rise) / tau).exp()
    }
}

fn participant_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, index as u64))
}

/// Traits, session layout and self-reports. Drawn first from the
/// participant's stream, so they match [`gen_participant`] exactly.
fn draw_entry(profile: &EffectProfile, rng: &mut ChaCha8Rng, index: usize) -> (ParticipantEntry, Vec<PhaseTruth>, f64) {
    let id = format!("S{:03}", index + 1);
    let z_trait: f64 = rng.sample(StandardNormal);
    let traits = TraitItems {
        sias: items(rng, 20, 2.25 + 0.6 * z_trait, 0, 4),
        bfne: items(rng, 8, 3.0 + 0.7 * z_trait, 1, 5),
        ders_sf: items(rng, 18, 2.5 + 0.5 * z_trait, 1, 5),
        dass_dep: items(rng, 7, 1.0 + 0.5 * z_trait, 0, 3),
    };
    let sias_total: f64 = traits.sias.iter().map(|&v| v as f64).sum();

    // The non-social video comes first, then the social experiences in
    // random order; four phases each.
    let mut social = Experience::SOCIAL.to_vec();
    social.shuffle(rng);
    let order: Vec<Experience> = std::iter::once(Experience::AloneVideo).chain(social).collect();
    let offset = LATENT_OFFSET_SD * rng.sample::<f64, _>(StandardNormal);
    let trait_term = profile.trait_coupling * (sias_total - 45.0) / 12.0;
    let mut t = SESSION_START;
    let mut segments = Vec::new();
    let mut phases = Vec::new();
    for &exp in &order {
        for phase in Phase::ALL {
            let dur = rng.random_range(PHASE_SECONDS.0..=PHASE_SECONDS.1) as f64;
            let eps: f64 = rng.sample(StandardNormal);
            let latent = offset + trait_term + profile.context_shift(exp, phase) + profile.noise_sd * eps;
            let report = report_from_latent(latent);
            segments.push(PhaseSegment {
                participant_id: id.clone(),
                experience: exp,
                phase,
                t_start: t,
                t_end: t + dur,
                self_report: Some(report),
            });
            phases.push(PhaseTruth { experience: exp, phase, latent, report, anxious: report > 3 });
            t += dur;
        }
    }
    (ParticipantEntry { id, traits, segments }, phases, offset)
}

/// Manifest entry and per-phase truth of one participant, without signals.
pub fn gen_entry(profile: &EffectProfile, seed: u64, index: usize) -> (ParticipantEntry, Vec<PhaseTruth>) {
    let (entry, phases, _) = draw_entry(profile, &mut participant_rng(seed, index), index);
    (entry, phases)
}

/// Manifest of a cohort, without signals.
pub fn gen_manifest(n: usize, profile: &EffectProfile, seed: u64) -> Manifest {
    Manifest { participants: (0..n).map(|i| gen_entry(profile, seed, i).0).collect() }
}

/// Generate one participant. The stream depends only on `(seed, index)`.
pub fn gen_participant(profile: &EffectProfile, seed: u64, index: usize) -> SynthParticipant {
    let mut rng = participant_rng(seed, index);
    let std_normal = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
    let (entry, phases, offset) = draw_entry(profile, &mut rng, index);
    let id = entry.id.clone();
    let segments = &entry.segments;
    let t = segments.last().expect("twenty segments").t_end;
    let t_end = t;
    let total = t_end - SESSION_START;
    let anxious_at = |time: f64| -> bool {
        let k = segments.partition_point(|s: &PhaseSegment| s.t_end <= time).min(segments.len() - 1);
        phases[k].anxious
    };

    // Heart: AR(1) variability plus respiratory modulation.
    let nn_mean = 800.0 + 70.0 * std_normal(&mut rng);
    let nn_sd = (40.0 + 8.0 * std_normal(&mut rng)).max(15.0);
    let rsa_amp = (25.0 + 6.0 * std_normal(&mut rng)).max(5.0);
    let resp_hz = rng.random_range(0.2..0.33);
    let phi: f64 = 0.6;
    let innov = nn_sd * (1.0 - phi * phi).sqrt();
    let mut beats = vec![SESSION_START + rng.random_range(0.0..0.5)];
    let mut ar = 0.0;
    while *beats.last().unwrap() < t_end + 2.0 {
        let tb = *beats.last().unwrap();
        let anx = anxious_at(tb);
        let damp = if anx { 1.0 - profile.hrv_suppression } else { 1.0 };
        ar = phi * ar + innov * std_normal(&mut rng);
        let rsa = rsa_amp * (2.0 * std::f64::consts::PI * resp_hz * (tb - SESSION_START)).sin();
        let shift = if anx { profile.hr_shift } else { 0.0 };
        let nn = (nn_mean - shift + damp * (ar + rsa)).clamp(400.0, 1500.0);
        beats.push(tb + nn / 1000.0);
    }
    let bvp_rate = Channel::Bvp.default_rate();
    let n_bvp = (total * bvp_rate).round() as usize;
    let amp = 40.0 * (1.0 + 0.2 * std_normal(&mut rng)).max(0.3);
    let mut bvp: Vec<f64> = (0..n_bvp).map(|_| 0.5 * std_normal(&mut rng)).collect();
    for &b in &beats {
        let lo = (((b - 0.3 - SESSION_START) * bvp_rate).floor().max(0.0)) as usize;
        let hi = ((((b + 0.6 - SESSION_START) * bvp_rate).ceil()) as usize).min(n_bvp);
        for (i, v) in bvp.iter_mut().enumerate().take(hi).skip(lo) {
            let ts = SESSION_START + i as f64 / bvp_rate;
            *v += amp * (pulse(ts, b, 0.07) + 0.35 * pulse(ts, b + 0.3, 0.1));
        }
    }
    let beat_times: Vec<f64> = beats.into_iter().filter(|&b| b < t_end).collect();

    // Skin conductance: tonic level and drift plus Poisson SCRs.
    let eda_rate = Channel::Eda.default_rate();
    let n_eda = (total * eda_rate).round() as usize;
    let tonic0 = (2.0 + 1.0 * std_normal(&mut rng)).max(0.3);
    let base_scr = rng.random_range(1.0..3.0);
    let mut scr_onsets = Vec::new();
    let mut scr_peaks = Vec::new();
    let mut scrs = Vec::new();
    for (seg, pt) in segments.iter().zip(&phases) {
        let rate = (base_scr + if pt.anxious { profile.scr_rate_boost } else { 0.0 }) / 60.0;
        let dur = seg.t_end - seg.t_start;
        let count = if rate > 0.0 {
            Poisson::new(rate * dur).expect("positive rate").sample(&mut rng) as usize
        } else {
            0
        };
        let mut ts: Vec<f64> = (0..count).map(|_| seg.t_start + rng.random_range(0.0..dur)).collect();
        ts.sort_by(f64::total_cmp);
        for on in ts {
            let a = rng.random_range(0.1..0.5);
            let rise = rng.random_range(1.0..2.0);
            scrs.push((on, a, rise));
            scr_onsets.push(on);
            scr_peaks.push(on + rise);
        }
    }
    let drift_period = rng.random_range(600.0..1200.0);
    let mut eda: Vec<f64> = (0..n_eda)
        .map(|i| {
            let ts = i as f64 / eda_rate;
            tonic0 + 0.15 * tonic0 * (2.0 * std::f64::consts::PI * ts / drift_period).sin() + 0.003 * std_normal(&mut rng)
        })
        .collect();
    for &(on, a, rise) in &scrs {
        let lo = ((on - SESSION_START) * eda_rate).floor().max(0.0) as usize;
        let hi = (((on + 30.0 - SESSION_START) * eda_rate).ceil() as usize).min(n_eda);
        for (i, v) in eda.iter_mut().enumerate().take(hi).skip(lo) {
            *v += a * scr_kernel(SESSION_START + i as f64 / eda_rate - on, rise, 4.0);
        }
    }

    // Accelerometer: gravity, sensor noise and occasional gestures, stored
    // on the device's 1/64 g grid.
    let acc_rate = Channel::Acc3.default_rate();
    let n_acc = (total * acc_rate).round() as usize;
    let gesture = Exp::new(0.5 / 60.0).expect("positive rate");
    let mut gestures = Vec::new();
    let mut tg = SESSION_START + gesture.sample(&mut rng);
    while tg < t_end {
        gestures.push(tg);
        tg += gesture.sample(&mut rng);
    }
    let tilt = [0.1 * std_normal(&mut rng), 0.1 * std_normal(&mut rng)];
    let mut gi = 0;
    let acc: Vec<[f64; 3]> = (0..n_acc)
        .map(|i| {
            let ts = SESSION_START + i as f64 / acc_rate;
            while gi < gestures.len() && gestures[gi] + 2.0 < ts {
                gi += 1;
            }
            let in_gesture = gi < gestures.len() && gestures[gi] <= ts;
            let sd = 0.02 + if anxious_at(ts) { profile.motion_sd_boost } else { 0.0 } + if in_gesture { 0.3 } else { 0.0 };
            let raw = [tilt[0] + sd * std_normal(&mut rng), tilt[1] + sd * std_normal(&mut rng), 1.0 + sd * std_normal(&mut rng)];
            raw.map(|v| (v * ACC_COUNTS_PER_G).round() / ACC_COUNTS_PER_G)
        })
        .collect();

    // Skin temperature: mean-reverting drift with an anxious-phase offset.
    let temp_rate = Channel::Temp.default_rate();
    let n_temp = (total * temp_rate).round() as usize;
    let t0 = 33.0 + 0.6 * std_normal(&mut rng);
    let mut walk = 0.0;
    let temp: Vec<f64> = (0..n_temp)
        .map(|i| {
            let ts = SESSION_START + i as f64 / temp_rate;
            walk = 0.999 * walk + 0.004 * std_normal(&mut rng);
            let shift = if anxious_at(ts) { profile.temp_drift } else { 0.0 };
            ((t0 + walk + shift + 0.01 * std_normal(&mut rng)) * 100.0).round() / 100.0
        })
        .collect();

    let rec = |ch, s| SensorRecording::new(ch, SESSION_START, ch.default_rate(), s).expect("generated stream is valid");
    SynthParticipant {
        entry,
        recordings: SessionRecordings {
            bvp: rec(Channel::Bvp, Samples::Scalar(bvp)),
            eda: rec(Channel::Eda, Samples::Scalar(eda)),
            temp: rec(Channel::Temp, Samples::Scalar(temp)),
            acc: rec(Channel::Acc3, Samples::Vector(acc)),
        },
        truth: GroundTruth { participant: id, beat_times, scr_onsets, scr_peaks, phases, latent_offset: offset },
    }
}

#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub seed: u64,
    pub profile: EffectProfile,
    pub participants: Vec<SynthParticipant>,
}

/// Generate `n` participants in parallel.
pub fn gen_cohort(n: usize, profile: &EffectProfile, seed: u64) -> SynthCohort {
    let participants = (0..n).into_par_iter().map(|i| gen_participant(profile, seed, i)).collect();
    SynthCohort { seed, profile: profile.clone(), participants }
}

impl SynthCohort {
    pub fn manifest(&self) -> Manifest {
        Manifest { participants: self.participants.iter().map(|p| p.entry.clone()).collect() }
    }

    pub fn sessions(&self) -> Vec<(ParticipantEntry, SessionRecordings)> {
        self.participants.iter().map(|p| (p.entry.clone(), p.recordings.clone())).collect()
    }

    pub fn truths(&self) -> Vec<&GroundTruth> {
        self.participants.iter().map(|p| &p.truth).collect()
    }

    /// Write `manifest.json`, per-participant sensor files and
    /// `ground_truth.json` under `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let ds = DatasetDir::new(dir);
        std::fs::write(ds.manifest_path(), self.manifest().to_json())?;
        self.participants.par_iter().try_for_each(|p| -> std::io::Result<()> {
            std::fs::create_dir_all(dir.join(&p.entry.id))?;
            for ch in Channel::ALL {
                let f = std::fs::File::create(ds.recording_path(&p.entry.id, ch))?;
                let mut w = std::io::BufWriter::new(f);
                write_sensor_csv(p.recordings.get(ch), &mut w)?;
                std::io::Write::flush(&mut w)?;
            }
            Ok(())
        })?;
        let truth = serde_json::to_string_pretty(&self.truths()).expect("truth serializes");
        std::fs::write(dir.join("ground_truth.json"), truth)?;
        Ok(())
    }
}

/// Generate a cohort and extract its feature table without keeping every
/// participant's recordings in memory at once. Also returns the manifest and
/// the ground truth.
pub fn cohort_table(
    n: usize,
    profile: &EffectProfile,
    seed: u64,
    mode: WindowMode,
) -> Result<(FeatureTable, Manifest, Vec<GroundTruth>), FeatureError> {
    let parts: Vec<(Vec<FeatureRow>, ParticipantEntry, GroundTruth)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = gen_participant(profile, seed, i);
            let rows = participant_rows(&p.entry, &p.recordings, mode)?;
            Ok((rows, p.entry, p.truth))
        })
        .collect::<Result<_, FeatureError>>()?;
    let mut table = FeatureTable::new(full_schema());
    let mut manifest = Manifest { participants: Vec::with_capacity(n) };
    let mut truths = Vec::with_capacity(n);
    for (rows, entry, truth) in parts {
        table.rows.extend(rows);
        manifest.participants.push(entry);
        truths.push(truth);
    }
    Ok((table, manifest, truths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_sensor_csv;
    use rand_distr::Normal;
    use statrs::distribution::ChiSquared;

    #[test]
    fn reports_follow_thresholds() {
        assert_eq!(report_from_latent(-5.0), 1);
        assert_eq!(report_from_latent(0.0), 3);
        assert_eq!(report_from_latent(1.0), 4);
        assert_eq!(report_from_latent(9.0), 5);
        let p = ordinal_probabilities(0.3, 1.2);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ordinal_draws_match_marginal() {
        let (mean, sd) = (0.2, 1.1);
        let probs = ordinal_probabilities(mean, sd);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let dist = Normal::new(mean, sd).unwrap();
        let mut counts = [0f64; 5];
        let n = 10_000;
        for _ in 0..n {
            counts[report_from_latent(dist.sample(&mut rng)) as usize - 1] += 1.0;
        }
        let chi2: f64 = counts.iter().zip(probs).map(|(o, p)| (o - n as f64 * p).powi(2) / (n as f64 * p)).sum();
        let pval = 1.0 - ChiSquared::new(4.0).unwrap().cdf(chi2);
        assert!(pval > 0.001, "chi2 {chi2} p {pval}");
    }

    #[test]
    fn deterministic_and_complete() {
        let a = gen_participant(&EffectProfile::moderate(), 5, 0);
        let b = gen_participant(&EffectProfile::moderate(), 5, 0);
        assert_eq!(a.recordings, b.recordings);
        assert_eq!(a.entry, b.entry);
        assert_eq!(a.entry.segments.len(), 20);
        assert_eq!(a.entry.segments[0].experience, Experience::AloneVideo);
        for w in a.entry.segments.windows(2) {
            assert_eq!(w[0].t_end, w[1].t_start);
        }
        for s in &a.entry.segments {
            assert!((120.0..=360.0).contains(&s.duration()));
        }
        crate::ingest::trait_totals(&a.entry.traits).unwrap();
        let c = gen_participant(&EffectProfile::moderate(), 6, 0);
        assert_ne!(a.recordings.bvp, c.recordings.bvp);
    }

    #[test]
    fn entry_stream_matches_full_generation() {
        let p = gen_participant(&EffectProfile::strong(), 11, 4);
        let (entry, phases) = gen_entry(&EffectProfile::strong(), 11, 4);
        assert_eq!(entry, p.entry);
        assert_eq!(phases, p.truth.phases);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = gen_participant(&EffectProfile::null(), 1, 3);
        for ch in Channel::ALL {
            let mut buf = Vec::new();
            write_sensor_csv(p.recordings.get(ch), &mut buf).unwrap();
            let back = parse_sensor_csv(buf.as_slice(), ch).unwrap();
            assert_eq!(&back, p.recordings.get(ch), "{ch:?}");
        }
    }

    #[test]
    fn planted_states_reach_the_signals() {
        let p = gen_participant(&EffectProfile::strong(), 2, 1);
        let anx = p.truth.phases.iter().filter(|t| t.anxious).count();
        assert!(anx > 0 && anx < 20);
        for (s, t) in p.entry.segments.iter().zip(&p.truth.phases) {
            assert_eq!(s.self_report, Some(t.report));
        }
        assert!(p.truth.scr_onsets.windows(2).all(|w| w[0] <= w[1]));
    }
}
