use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::models::{train, Model};
use super::{anova_f_scores, metrics, top_k, Matrix, MlError, ModelKind, ModelSpec, Params};
use crate::featureset::{clip_outliers, label_table, standardize_per_person, FeatureTable, Outcome};
use crate::util::{mean_sd, mix_seed, str_hash};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StandardizeMode {
    /// Within-person z-scores of the biobehavioral columns.
    #[default]
    Person,
    None,
}

impl StandardizeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StandardizeMode::Person => "person",
            StandardizeMode::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [StandardizeMode::Person, StandardizeMode::None].into_iter().find(|m| m.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    None,
    /// Fences fitted once on every row before cross-validation.
    #[default]
    AllData,
    /// Fences fitted on each training split and applied to its held-out rows.
    FoldSafe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub inner_folds: usize,
    pub k_grid: Vec<usize>,
    pub outcome: Outcome,
    pub standardize: StandardizeMode,
    pub clip: ClipMode,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            inner_folds: 5,
            k_grid: vec![5, 10, 20, 40],
            outcome: Outcome::RawGt3,
            standardize: StandardizeMode::Person,
            clip: ClipMode::AllData,
            repetitions: 10,
            seed: 0,
        }
    }
}

/// Design matrix, labels and grouping for one cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvData {
    pub x: Matrix,
    pub y: Vec<u8>,
    pub participants: Vec<String>,
    pub feature_names: Vec<String>,
    /// Columns eligible for winsorization.
    pub clip_mask: Vec<bool>,
}

impl CvData {
    /// Standardize, clip and label `table`, keeping `columns`. Rows lacking
    /// the reference an outcome needs are dropped.
    pub fn from_table(table: &FeatureTable, columns: &[usize], cfg: &CvConfig) -> Result<Self, MlError> {
        let mut t = if cfg.outcome == Outcome::AboveBaseline {
            table.filter_rows(|r| r.baseline_self_report.is_some())
        } else {
            table.clone()
        };
        if cfg.standardize == StandardizeMode::Person {
            t = standardize_per_person(&t);
        }
        if cfg.clip == ClipMode::AllData {
            t = clip_outliers(&t);
        }
        let y = label_table(&t, cfg.outcome)?;
        let data = t
            .rows
            .iter()
            .flat_map(|r| columns.iter().map(move |&j| r.values[j].unwrap_or(f64::NAN)))
            .collect();
        Ok(Self {
            x: Matrix::new(t.rows.len(), columns.len(), data),
            y,
            participants: t.rows.iter().map(|r| r.participant_id.clone()).collect(),
            feature_names: columns.iter().map(|&j| t.schema[j].name.clone()).collect(),
            clip_mask: columns.iter().map(|&j| t.schema[j].sensor.is_biobehavioral()).collect(),
        })
    }

    pub fn rows_where(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        (0..self.y.len()).filter(|&i| keep(i)).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> CvData {
        CvData {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            participants: rows.iter().map(|&i| self.participants[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            clip_mask: self.clip_mask.clone(),
        }
    }

    pub fn without_participant(&self, pid: &str) -> CvData {
        self.subset(&self.rows_where(|i| self.participants[i] != pid))
    }

    pub fn with_labels(&self, y: Vec<u8>) -> CvData {
        assert_eq!(y.len(), self.y.len());
        CvData { y, ..self.clone() }
    }

    /// Distinct participants, sorted.
    pub fn participant_ids(&self) -> Vec<String> {
        self.participants.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }
}

/// Training-side preprocessing: mean imputation, optional winsorization and
/// z-scoring, all fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prep {
    pub fill: Vec<f64>,
    pub fences: Vec<Option<(f64, f64)>>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Prep {
    fn fit(x: &Matrix, clip: Option<&[bool]>) -> Self {
        let d = x.cols;
        let mut fill = vec![0.0; d];
        let mut fences = vec![None; d];
        let mut center = vec![0.0; d];
        let mut scale = vec![1.0; d];
        for j in 0..d {
            let mut col: Vec<f64> = (0..x.rows).map(|i| x.get(i, j)).filter(|v| !v.is_nan()).collect();
            if !col.is_empty() {
                fill[j] = col.iter().sum::<f64>() / col.len() as f64;
            }
            col.resize(x.rows, fill[j]);
            if clip.is_some_and(|m| m[j]) {
                let mut s = col.clone();
                s.sort_by(f64::total_cmp);
                let (q1, q3) = (crate::util::quantile_sorted(&s, 0.25), crate::util::quantile_sorted(&s, 0.75));
                let iqr = q3 - q1;
                let f = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
                fences[j] = Some(f);
                for v in &mut col {
                    *v = v.clamp(f.0, f.1);
                }
            }
            let (m, sd) = mean_sd(&col);
            center[j] = m;
            scale[j] = if sd > 1e-12 { sd } else { 1.0 };
        }
        Self { fill, fences, center, scale }
    }

    fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..x.rows {
            for j in 0..x.cols {
                let mut v = x.get(i, j);
                if v.is_nan() {
                    v = self.fill[j];
                }
                if let Some((lo, hi)) = self.fences[j] {
                    v = v.clamp(lo, hi);
                }
                out.data[i * x.cols + j] = (v - self.center[j]) / self.scale[j];
            }
        }
        out
    }
}

/// A fitted outer-fold pipeline: preprocessing, selected columns and model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub kind: ModelKind,
    pub params: Params,
    pub k: usize,
    pub prep: Prep,
    pub selected: Vec<usize>,
    pub model: Model,
}

impl FittedPipeline {
    pub fn transform(&self, x: &Matrix) -> Matrix {
        self.prep.transform(x).select_cols(&self.selected)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<(u8, f64)> {
        let z = self.transform(x);
        (0..z.rows).map(|i| (self.model.predict(z.row(i)), self.model.score(z.row(i)))).collect()
    }
}

fn resolve_k_grid(grid: &[usize], d: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = grid.iter().copied().filter(|&k| k >= 1 && k <= d).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        ks.push(d);
    }
    ks
}

fn fold_seed(seed: u64, rep: usize, pid: &str, kind: ModelKind) -> u64 {
    mix_seed(mix_seed(seed, rep as u64 + 1), str_hash(pid) ^ str_hash(kind.as_str()))
}

/// Inner grouped cross-validation over hyperparameters and `k`; returns the
/// winning `(params, k)` by pooled balanced accuracy, earliest on ties.
fn select_hyperparameters(data: &CvData, spec: &ModelSpec, cfg: &CvConfig, seed: u64) -> (Params, usize) {
    let combos = spec.combinations();
    let ks = resolve_k_grid(&cfg.k_grid, data.x.cols);
    let pids = data.participant_ids();
    let nf = cfg.inner_folds.min(pids.len()).max(1);
    let fold_of: BTreeMap<&str, usize> = pids.iter().enumerate().map(|(i, p)| (p.as_str(), i % nf)).collect();
    let clip = (cfg.clip == ClipMode::FoldSafe).then_some(data.clip_mask.as_slice());
    let mut pooled: Vec<Vec<(Vec<u8>, Vec<u8>)>> = vec![vec![(Vec::new(), Vec::new()); ks.len()]; combos.len()];
    for f in 0..nf {
        let tr = data.rows_where(|i| fold_of[data.participants[i].as_str()] != f);
        let va = data.rows_where(|i| fold_of[data.participants[i].as_str()] == f);
        if va.is_empty() {
            continue;
        }
        let (xtr, ytr) = (data.x.select_rows(&tr), tr.iter().map(|&i| data.y[i]).collect::<Vec<_>>());
        let prep = Prep::fit(&xtr, clip);
        let ztr = prep.transform(&xtr);
        let zva = prep.transform(&data.x.select_rows(&va));
        let Ok(scores) = anova_f_scores(&ztr, &ytr) else { continue };
        let rank = top_k(&scores, scores.len());
        for (ki, &k) in ks.iter().enumerate() {
            let sel = &rank[..k];
            let (a, b) = (ztr.select_cols(sel), zva.select_cols(sel));
            for (ci, p) in combos.iter().enumerate() {
                let Ok(m) = train(spec.kind, p, &a, &ytr, mix_seed(seed, f as u64 + 1)) else { continue };
                let cell = &mut pooled[ci][ki];
                for (r, &i) in va.iter().enumerate() {
                    cell.0.push(data.y[i]);
                    cell.1.push(m.predict(b.row(r)));
                }
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for (ci, row) in pooled.iter().enumerate() {
        for (ki, (t, p)) in row.iter().enumerate() {
            if let Ok((ba, _)) = metrics(t, p) {
                if ba > best.0 {
                    best = (ba, ci, ki);
                }
            }
        }
    }
    (combos[best.1].clone(), ks[best.2])
}

/// Fit the pipeline for one outer fold using only rows of other
/// participants.
pub fn fit_outer_fold(
    data: &CvData,
    held_out: &str,
    spec: &ModelSpec,
    cfg: &CvConfig,
    rep: usize,
) -> Result<FittedPipeline, MlError> {
    let train_data = data.without_participant(held_out);
    let n1 = train_data.y.iter().filter(|&&v| v == 1).count();
    if n1 == 0 || n1 == train_data.y.len() {
        return Err(MlError::SingleClass);
    }
    let seed = fold_seed(cfg.seed, rep, held_out, spec.kind);
    let (params, k) = select_hyperparameters(&train_data, spec, cfg, seed);
    let clip = (cfg.clip == ClipMode::FoldSafe).then_some(train_data.clip_mask.as_slice());
    let prep = Prep::fit(&train_data.x, clip);
    let z = prep.transform(&train_data.x);
    let scores = anova_f_scores(&z, &train_data.y)?;
    let selected = top_k(&scores, k);
    let model = train(spec.kind, &params, &z.select_cols(&selected), &train_data.y, seed)?;
    Ok(FittedPipeline { kind: spec.kind, params, k, prep, selected, model })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub participant: String,
    pub rep: usize,
    pub params: Params,
    pub k: usize,
    pub selected: Vec<String>,
    /// `(row index, truth, prediction, score)` for every held-out row.
    pub predictions: Vec<(usize, u8, u8, f64)>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepMetrics {
    pub balanced_accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub kind: ModelKind,
    pub label: String,
    pub per_rep: Vec<RepMetrics>,
    pub ba_mean: f64,
    pub ba_sd: f64,
    pub f1_mean: f64,
    pub f1_sd: f64,
    pub folds: Vec<FoldRecord>,
    /// Times each feature was selected across outer folds and repetitions.
    pub feature_frequency: BTreeMap<String, usize>,
    /// Mean over repetitions of each participant's held-out balanced
    /// accuracy (plain accuracy when their rows hold one class).
    pub participant_accuracy: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub config: CvConfig,
    pub n_rows: usize,
    pub n_participants: usize,
    pub feature_names: Vec<String>,
    pub models: Vec<ModelSummary>,
}

fn run_fold(data: &CvData, pid: &str, spec: &ModelSpec, cfg: &CvConfig, rep: usize) -> FoldRecord {
    let test = data.rows_where(|i| data.participants[i] == pid);
    let mut rec = FoldRecord {
        participant: pid.to_string(),
        rep,
        params: Params::new(),
        k: 0,
        selected: Vec::new(),
        predictions: Vec::new(),
        skipped: None,
    };
    match fit_outer_fold(data, pid, spec, cfg, rep) {
        Ok(fit) => {
            let preds = fit.predict(&data.x.select_rows(&test));
            rec.predictions = test.iter().zip(preds).map(|(&i, (p, s))| (i, data.y[i], p, s)).collect();
            rec.selected = fit.selected.iter().map(|&j| data.feature_names[j].clone()).collect();
            rec.params = fit.params;
            rec.k = fit.k;
        }
        Err(e) => {
            log::warn!("fold {pid} ({}) skipped: {e}", spec.kind);
            rec.skipped = Some(e.to_string());
        }
    }
    rec
}

fn participant_score(preds: &[(usize, u8, u8, f64)]) -> Option<f64> {
    let t: Vec<u8> = preds.iter().map(|p| p.1).collect();
    let p: Vec<u8> = preds.iter().map(|p| p.2).collect();
    if t.is_empty() {
        return None;
    }
    Some(match metrics(&t, &p) {
        Ok((ba, _)) => ba,
        Err(_) => t.iter().zip(&p).filter(|(a, b)| a == b).count() as f64 / t.len() as f64,
    })
}

/// Nested leave-one-participant-out cross-validation for each model spec.
pub fn nested_loso_cv(data: &CvData, specs: &[ModelSpec], cfg: &CvConfig) -> Result<CvResult, MlError> {
    let pids = data.participant_ids();
    if pids.len() < 2 {
        return Err(MlError::InvalidData(format!("{} participants; need at least 2", pids.len())));
    }
    let n1 = data.y.iter().filter(|&&v| v == 1).count();
    if n1 == 0 || n1 == data.y.len() {
        return Err(MlError::SingleClass);
    }
    if cfg.repetitions == 0 || cfg.inner_folds == 0 {
        return Err(MlError::InvalidData("repetitions and inner folds must be positive".into()));
    }
    let mut models = Vec::new();
    for spec in specs {
        spec.validate()?;
        let unique_reps = if spec.kind.is_stochastic() { cfg.repetitions } else { 1 };
        let mut folds: Vec<FoldRecord> = Vec::new();
        for rep in 0..unique_reps {
            let recs: Vec<FoldRecord> = pids.par_iter().map(|p| run_fold(data, p, spec, cfg, rep)).collect();
            folds.extend(recs);
        }
        if unique_reps < cfg.repetitions {
            let base = folds.clone();
            for rep in 1..cfg.repetitions {
                folds.extend(base.iter().cloned().map(|mut r| {
                    r.rep = rep;
                    r
                }));
            }
        }
        let mut per_rep = Vec::new();
        let mut freq: BTreeMap<String, usize> = BTreeMap::new();
        let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for rep in 0..cfg.repetitions {
            let rf: Vec<&FoldRecord> = folds.iter().filter(|r| r.rep == rep).collect();
            let t: Vec<u8> = rf.iter().flat_map(|r| r.predictions.iter().map(|p| p.1)).collect();
            let p: Vec<u8> = rf.iter().flat_map(|r| r.predictions.iter().map(|p| p.2)).collect();
            let (ba, f1) = metrics(&t, &p)?;
            per_rep.push(RepMetrics { balanced_accuracy: ba, macro_f1: f1 });
            for r in &rf {
                for s in &r.selected {
                    *freq.entry(s.clone()).or_default() += 1;
                }
                if let Some(a) = participant_score(&r.predictions) {
                    acc.entry(r.participant.clone()).or_default().push(a);
                }
            }
        }
        let bas: Vec<f64> = per_rep.iter().map(|m| m.balanced_accuracy).collect();
        let f1s: Vec<f64> = per_rep.iter().map(|m| m.macro_f1).collect();
        let (ba_mean, ba_sd) = mean_sd(&bas);
        let (f1_mean, f1_sd) = mean_sd(&f1s);
        models.push(ModelSummary {
            kind: spec.kind,
            label: spec.kind.label().to_string(),
            per_rep,
            ba_mean,
            ba_sd,
            f1_mean,
            f1_sd,
            folds,
            feature_frequency: freq,
            participant_accuracy: acc.into_iter().map(|(k, v)| (k, crate::util::mean(&v))).collect(),
        });
    }
    Ok(CvResult {
        config: cfg.clone(),
        n_rows: data.y.len(),
        n_participants: pids.len(),
        feature_names: data.feature_names.clone(),
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n_p: usize, per: usize, effect: f64, seed: u64) -> CvData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut rows, mut y, mut pids) = (Vec::new(), Vec::new(), Vec::new());
        for p in 0..n_p {
            for i in 0..per {
                let c = ((i + p) % 2) as u8;
                rows.push(vec![
                    effect * c as f64 + rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    if i == 0 { f64::NAN } else { rng.random_range(-1.0..1.0) },
                ]);
                y.push(c);
                pids.push(format!("P{p}"));
            }
        }
        CvData {
            x: Matrix::from_rows(&rows),
            y,
            participants: pids,
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            clip_mask: vec![true; 3],
        }
    }

    fn quick_cfg() -> CvConfig {
        CvConfig { k_grid: vec![1, 3], repetitions: 2, ..CvConfig::default() }
    }

    #[test]
    fn two_participants_two_folds() {
        let d = toy(2, 10, 3.0, 1);
        let r = nested_loso_cv(&d, &[ModelSpec::default_for(ModelKind::LogisticRegression)], &quick_cfg()).unwrap();
        let m = &r.models[0];
        assert_eq!(m.folds.iter().filter(|f| f.rep == 0).count(), 2);
        assert_eq!(m.per_rep.len(), 2);
    }

    #[test]
    fn strong_signal_is_learned() {
        let d = toy(8, 12, 4.0, 2);
        let r = nested_loso_cv(&d, &[ModelSpec::default_for(ModelKind::LogisticRegression)], &quick_cfg()).unwrap();
        assert!(r.models[0].ba_mean > 0.9);
        assert_eq!(r.models[0].ba_sd, 0.0);
        assert!(r.models[0].feature_frequency["a"] >= 16);
    }

    #[test]
    fn deterministic_under_same_seed() {
        let d = toy(6, 8, 1.0, 3);
        let specs = [ModelSpec::default_for(ModelKind::RandomForest)];
        let a = nested_loso_cv(&d, &specs, &quick_cfg()).unwrap();
        let b = nested_loso_cv(&d, &specs, &quick_cfg()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn held_out_rows_do_not_reach_training() {
        let d = toy(6, 8, 1.0, 4);
        let spec = ModelSpec::default_for(ModelKind::MultilayerPerceptron);
        let cfg = CvConfig { clip: ClipMode::FoldSafe, ..quick_cfg() };
        let a = fit_outer_fold(&d, "P3", &spec, &cfg, 0).unwrap();
        let b = fit_outer_fold(&d.without_participant("P3"), "P3", &spec, &cfg, 0).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
