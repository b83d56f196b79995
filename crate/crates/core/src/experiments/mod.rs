//! Cohort descriptives, context comparisons, the per-feature screen,
//! cross-validated model comparisons, ablations and the individual-level
//! analysis, plus report emission.

pub mod ablations;
pub mod comparisons;
pub mod descriptives;
pub mod individual;
pub mod report;
pub mod screen;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use ablations::{run_ablations, AblationCell, AblationReport, CellCache, CellKey, CellModel};
pub use comparisons::{context_comparisons, Comparison, ComparisonReport, Grouping};
pub use descriptives::{cohort_descriptives, DescriptiveReport};
pub use individual::{individual_analysis, IndividualReport};
pub use report::{emit_report, file_digest, write_run_manifest, FileDigest, RunInfo, RunManifest};
pub use screen::{per_feature_screen, screen_table, ScreenReport, ScreenRow};

use crate::error::{Error, Result};
use crate::featureset::{select_columns, FeatureSetVariant, FeatureTable, Outcome, Sensor, WindowMode};
use crate::ingest::Manifest;
use crate::ml::{default_grids, nested_loso_cv, ClipMode, CvConfig, CvData, CvResult, Grid, ModelKind, ModelSpec, StandardizeMode};
use crate::stats::GlmmOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Descriptives,
    Comparisons,
    Screen,
    Cv,
    Ablations,
    Individual,
}

impl Analysis {
    pub const ALL: [Analysis; 6] =
        [Analysis::Descriptives, Analysis::Comparisons, Analysis::Screen, Analysis::Cv, Analysis::Ablations, Analysis::Individual];

    pub fn as_str(self) -> &'static str {
        match self {
            Analysis::Descriptives => "descriptives",
            Analysis::Comparisons => "comparisons",
            Analysis::Screen => "screen",
            Analysis::Cv => "cv",
            Analysis::Ablations => "ablations",
            Analysis::Individual => "individual",
        }
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub analyses: Vec<Analysis>,
    pub variant: FeatureSetVariant,
    /// Physiological sensors whose features are used.
    pub sensors: Vec<Sensor>,
    pub window: WindowMode,
    /// Also run the screen and the model comparison on whole-segment
    /// windows.
    pub whole_window: bool,
    pub outcome: Outcome,
    pub standardize: StandardizeMode,
    pub clip: ClipMode,
    pub models: Vec<ModelKind>,
    /// Hyperparameter grids overriding the defaults, keyed by model name.
    pub grids: BTreeMap<String, Grid>,
    /// Candidate numbers of selected features for inner tuning.
    pub k_grid: Vec<usize>,
    /// Fixed numbers of selected features for the top-K sweep.
    pub k_sweep: Vec<usize>,
    pub inner_folds: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub glmm: GlmmOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            analyses: Analysis::ALL.to_vec(),
            variant: FeatureSetVariant::Full,
            sensors: Sensor::PHYSIOLOGICAL.to_vec(),
            window: WindowMode::Averaged,
            whole_window: true,
            outcome: Outcome::RawGt3,
            standardize: StandardizeMode::Person,
            clip: ClipMode::AllData,
            models: ModelKind::ALL.to_vec(),
            grids: BTreeMap::new(),
            k_grid: vec![5, 10, 20, 40],
            k_sweep: vec![1, 3, 5, 10, 20, 40],
            inner_folds: 5,
            repetitions: 10,
            seed: 0,
            output: PathBuf::from("results"),
            glmm: GlmmOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.analyses.is_empty() {
            return bad("no analyses selected".into());
        }
        if self.sensors.is_empty() {
            return bad("sensor subset is empty".into());
        }
        if let Some(s) = self.sensors.iter().find(|s| !s.is_biobehavioral()) {
            return bad(format!("{s} is not a physiological sensor"));
        }
        if self.k_sweep.is_empty() || self.k_sweep.windows(2).any(|w| w[0] >= w[1]) || self.k_sweep[0] == 0 {
            return bad(format!("k sweep {:?} must be positive and strictly ascending", self.k_sweep));
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return bad(format!("k grid {:?} must be non-empty and positive", self.k_grid));
        }
        if self.models.is_empty() {
            return bad("no models selected".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be positive".into());
        }
        if self.inner_folds < 2 {
            return bad("at least 2 inner folds are needed".into());
        }
        self.specs().map(|_| ())
    }

    pub fn runs(&self, a: Analysis) -> bool {
        self.analyses.contains(&a)
    }

    /// Model specs with the configured grids.
    pub fn specs(&self) -> Result<Vec<ModelSpec>> {
        let mut grids = default_grids();
        for (k, g) in &self.grids {
            if ModelKind::parse(k).is_none() {
                return Err(Error::Config(format!("grid given for unknown model {k}")));
            }
            grids.insert(k.clone(), g.clone());
        }
        self.models
            .iter()
            .map(|&k| ModelSpec::new(k, grids[k.as_str()].clone()).map_err(|e| Error::Config(e.to_string())))
            .collect()
    }

    pub fn cv_config(&self, outcome: Outcome) -> CvConfig {
        CvConfig {
            inner_folds: self.inner_folds,
            k_grid: self.k_grid.clone(),
            outcome,
            standardize: self.standardize,
            clip: self.clip,
            repetitions: self.repetitions,
            seed: self.seed,
        }
    }
}

/// One cross-validated model comparison with the configuration it used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub variant: FeatureSetVariant,
    pub sensors: Vec<Sensor>,
    pub window: WindowMode,
    pub result: CvResult,
}

impl CvReport {
    pub fn configuration(&self) -> String {
        format!("{}/{}/{}", self.variant, self.result.config.outcome, self.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExperimentResults {
    pub descriptives: Option<DescriptiveReport>,
    pub comparisons: Option<ComparisonReport>,
    pub screen: Option<ScreenReport>,
    pub screen_whole: Option<ScreenReport>,
    pub cv: Option<CvReport>,
    pub cv_whole: Option<CvReport>,
    pub ablations: Option<AblationReport>,
    pub individual: Option<IndividualReport>,
}

impl ExperimentResults {
    pub fn is_empty(&self) -> bool {
        self == &ExperimentResults::default()
    }
}

/// Cross-validate the configured variant on one table.
pub fn run_cv(table: &FeatureTable, window: WindowMode, cfg: &ExperimentConfig) -> Result<CvReport> {
    let cols = select_columns(&table.schema, cfg.variant, &cfg.sensors);
    let cv = cfg.cv_config(cfg.outcome);
    let data = CvData::from_table(table, &cols, &cv)?;
    let result = nested_loso_cv(&data, &cfg.specs()?, &cv)?;
    Ok(CvReport { variant: cfg.variant, sensors: cfg.sensors.clone(), window, result })
}

pub fn run_screen(table: &FeatureTable, window: WindowMode, cfg: &ExperimentConfig) -> ScreenReport {
    per_feature_screen(&screen_table(table, cfg.outcome, cfg.standardize), cfg.outcome, window, cfg.standardize, &cfg.glmm)
}

/// Run the selected analyses. `table` is built with `cfg.window`; `whole`
/// is the whole-segment table used when `cfg.whole_window` is set.
pub fn run_analyses(
    cfg: &ExperimentConfig,
    manifest: &Manifest,
    table: Option<&FeatureTable>,
    whole: Option<&FeatureTable>,
) -> Result<ExperimentResults> {
    cfg.validate()?;
    let mut res = ExperimentResults::default();
    let needs_table = [Analysis::Screen, Analysis::Cv, Analysis::Ablations, Analysis::Individual].iter().any(|&a| cfg.runs(a));
    if needs_table && table.is_none() {
        return Err(Error::Config("a feature table is required for the selected analyses".into()));
    }
    let whole = whole.filter(|_| cfg.whole_window && cfg.window != WindowMode::Whole);

    let ((descriptives, comparisons), (screen, screen_whole)) = rayon::join(
        || {
            (
                cfg.runs(Analysis::Descriptives).then(|| cohort_descriptives(manifest)),
                cfg.runs(Analysis::Comparisons).then(|| context_comparisons(manifest)),
            )
        },
        || {
            if !cfg.runs(Analysis::Screen) {
                return (None, None);
            }
            let t = table.expect("checked above");
            (Some(run_screen(t, cfg.window, cfg)), whole.map(|w| run_screen(w, WindowMode::Whole, cfg)))
        },
    );
    res.descriptives = descriptives;
    res.comparisons = comparisons;
    res.screen = screen;
    res.screen_whole = screen_whole;

    let mut cache = CellCache::default();
    if cfg.runs(Analysis::Cv) || cfg.runs(Analysis::Individual) {
        let t = table.expect("checked above");
        let cv = run_cv(t, cfg.window, cfg)?;
        cache.insert(AblationCell::from_result(
            CellKey { variant: cfg.variant, sensors: cfg.sensors.clone(), outcome: cfg.outcome, k_grid: cfg.k_grid.clone() },
            &cv.result,
        ));
        if cfg.runs(Analysis::Individual) {
            res.individual = Some(individual_analysis(&cv.result, manifest, None)?);
        }
        if cfg.runs(Analysis::Cv) {
            if let Some(w) = whole {
                res.cv_whole = Some(run_cv(w, WindowMode::Whole, cfg)?);
            }
            res.cv = Some(cv);
        }
    }
    if cfg.runs(Analysis::Ablations) {
        let t = table.expect("checked above");
        res.ablations = Some(run_ablations(t, cfg, &cfg.specs()?, &mut cache));
        log::info!("ablation cells: {} computed, {} reused", cache.computed, cache.reused);
    }
    Ok(res)
}
