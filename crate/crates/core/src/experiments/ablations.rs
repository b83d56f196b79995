//! Feature-set, sensor, top-K and outcome ablations over nested LOSO runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::featureset::{select_columns, FeatureSetVariant, FeatureTable, Outcome, Sensor};
use crate::ml::{nested_loso_cv, CvData, CvResult, MlError, ModelKind, ModelSpec, ModelSummary};

/// Number of most-selected features kept per cell.
pub const TOP_FEATURES: usize = 5;

/// The outcome processings contrasted in the feature-set ablation.
pub const PROCESSINGS: [Outcome; 2] = [Outcome::RawGt3, Outcome::WithinPersonGt0];

/// The alternative outcome definitions compared against each other.
pub const ALTERNATIVE_OUTCOMES: [Outcome; 3] = [Outcome::ExtremeEq5, Outcome::WithinPersonGt0, Outcome::AboveBaseline];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub variant: FeatureSetVariant,
    pub sensors: Vec<Sensor>,
    pub outcome: Outcome,
    pub k_grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellModel {
    pub kind: ModelKind,
    pub label: String,
    pub ba_mean: f64,
    pub ba_sd: f64,
    pub f1_mean: f64,
    pub f1_sd: f64,
    pub per_rep_ba: Vec<f64>,
    /// Most frequently selected features with their selection counts.
    pub top_features: Vec<(String, usize)>,
}

impl CellModel {
    pub fn from_summary(m: &ModelSummary) -> Self {
        let mut freq: Vec<(String, usize)> = m.feature_frequency.iter().map(|(k, &v)| (k.clone(), v)).collect();
        freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        freq.truncate(TOP_FEATURES);
        Self {
            kind: m.kind,
            label: m.label.clone(),
            ba_mean: m.ba_mean,
            ba_sd: m.ba_sd,
            f1_mean: m.f1_mean,
            f1_sd: m.f1_sd,
            per_rep_ba: m.per_rep.iter().map(|r| r.balanced_accuracy).collect(),
            top_features: freq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub key: CellKey,
    pub n_features: usize,
    pub n_rows: usize,
    pub n_participants: usize,
    pub models: Vec<CellModel>,
    pub error: Option<String>,
}

impl AblationCell {
    pub fn from_result(key: CellKey, r: &CvResult) -> Self {
        Self {
            key,
            n_features: r.feature_names.len(),
            n_rows: r.n_rows,
            n_participants: r.n_participants,
            models: r.models.iter().map(CellModel::from_summary).collect(),
            error: None,
        }
    }

    pub fn best(&self) -> Option<&CellModel> {
        self.models.iter().fold(None, |acc: Option<&CellModel>, m| match acc {
            Some(a) if a.ba_mean >= m.ba_mean => Some(a),
            _ => Some(m),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorCell {
    pub sensor: Sensor,
    pub with_context_trait: bool,
    pub cell: AblationCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKCell {
    /// A sensor name, or `all`.
    pub family: String,
    pub k: usize,
    pub cell: AblationCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub feature_sets: Vec<AblationCell>,
    pub sensors: Vec<SensorCell>,
    pub top_k: Vec<TopKCell>,
    pub outcomes: Vec<AblationCell>,
}

/// Cells computed so far in a run, keyed by their configuration.
#[derive(Debug, Default)]
pub struct CellCache {
    cells: BTreeMap<CellKey, AblationCell>,
    pub computed: usize,
    pub reused: usize,
}

impl CellCache {
    pub fn insert(&mut self, cell: AblationCell) {
        self.cells.insert(cell.key.clone(), cell);
    }

    /// Run (or reuse) the nested LOSO evaluation for one configuration.
    pub fn cell(
        &mut self,
        table: &FeatureTable,
        key: CellKey,
        specs: &[ModelSpec],
        cfg: &ExperimentConfig,
    ) -> AblationCell {
        if let Some(c) = self.cells.get(&key) {
            self.reused += 1;
            return c.clone();
        }
        self.computed += 1;
        let cell = match run_cell(table, &key, specs, cfg) {
            Ok(r) => AblationCell::from_result(key.clone(), &r),
            Err(e) => {
                log::warn!("ablation cell {key:?} failed: {e}");
                AblationCell {
                    key: key.clone(),
                    n_features: 0,
                    n_rows: 0,
                    n_participants: 0,
                    models: Vec::new(),
                    error: Some(e.to_string()),
                }
            }
        };
        self.cells.insert(key, cell.clone());
        cell
    }
}

pub fn run_cell(
    table: &FeatureTable,
    key: &CellKey,
    specs: &[ModelSpec],
    cfg: &ExperimentConfig,
) -> Result<CvResult, MlError> {
    let cols = select_columns(&table.schema, key.variant, &key.sensors);
    let mut cv = cfg.cv_config(key.outcome);
    cv.k_grid = key.k_grid.clone();
    let data = CvData::from_table(table, &cols, &cv)?;
    nested_loso_cv(&data, specs, &cv)
}

pub fn run_ablations(
    table: &FeatureTable,
    cfg: &ExperimentConfig,
    specs: &[ModelSpec],
    cache: &mut CellCache,
) -> AblationReport {
    let sensors = cfg.sensors.clone();
    let key = |variant, sensors: Vec<Sensor>, outcome, k_grid: Vec<usize>| CellKey { variant, sensors, outcome, k_grid };

    let mut feature_sets = Vec::new();
    for outcome in PROCESSINGS {
        for variant in FeatureSetVariant::ALL {
            feature_sets.push(cache.cell(table, key(variant, sensors.clone(), outcome, cfg.k_grid.clone()), specs, cfg));
        }
    }

    let mut sensor_cells = Vec::new();
    for &s in &sensors {
        for (variant, with) in [(FeatureSetVariant::BioOnly, false), (FeatureSetVariant::Full, true)] {
            let cell = cache.cell(table, key(variant, vec![s], cfg.outcome, cfg.k_grid.clone()), specs, cfg);
            sensor_cells.push(SensorCell { sensor: s, with_context_trait: with, cell });
        }
    }

    let mut families: Vec<(String, Vec<Sensor>)> = sensors.iter().map(|s| (s.as_str().to_string(), vec![*s])).collect();
    families.push(("all".to_string(), sensors.clone()));
    let mut top_k = Vec::new();
    for (family, fs) in families {
        let n_cols = select_columns(&table.schema, FeatureSetVariant::BioOnly, &fs).len();
        for &k in cfg.k_sweep.iter().filter(|&&k| k <= n_cols) {
            let cell = cache.cell(table, key(FeatureSetVariant::BioOnly, fs.clone(), cfg.outcome, vec![k]), specs, cfg);
            top_k.push(TopKCell { family: family.clone(), k, cell });
        }
    }

    let outcomes = ALTERNATIVE_OUTCOMES
        .iter()
        .map(|&o| cache.cell(table, key(FeatureSetVariant::Full, sensors.clone(), o, cfg.k_grid.clone()), specs, cfg))
        .collect();

    AblationReport { feature_sets, sensors: sensor_cells, top_k, outcomes }
}
