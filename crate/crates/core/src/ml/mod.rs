//! Classifiers, ANOVA-F feature ranking and nested leave-one-participant-out
//! evaluation.

mod cv;
mod models;
mod tree;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cv::{
    fit_outer_fold, nested_loso_cv, ClipMode, CvConfig, CvData, CvResult, FittedPipeline, FoldRecord, ModelSummary, RepMetrics,
    StandardizeMode,
};
pub use models::{train, Model};
pub use tree::{Tree, TreeParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("training failed: {0}")]
    Training(String),
    #[error("metric undefined: {0}")]
    MetricUndefined(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidGrid(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error(transparent)]
    Feature(#[from] crate::featureset::FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GradientBoost,
    XgBoost,
    RandomForest,
    DecisionTree,
    MultilayerPerceptron,
    LogisticRegression,
    LinearSvm,
    KNearestNeighbors,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::GradientBoost,
        ModelKind::XgBoost,
        ModelKind::RandomForest,
        ModelKind::DecisionTree,
        ModelKind::MultilayerPerceptron,
        ModelKind::LogisticRegression,
        ModelKind::LinearSvm,
        ModelKind::KNearestNeighbors,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::GradientBoost => "gradient_boost",
            ModelKind::XgBoost => "xgboost",
            ModelKind::RandomForest => "random_forest",
            ModelKind::DecisionTree => "decision_tree",
            ModelKind::MultilayerPerceptron => "mlp",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::KNearestNeighbors => "knn",
        }
    }

    /// Display name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::GradientBoost => "Gradient Boost",
            ModelKind::XgBoost => "XGBoost",
            ModelKind::RandomForest => "Random Forest",
            ModelKind::DecisionTree => "Decision Tree",
            ModelKind::MultilayerPerceptron => "Multilayer Perceptron",
            ModelKind::LogisticRegression => "Logistic Regression",
            ModelKind::LinearSvm => "SVM Classifier",
            ModelKind::KNearestNeighbors => "K-Nearest Neighbors",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Whether training consumes randomness.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            ModelKind::RandomForest | ModelKind::MultilayerPerceptron | ModelKind::LinearSvm
        )
    }

    /// Hyperparameters the trainer reads.
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            ModelKind::LogisticRegression => &["C"],
            ModelKind::DecisionTree => &["max_depth", "min_leaf"],
            ModelKind::RandomForest => &["n_trees", "max_depth", "min_leaf"],
            ModelKind::GradientBoost | ModelKind::XgBoost => &["n_stages", "learning_rate", "max_depth", "lambda"],
            ModelKind::KNearestNeighbors => &["k"],
            ModelKind::MultilayerPerceptron => &["hidden", "alpha", "epochs", "learning_rate"],
            ModelKind::LinearSvm => &["lambda", "epochs"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type Params = BTreeMap<String, f64>;
pub type Grid = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub grid: Grid,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, grid: Grid) -> Result<Self, MlError> {
        let spec = Self { kind, grid };
        spec.validate()?;
        Ok(spec)
    }

    pub fn default_for(kind: ModelKind) -> Self {
        let grid = default_grids().remove(kind.as_str()).expect("every kind has a default grid");
        Self { kind, grid }
    }

    /// Every grid key must be read by the trainer and the trainer's
    /// parameters must all be present.
    pub fn validate(&self) -> Result<(), MlError> {
        let wanted = self.kind.parameters();
        for (k, v) in &self.grid {
            if !wanted.contains(&k.as_str()) {
                return Err(MlError::InvalidGrid(format!("{} does not use `{k}`", self.kind)));
            }
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(MlError::InvalidGrid(format!("{}.{k} needs finite candidate values", self.kind)));
            }
        }
        if let Some(missing) = wanted.iter().find(|w| !self.grid.contains_key(**w)) {
            return Err(MlError::InvalidGrid(format!("{} grid lacks `{missing}`", self.kind)));
        }
        Ok(())
    }

    /// Cartesian product of the grid in key order.
    pub fn combinations(&self) -> Vec<Params> {
        let mut out = vec![Params::new()];
        for (k, vals) in &self.grid {
            out = out
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(k.clone(), *v);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

const DEFAULT_GRIDS: &str = include_str!("default_grids.json");

pub fn default_grids() -> BTreeMap<String, Grid> {
    serde_json::from_str(DEFAULT_GRIDS).expect("embedded grids parse")
}

/// Parse a grids JSON document (model name to parameter lists), filling
/// models it leaves out from the defaults.
pub fn grids_from_json(text: &str) -> Result<BTreeMap<String, Grid>, MlError> {
    let user: BTreeMap<String, Grid> =
        serde_json::from_str(text).map_err(|e| MlError::InvalidGrid(e.to_string()))?;
    let mut g = default_grids();
    for (k, v) in user {
        if ModelKind::parse(&k).is_none() {
            return Err(MlError::UnknownModel(k));
        }
        g.insert(k, v);
    }
    Ok(g)
}

/// Row-major dense matrix; missing values are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Self::new(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        Matrix::new(idx.len(), self.cols, idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect())
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let data = (0..self.rows).flat_map(|i| cols.iter().map(move |&j| self.get(i, j))).collect();
        Matrix::new(self.rows, cols.len(), data)
    }
}

/// One-way ANOVA F statistic of each column between the two label groups.
///
/// A column with zero within-group spread but different group means scores
/// `+inf`; a constant column scores 0.
pub fn anova_f_scores(x: &Matrix, y: &[u8]) -> Result<Vec<f64>, MlError> {
    let n1 = y.iter().filter(|&&v| v == 1).count();
    let n0 = y.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(MlError::SingleClass);
    }
    let n = y.len() as f64;
    Ok((0..x.cols)
        .map(|j| {
            let (mut s0, mut s1) = (0.0, 0.0);
            for i in 0..x.rows {
                if y[i] == 1 {
                    s1 += x.get(i, j);
                } else {
                    s0 += x.get(i, j);
                }
            }
            let (m0, m1) = (s0 / n0 as f64, s1 / n1 as f64);
            let m = (s0 + s1) / n;
            let mut within = 0.0;
            let mut total = 0.0;
            for i in 0..x.rows {
                let v = x.get(i, j);
                let mg = if y[i] == 1 { m1 } else { m0 };
                within += (v - mg) * (v - mg);
                total += (v - m) * (v - m);
            }
            let between = n0 as f64 * (m0 - m) * (m0 - m) + n1 as f64 * (m1 - m) * (m1 - m);
            if !(total > 1e-300) || between <= 1e-14 * total {
                0.0
            } else if within <= 1e-14 * total {
                f64::INFINITY
            } else {
                between / (within / (n - 2.0))
            }
        })
        .collect())
}

/// Indices of the `k` highest scores; ties keep column order.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k.min(scores.len()));
    idx
}

/// Balanced accuracy and macro-F1 of binary predictions.
pub fn metrics(truth: &[u8], pred: &[u8]) -> Result<(f64, f64), MlError> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(MlError::MetricUndefined("prediction and truth lengths differ or are empty".into()));
    }
    let mut c = [[0usize; 2]; 2];
    for (&t, &p) in truth.iter().zip(pred) {
        c[t as usize][p as usize] += 1;
    }
    let pos = c[1][0] + c[1][1];
    let neg = c[0][0] + c[0][1];
    if pos == 0 || neg == 0 {
        return Err(MlError::MetricUndefined("truths contain a single class".into()));
    }
    let ba = 0.5 * (c[1][1] as f64 / pos as f64 + c[0][0] as f64 / neg as f64);
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        if tp == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    let macro_f1 = 0.5 * (f1(c[1][1], c[0][1], c[1][0]) + f1(c[0][0], c[1][0], c[0][1]));
    Ok((ba, macro_f1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn anova_cases() {
        let x = Matrix::from_rows(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0].map(|v| vec![v, 7.0, if v > 3.0 { 1.0 } else { 0.0 }]));
        let y = [0, 0, 0, 1, 1, 1];
        let f = anova_f_scores(&x, &y).unwrap();
        assert!((f[0] - 13.5).abs() < 1e-12);
        assert_eq!(f[1], 0.0);
        assert_eq!(f[2], f64::INFINITY);
        assert_eq!(top_k(&f, 2), vec![2, 0]);
        assert_eq!(anova_f_scores(&x, &[1; 6]), Err(MlError::SingleClass));
    }

    #[test]
    fn metric_cases() {
        assert_eq!(metrics(&[1, 0, 1, 0], &[1, 0, 1, 0]).unwrap(), (1.0, 1.0));
        let (ba, f1) = metrics(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert!((ba - 0.75).abs() < 1e-15);
        assert!((f1 - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-15);
        assert_eq!(metrics(&[1, 1, 0, 0], &[0; 4]).unwrap().0, 0.5);
        assert!(metrics(&[1, 1], &[1, 1]).is_err());
    }

    #[test]
    fn default_grids_are_valid() {
        for k in ModelKind::ALL {
            let s = ModelSpec::default_for(k);
            s.validate().unwrap();
            assert!(!s.combinations().is_empty());
        }
        let mut g = Grid::new();
        g.insert("C".into(), vec![1.0]);
        g.insert("depth".into(), vec![1.0]);
        assert!(ModelSpec::new(ModelKind::LogisticRegression, g).is_err());
    }

    proptest! {
        #[test]
        fn anova_affine_invariant(
            vals in prop::collection::vec(-10.0f64..10.0, 8..40),
            scale in 0.01f64..100.0,
            shift in -100.0f64..100.0,
        ) {
            let y: Vec<u8> = (0..vals.len()).map(|i| (i % 3 == 0) as u8).collect();
            let a = Matrix::from_rows(&vals.iter().map(|v| vec![*v]).collect::<Vec<_>>());
            let b = Matrix::from_rows(&vals.iter().map(|v| vec![v * scale + shift]).collect::<Vec<_>>());
            let (fa, fb) = (anova_f_scores(&a, &y).unwrap()[0], anova_f_scores(&b, &y).unwrap()[0]);
            prop_assert!((fa - fb).abs() <= 1e-9 * fa.abs().max(1.0), "{} {}", fa, fb);
        }

        #[test]
        fn top_k_is_nested(scores in prop::collection::vec(prop_oneof![Just(0.0), Just(f64::INFINITY), 0.0f64..5.0], 1..30)) {
            for k in 0..scores.len() {
                let a = top_k(&scores, k);
                let b = top_k(&scores, k + 1);
                prop_assert!(a.iter().all(|i| b.contains(i)));
            }
        }
    }
}
