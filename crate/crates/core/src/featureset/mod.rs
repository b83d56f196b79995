//! Feature table assembly and the transforms applied before modelling.

mod schema;
mod table;
mod transform;
mod window;

use thiserror::Error;

pub use schema::{
    biobehavioral_schema, full_schema, select_columns, FeatureInfo, FeatureSetVariant, Sensor, CONTEXT_COLUMNS,
    TRAIT_COLUMNS,
};
pub use table::{
    build_table, build_table_from_dir, participant_rows, FeatureRow, FeatureTable, FlagKind, TableFlag, ID_COLUMNS,
};
pub use transform::{
    clip_outliers, label_outcome, label_table, standardize_per_person, Fences, Outcome,
};
pub use window::{
    average_windows, per_window_values, window_bounds, window_features, WindowMode, MIN_PARTIAL_WINDOW_S, N_BIO,
    WINDOW_S,
};

use crate::ingest::IngestError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("segment of {seconds} s yields no analysis window")]
    EmptyWindowSet { seconds: f64 },
    #[error("outcome {outcome} needs a reference value that row {row} lacks")]
    MissingReference { outcome: &'static str, row: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature table parse error: {0}")]
    Parse(String),
    #[error("feature table i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}
