pub mod dsp;
pub mod ingest;
pub mod util;
pub mod ppg;
pub mod eda;
pub mod motion;
pub mod featureset;
pub mod stats;
pub mod ml;
pub mod synth;
pub mod error;
pub mod experiments;
pub mod cli;
