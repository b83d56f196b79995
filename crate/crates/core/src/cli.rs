//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{
    emit_report, file_digest, run_analyses, write_run_manifest, Analysis, ExperimentConfig, ExperimentResults, FileDigest,
    RunInfo,
};
use crate::featureset::{build_table_from_dir, FeatureSetVariant, FeatureTable, Outcome, Sensor, WindowMode};
use crate::ingest::{ingest_dataset, DatasetDir, Manifest};
use crate::ml::{grids_from_json, ModelKind, StandardizeMode};
use crate::synth::{gen_cohort, EffectProfile};

const PRECEDENCE: &str = "Settings are resolved as: command-line flags, then the --config file, then built-in defaults.\n\
Exit status: 0 on success, 1 on invalid input or flags, 2 on runtime failure.";

#[derive(Debug, Parser)]
#[command(name = "anxsense", version, about = "State social anxiety detection from wrist sensor recordings", after_help = PRECEDENCE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset directory and summarize it.
    Ingest(IoArgs),
    /// Extract the feature table.
    Features(FeatureArgs),
    /// Per-feature mixed-effects logistic screen.
    Screen(RunArgs),
    /// Nested leave-one-participant-out model comparison.
    Cv(RunArgs),
    /// Feature-set, sensor, top-K and outcome ablations.
    Ablate(RunArgs),
    /// Participant-level accuracy correlations.
    Individual(RunArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Re-emit report files from a previous run's results.json.
    Report(IoArgs),
    /// Every analysis.
    All(RunArgs),
}

#[derive(Debug, Args)]
pub struct IoArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_window)]
    pub window: Option<WindowMode>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 46)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Effect profile: null, moderate or strong.
    #[arg(long, default_value = "moderate")]
    pub profile: String,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Dataset directory holding manifest.json.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_outcome)]
    pub outcome: Option<Outcome>,
    /// Feature set: bio_only, bio_trait, bio_context or full.
    #[arg(long, value_parser = parse_variant)]
    pub features: Option<FeatureSetVariant>,
    #[arg(long, value_parser = parse_window)]
    pub window: Option<WindowMode>,
    #[arg(long, value_parser = parse_standardize)]
    pub standardize: Option<StandardizeMode>,
    /// Comma-separated model names.
    #[arg(long, value_delimiter = ',', value_parser = parse_model)]
    pub models: Option<Vec<ModelKind>>,
    /// Comma-separated candidate numbers of selected features.
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    /// Comma-separated K values for the top-K sweep.
    #[arg(long, value_delimiter = ',')]
    pub k_sweep: Option<Vec<usize>>,
    /// Comma-separated physiological sensors (ppg, eda, acc, temp).
    #[arg(long, value_delimiter = ',', value_parser = parse_sensor)]
    pub sensors: Option<Vec<Sensor>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub inner_folds: Option<usize>,
    /// Skip the whole-segment window variant.
    #[arg(long)]
    pub no_whole_window: bool,
    /// JSON file with experiment settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON file with hyperparameter grids keyed by model name.
    #[arg(long)]
    pub grids: Option<PathBuf>,
}

fn parse_outcome(s: &str) -> std::result::Result<Outcome, String> {
    Outcome::parse(s).ok_or_else(|| format!("unknown outcome {s}; expected raw_gt3, extreme_eq5, within_person or above_baseline"))
}

fn parse_variant(s: &str) -> std::result::Result<FeatureSetVariant, String> {
    FeatureSetVariant::parse(s).ok_or_else(|| format!("unknown feature set {s}; expected bio_only, bio_trait, bio_context or full"))
}

fn parse_window(s: &str) -> std::result::Result<WindowMode, String> {
    WindowMode::parse(s).ok_or_else(|| format!("unknown window mode {s}; expected averaged or whole"))
}

fn parse_standardize(s: &str) -> std::result::Result<StandardizeMode, String> {
    StandardizeMode::parse(s).ok_or_else(|| format!("unknown standardization {s}; expected person or none"))
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| {
        let names: Vec<&str> = ModelKind::ALL.iter().map(|m| m.as_str()).collect();
        format!("unknown model {s}; expected one of {}", names.join(", "))
    })
}

fn parse_sensor(s: &str) -> std::result::Result<Sensor, String> {
    Sensor::parse(s).filter(|x| x.is_biobehavioral()).ok_or_else(|| format!("unknown sensor {s}; expected ppg, eda, acc or temp"))
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Defaults, overlaid by the config file, overlaid by flags.
pub fn resolve_config(args: &RunArgs, analyses: &[Analysis]) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => read_json_file::<ExperimentConfig>(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.analyses = analyses.to_vec();
    if let Some(p) = &args.grids {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let grids = grids_from_json(&text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.grids.extend(grids);
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.outcome {
        cfg.outcome = v;
    }
    if let Some(v) = args.features {
        cfg.variant = v;
    }
    if let Some(v) = args.window {
        cfg.window = v;
    }
    if let Some(v) = args.standardize {
        cfg.standardize = v;
    }
    if let Some(v) = &args.models {
        cfg.models = v.clone();
    }
    if let Some(v) = &args.k_grid {
        cfg.k_grid = v.clone();
    }
    if let Some(v) = &args.k_sweep {
        cfg.k_sweep = v.clone();
    }
    if let Some(v) = &args.sensors {
        cfg.sensors = v.clone();
    }
    if let Some(v) = args.reps {
        cfg.repetitions = v;
    }
    if let Some(v) = args.inner_folds {
        cfg.inner_folds = v;
    }
    if args.no_whole_window {
        cfg.whole_window = false;
    }
    if let Some(o) = &args.out {
        cfg.output = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn input_digests(dir: &DatasetDir, manifest: &Manifest, root: &Path) -> Result<Vec<FileDigest>> {
    dir.input_files(manifest).iter().map(|f| file_digest(root, f)).collect()
}

fn load_table(dir: &DatasetDir, mode: WindowMode) -> Result<FeatureTable> {
    log::info!("extracting {mode} features");
    Ok(build_table_from_dir(dir, mode)?)
}

fn run_pipeline(args: &RunArgs, analyses: &[Analysis], argv: &[String]) -> Result<()> {
    let cfg = resolve_config(args, analyses)?;
    let dir = DatasetDir::new(&args.input);
    let manifest = dir.load_manifest()?;
    let needs_table = analyses.iter().any(|a| matches!(a, Analysis::Screen | Analysis::Cv | Analysis::Ablations | Analysis::Individual));
    let table = if needs_table { Some(load_table(&dir, cfg.window)?) } else { None };
    let wants_whole = cfg.whole_window
        && cfg.window != WindowMode::Whole
        && analyses.iter().any(|a| matches!(a, Analysis::Screen | Analysis::Cv));
    let whole = if wants_whole { Some(load_table(&dir, WindowMode::Whole)?) } else { None };
    let results = run_analyses(&cfg, &manifest, table.as_ref(), whole.as_ref())?;
    let run = RunInfo {
        command: argv.to_vec(),
        config: cfg.clone(),
        inputs: input_digests(&dir, &manifest, &args.input)?,
        parameters: BTreeMap::new(),
    };
    let written = emit_report(&results, &cfg.output, &run)?;
    log::info!("wrote {} files under {}", written.len(), cfg.output.display());
    Ok(())
}

fn default_out(out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from("results"))
}

fn run_ingest(a: &IoArgs, argv: &[String]) -> Result<()> {
    let dir = DatasetDir::new(&a.input);
    let (manifest, summary) = ingest_dataset(&dir)?;
    let out = default_out(&a.out);
    let path = out.join("ingest").join("summary.json");
    std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| Error::io(&out, e))?;
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n").map_err(|e| Error::io(&path, e))?;
    let run = RunInfo {
        command: argv.to_vec(),
        config: ExperimentConfig { output: out.clone(), ..ExperimentConfig::default() },
        inputs: input_digests(&dir, &manifest, &a.input)?,
        parameters: BTreeMap::new(),
    };
    write_run_manifest(&out, &run, &mut vec![path])?;
    println!(
        "{} participants, {} segments, {} self-reports",
        summary.participants, summary.segments, summary.reports
    );
    Ok(())
}

fn run_features(a: &FeatureArgs, argv: &[String]) -> Result<()> {
    let dir = DatasetDir::new(&a.input);
    let manifest = dir.load_manifest()?;
    let mode = a.window.unwrap_or_default();
    let table = load_table(&dir, mode)?;
    let out = default_out(&a.out);
    let fdir = out.join("features");
    let stem = format!("features_{mode}");
    table.save(&fdir, &stem)?;
    let run = RunInfo {
        command: argv.to_vec(),
        config: ExperimentConfig { window: mode, output: out.clone(), ..ExperimentConfig::default() },
        inputs: input_digests(&dir, &manifest, &a.input)?,
        parameters: BTreeMap::new(),
    };
    let mut written = vec![fdir.join(format!("{stem}.csv")), fdir.join(format!("{stem}.schema.json"))];
    write_run_manifest(&out, &run, &mut written)?;
    println!("{} rows, {} columns", table.rows.len(), table.schema.len());
    Ok(())
}

pub fn profile_by_name(name: &str) -> Result<EffectProfile> {
    match name {
        "null" => Ok(EffectProfile::null()),
        "moderate" => Ok(EffectProfile::moderate()),
        "strong" => Ok(EffectProfile::strong()),
        _ => Err(Error::Config(format!("unknown profile {name}; expected null, moderate or strong"))),
    }
}

fn run_synth(a: &SynthArgs, argv: &[String]) -> Result<()> {
    if a.n < 2 {
        return Err(Error::Config(format!("--n {} is below the minimum of 2", a.n)));
    }
    let profile = profile_by_name(&a.profile)?;
    let cohort = gen_cohort(a.n, &profile, a.seed);
    cohort.write(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let dir = DatasetDir::new(&a.out);
    let mut written = dir.input_files(&cohort.manifest());
    written.push(a.out.join("ground_truth.json"));
    let run = RunInfo {
        command: argv.to_vec(),
        config: ExperimentConfig { seed: a.seed, output: a.out.clone(), ..ExperimentConfig::default() },
        inputs: Vec::new(),
        parameters: BTreeMap::from([
            ("n".to_string(), a.n.to_string()),
            ("profile".to_string(), a.profile.clone()),
            ("effects".to_string(), serde_json::to_string(&profile)?),
        ]),
    };
    write_run_manifest(&a.out, &run, &mut written)?;
    println!("wrote {} participants to {}", a.n, a.out.display());
    Ok(())
}

fn run_report(a: &IoArgs, argv: &[String]) -> Result<()> {
    let results: ExperimentResults = read_json_file(&a.input.join("results.json"))?;
    let previous: crate::experiments::RunManifest = read_json_file(&a.input.join("run_manifest.json"))?;
    let out = default_out(&a.out);
    let run = RunInfo {
        command: argv.to_vec(),
        config: ExperimentConfig { output: out.clone(), ..previous.config },
        inputs: vec![file_digest(&a.input, &a.input.join("results.json"))?],
        parameters: previous.parameters,
    };
    emit_report(&results, &out, &run)?;
    Ok(())
}

fn dispatch(cli: &Cli, argv: &[String]) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => run_ingest(a, argv),
        Command::Features(a) => run_features(a, argv),
        Command::Screen(a) => run_pipeline(a, &[Analysis::Screen], argv),
        Command::Cv(a) => run_pipeline(a, &[Analysis::Cv], argv),
        Command::Ablate(a) => run_pipeline(a, &[Analysis::Ablations], argv),
        Command::Individual(a) => run_pipeline(a, &[Analysis::Individual], argv),
        Command::Synth(a) => run_synth(a, argv),
        Command::Report(a) => run_report(a, argv),
        Command::All(a) => run_pipeline(a, &Analysis::ALL, argv),
    }
}

/// Run the CLI on `args` (including the program name) and return the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = match cli.jobs {
        Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, &argv)),
            Err(e) => Err(Error::Config(format!("cannot start {j} workers: {e}"))),
        },
        None => dispatch(&cli, &argv),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
