//! Command definitions and their implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use reliance_core::analysis::Prepared;
use reliance_core::empirical::{select_k, SelectKConfig};
use reliance_core::estimators::Ranking;
use reliance_core::resample::{BootstrapConfig, ResampleUnit};
use reliance_core::synth::{analytic, generate, GeneratorConfig};
use reliance_core::Error as CoreError;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::ingest;
use crate::output::{bootstrap_csv, rendered, summary_text, Outputs};
use crate::pipeline::{self, AnalysisOptions};
use crate::report::{BootstrapSettings, Metadata, Report, SCHEMA_VERSION};
use crate::schema::SchemaConfig;

#[derive(Debug, Parser)]
#[command(name = "reliance", version, about = "Decision-theoretic analysis of AI-advised decision experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate benchmarks, reliance levels and losses for every condition.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic experiment and its population values.
    Simulate(SimulateArgs),
    /// Choose the number of signal clusters by holdout payoff.
    SelectK(SelectKArgs),
    /// Render tables and plot data from a report.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Overfit,
    Discretized,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Unit {
    Participant,
    Trial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RenderFormat {
    Text,
    Csv,
    All,
}

#[derive(Debug, Args)]
pub struct SelectionArgs {
    /// Candidate cluster counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32")]
    pub k_grid: Vec<usize>,
    /// Share of participants held out for scoring.
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    /// Independent holdout splits averaged per k.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Master seed for every random step.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SelectionArgs {
    fn config(&self) -> SelectKConfig {
        SelectKConfig {
            k_grid: self.k_grid.clone(),
            holdout_fraction: self.holdout,
            seed: self.seed,
            repeats: self.repeats,
            ..SelectKConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trial data (.csv or .jsonl).
    pub data: PathBuf,
    /// Column mapping and task declaration (.toml or .json).
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    pub mode: Mode,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Bootstrap iterations; 0 disables the bootstrap.
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    /// Units drawn per bootstrap iteration (default: all).
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long, value_enum, default_value_t = Unit::Participant)]
    pub unit: Unit,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Leave the generation time out of the report.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Rank every trial, agreements included, when building the mis-reliant benchmark.
    #[arg(long)]
    pub compat_alg6: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Generator configuration (.toml or .json).
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SelectKArgs {
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[command(flatten)]
    pub selection: SelectionArgs,
    /// Also write k_selection.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
    #[arg(long, value_enum, default_value_t = RenderFormat::All)]
    pub format: RenderFormat,
    /// Output directory for CSVs (default: next to the report).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(a) => analyze(&a).map(|_| ()),
        Command::Simulate(a) => simulate(&a).map(|_| ()),
        Command::SelectK(a) => select(&a),
        Command::Report(a) => report(&a),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct HashedConfig<'a> {
    schema: &'a SchemaConfig,
    options: &'a AnalysisOptions,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<Report> {
    let schema = SchemaConfig::load(&args.schema)?;
    let (dataset, validation) = ingest::load(&args.data, &schema)?;
    let seed = args.selection.seed;
    let bootstrap = (args.bootstrap > 0).then(|| BootstrapConfig {
        iterations: args.bootstrap,
        sample_size: args.sample_size,
        seed,
        unit: match args.unit {
            Unit::Participant => ResampleUnit::Participant,
            Unit::Trial => ResampleUnit::Trial,
        },
        ..BootstrapConfig::default()
    });
    let opts = AnalysisOptions {
        discretized: args.mode != Mode::Overfit,
        selection: args.selection.config(),
        bootstrap,
        ranking: if args.compat_alg6 { Ranking::AllTrials } else { Ranking::Disagreements },
        ambiguity: schema.ambiguity,
        seed,
    };
    let runs = pipeline::run(&dataset, &opts)?;

    let data_bytes = std::fs::read(&args.data).map_err(CliError::io(&args.data))?;
    let config_json = serde_json::to_vec(&HashedConfig { schema: &schema, options: &opts }).expect("options serialize");
    let metadata = Metadata {
        tool: env!("CARGO_PKG_NAME").into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        seed,
        modes: opts.modes(),
        ranking: opts.ranking,
        k_grid: opts.selection.k_grid.clone(),
        holdout_fraction: opts.selection.holdout_fraction,
        selection_repeats: opts.selection.repeats,
        bootstrap: opts.bootstrap.as_ref().map(|b| BootstrapSettings {
            iterations: b.iterations,
            sample_size: b.sample_size,
            unit: b.unit,
            levels: b.levels.clone(),
        }),
        config_hash: sha256_hex(&config_json),
        data_file: args.data.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
        data_sha256: sha256_hex(&data_bytes),
        generated_unix: (!args.no_timestamp).then(|| {
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
        }),
        warnings: validation.warnings.iter().map(ToString::to_string).collect(),
        notes: pipeline::notes(&dataset, &opts),
    };
    let mut samples = Vec::new();
    let mut conditions = Vec::new();
    for r in runs {
        samples.extend(r.samples);
        conditions.push(r.report);
    }
    let report = Report { schema_version: SCHEMA_VERSION.into(), metadata, conditions };

    let mut out = Outputs::default();
    out.add("report.json", report.to_json());
    for (name, bytes) in rendered(&report).files() {
        out.add(name, bytes);
    }
    if !samples.is_empty() {
        out.add("bootstrap_samples.csv", bootstrap_csv(&samples));
    }
    out.write_all(&args.out)?;
    print!("{}", summary_text(&report));
    Ok(report)
}

fn read_generator(path: &Path) -> Result<GeneratorConfig> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(|e| CliError::parse(path, e)),
        _ => toml::from_str(&text).map_err(|e| CliError::parse(path, e)),
    }
}

/// Writes `data.csv`, `schema.toml` and, when the oracle applies, `analytic.json`.
pub fn simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let mut cfg = read_generator(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let dataset = generate(&cfg)?;
    let (csv, schema) = ingest::to_canonical_csv(&dataset);
    let mut out = Outputs::default();
    out.add("data.csv", csv);
    out.add("schema.toml", schema.to_toml());
    match analytic(&cfg) {
        Ok(q) => {
            let mut json = serde_json::to_string_pretty(&q).expect("analytic quantities serialize");
            json.push('\n');
            out.add("analytic.json", json);
        }
        Err(CoreError::UnsupportedOracle(why)) => log::warn!("no analytic sidecar: {why}"),
        Err(e) => return Err(e.into()),
    }
    let written = out.write_all(&args.out)?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(written)
}

fn select(args: &SelectKArgs) -> Result<()> {
    let schema = SchemaConfig::load(&args.schema)?;
    let (dataset, _) = ingest::load(&args.data, &schema)?;
    let cfg = args.selection.config();
    let mut all = serde_json::Map::new();
    for (name, part) in dataset.partition() {
        let (prepared, _) = Prepared::new(&part, schema.ambiguity)?;
        let (_, diagnostics) = select_k(&prepared, &cfg)?;
        all.insert(name, serde_json::to_value(diagnostics).expect("diagnostics serialize"));
    }
    let mut json = serde_json::to_string_pretty(&all).expect("diagnostics serialize");
    json.push('\n');
    print!("{json}");
    if let Some(dir) = &args.out {
        let mut out = Outputs::default();
        out.add("k_selection.json", json);
        out.write_all(dir)?;
    }
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let report = Report::load(&args.report)?;
    if matches!(args.format, RenderFormat::Text | RenderFormat::All) {
        print!("{}", summary_text(&report));
    }
    if matches!(args.format, RenderFormat::Csv | RenderFormat::All) {
        let dir = match &args.out {
            Some(d) => d.clone(),
            None => args.report.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        rendered(&report).write_all(&dir)?;
    }
    Ok(())
}
