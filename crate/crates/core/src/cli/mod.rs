//! The `bayescoh` command.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0    | success |
//! | 1    | dataset validation found errors |
//! | 2    | malformed input (dataset, tuples, or model rows) |
//! | 3    | backend failure while scoring |
//! | 4    | insufficient data for a metric |
//! | 5    | backend cannot score at the requested temperature |
//! | 6    | I/O or configuration error |
//! | 64   | command-line usage error |

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::assembly::{self, score_tuples, AssemblyError, FailMode, RunManifest, TupleRecord};
use crate::backend::{BackendError, ENV_ENDPOINT};
use crate::dataset::{self, DatasetError, ValidationReport};
use crate::metrics::{
    self, binned_analysis, compute_report, temperature_sweep, Covariate, MetricsError,
};
use crate::report::{self, write_atomic, ReportError, ScatterSink};
use crate::tokenize::count_pieces;

pub use config::{
    build_backend, BackendSpec, ConfigFile, Overrides, RunConfig, DEFAULT_CONCURRENCY,
};

pub const ENV_CACHE: &str = "BAYESCOH_CACHE";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation failed with {} error(s)", .0.errors.len())]
    Validation(Box<ValidationReport>),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

fn backend_code(e: &BackendError) -> u8 {
    match e {
        BackendError::UnsupportedTemperature { .. } => 5,
        _ => 3,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Dataset(DatasetError::Io { .. }) => 6,
            CliError::Dataset(_) | CliError::Input(_) => 2,
            CliError::Assembly(e) => assembly_code(e),
            CliError::Metrics(e) => metrics_code(e),
            CliError::Report(ReportError::Metrics(e)) => metrics_code(e),
            CliError::Report(ReportError::InsufficientData(_)) => 4,
            CliError::Report(ReportError::Source { .. } | ReportError::Range { .. }) => 2,
            CliError::Report(ReportError::Sink { .. }) => 6,
            CliError::Config(_) | CliError::Io(_) => 6,
        }
    }
}

fn assembly_code(e: &AssemblyError) -> u8 {
    match (e.backend_error(), e) {
        (Some(b), _) => backend_code(b),
        (None, AssemblyError::Records { .. }) => 2,
        (None, _) => 6,
    }
}

fn metrics_code(e: &MetricsError) -> u8 {
    match e {
        MetricsError::Assembly(a) => assembly_code(a),
        MetricsError::InvalidArgument(_) => 6,
        // degenerate or too-short inputs
        MetricsError::Stats(_) | MetricsError::InsufficientData { .. } => 4,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bayescoh",
    version,
    about = "Bayesian coherence scoring for language models"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset against the structural rules and generation guidelines.
    Validate {
        dataset: PathBuf,
        /// Also check class token counts, using the built-in pre-tokenizer.
        #[arg(long)]
        token_check: bool,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Score every tuple and write tuples.jsonl and manifest.json.
    Score(RunArgs),
    /// Compute metrics, scatter, and bins from a tuples file.
    Metrics {
        /// tuples.jsonl (or a .csv written by this tool)
        tuples: PathBuf,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
        #[arg(long, default_value_t = metrics::DEFAULT_BIN_COUNT)]
        bins: usize,
        /// Also write scatter.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Score and summarize at several temperatures.
    SweepTemp {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated temperatures.
        #[arg(long, value_delimiter = ',', required = true)]
        temperatures: Vec<f64>,
    },
    /// Model comparison table and scaling / benchmark correlations.
    Meta {
        /// Model rows (.json or .csv).
        rows: PathBuf,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Print the prompt used to generate a new category with a chat model.
    EmitPrompt {
        /// Name of the category to generate, e.g. "painters".
        category: String,
        /// Exemplar dataset to embed (defaults to the bundled one).
        #[arg(long)]
        exemplar: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// uniform:<V> | oracle:<world.json> | noisy:<world.json>,<g>,<sd>,<seed> | remote:<url>,<id>
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// `standard` or prior=..;likelihood=..;posterior=.. (segments h, ce, c, ee, e)
    #[arg(long = "policy")]
    pub assembly_policy: Option<String>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long, env = ENV_CACHE)]
    pub cache: Option<PathBuf>,
    #[arg(long, env = ENV_ENDPOINT)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// fast | skip
    #[arg(long)]
    pub fail_mode: Option<FailMode>,
    /// Shuffle request order with this seed (values are unaffected).
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    /// The remote server renormalizes at temperatures other than 1.
    #[arg(long)]
    pub remote_temperature: bool,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => ConfigFile::read(p)?,
            None => ConfigFile::default(),
        };
        RunConfig::resolve(
            Overrides {
                dataset: self.dataset.clone(),
                backend: self.backend.clone(),
                temperature: self.temperature,
                assembly_policy: self.assembly_policy.clone(),
                concurrency: self.concurrency,
                cache: self.cache.clone(),
                endpoint: self.endpoint.clone(),
                output_dir: self.output_dir.clone(),
                fail_mode: self.fail_mode,
                shuffle_seed: self.shuffle_seed,
                remote_temperature: self.remote_temperature,
            },
            file,
        )
    }
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate {
            dataset,
            token_check,
            json,
        } => cmd_validate(dataset, *token_check, *json),
        Command::Score(args) => {
            let cfg = args.resolve()?;
            if args.print_config {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            cmd_score(&cfg).map(|_| ())
        }
        Command::Metrics {
            tuples,
            output_dir,
            bins,
            svg,
        } => cmd_metrics(tuples, output_dir, *bins, *svg).map(|_| ()),
        Command::SweepTemp { run, temperatures } => {
            let cfg = run.resolve()?;
            if run.print_config {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            cmd_sweep(&cfg, temperatures)
        }
        Command::Meta { rows, output_dir } => cmd_meta(rows, output_dir),
        Command::EmitPrompt { category, exemplar } => {
            let ex = match exemplar {
                Some(p) => dataset::parse_dataset(p)?,
                None => dataset::exemplar(),
            };
            println!("{}", dataset::emit_generation_prompt(category, &ex)?);
            Ok(())
        }
    }
}

fn print_validation(report: &ValidationReport, json: bool) {
    if json {
        println!("{}", report.to_json_pretty());
        return;
    }
    for f in &report.errors {
        println!("error   [{}] {}: {}", f.rule.id(), f.category, f.message);
    }
    for f in &report.warnings {
        println!("warning [{}] {}: {}", f.rule.id(), f.category, f.message);
    }
    if report.is_empty() {
        println!("ok: no findings");
    } else {
        println!(
            "{} error(s), {} warning(s)",
            report.errors.len(),
            report.warnings.len()
        );
    }
}

pub fn cmd_validate(path: &Path, token_check: bool, json: bool) -> Result<(), CliError> {
    let ds = dataset::parse_dataset(path)?;
    let counter = |s: &str| count_pieces(s);
    let report = if token_check {
        dataset::validate(&ds, Some(&counter))
    } else {
        dataset::validate(&ds, None)
    };
    print_validation(&report, json);
    if report.is_ok() {
        Ok(())
    } else {
        Err(CliError::Validation(Box::new(report)))
    }
}

/// Score the configured dataset; writes `tuples.jsonl` and `manifest.json`.
pub fn cmd_score(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let ds = dataset::load_dataset(&cfg.dataset)?;
    let backend = build_backend(cfg, &ds)?;
    let options = cfg.score_options()?;
    let run = score_tuples(&ds, backend.as_ref(), &options)?;
    let manifest = RunManifest::new(&ds, backend.id(), &options, &run);
    write_atomic(
        &cfg.output_dir.join("tuples.jsonl"),
        assembly::to_jsonl(&run.records).as_bytes(),
    )?;
    write_atomic(
        &cfg.output_dir.join("manifest.json"),
        manifest.to_json_pretty().as_bytes(),
    )?;
    eprintln!(
        "scored {} of {} tuples ({} skipped) with {} -> {}",
        run.records.len(),
        run.tuple_count,
        run.skipped.len(),
        backend.id(),
        cfg.output_dir.join("tuples.jsonl").display()
    );
    Ok(manifest)
}

fn read_records(path: &Path) -> Result<Vec<TupleRecord>, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("{}: no such file", path.display())));
    }
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    Ok(if is_csv {
        assembly::read_csv(path)?
    } else {
        assembly::read_jsonl(path)?
    })
}

/// Writes `metrics.json`, `table.txt`, `scatter.csv` + `scatter.json`
/// (+ `scatter.svg`), and one bins CSV per covariate.
pub fn cmd_metrics(
    tuples: &Path,
    out: &Path,
    bin_count: usize,
    svg: bool,
) -> Result<metrics::MetricsReport, CliError> {
    let records = read_records(tuples)?;
    let rep = compute_report(&records)?;
    write_atomic(&out.join("metrics.json"), rep.to_json_pretty().as_bytes())?;
    write_atomic(&out.join("table.txt"), rep.render_table().as_bytes())?;
    report::emit_scatter(&records, &ScatterSink::in_dir(out, "scatter", svg), "all")?;
    for cov in [Covariate::AvgEvidenceLoglik, Covariate::AvgClassLogprob] {
        match binned_analysis(&records, cov, bin_count) {
            Ok(bins) => {
                report::emit_bins(&bins, &out.join(format!("bins_{}.csv", cov.name())))?;
            }
            Err(e) if e.is_insufficient_data() => log::warn!("skipping {} bins: {e}", cov.name()),
            Err(e) => return Err(e.into()),
        }
    }
    print!("{}", rep.render_table());
    Ok(rep)
}

/// Writes `metrics_t<τ>.json` per temperature and `sweep.csv`.
pub fn cmd_sweep(cfg: &RunConfig, temperatures: &[f64]) -> Result<(), CliError> {
    let ds = dataset::load_dataset(&cfg.dataset)?;
    let backend = build_backend(cfg, &ds)?;
    let options = cfg.score_options()?;
    let points = temperature_sweep(&ds, backend.as_ref(), temperatures, &options)?;
    for p in &points {
        let name = format!("metrics_t{}.json", report::fmt_num(p.temperature));
        write_atomic(
            &cfg.output_dir.join(name),
            p.report.to_json_pretty().as_bytes(),
        )?;
    }
    report::emit_sweep(&points, &cfg.output_dir.join("sweep.csv"))?;
    print!("{}", report::sweep_csv(&points));
    Ok(())
}

/// Writes the model table files and `correlations.json`.
pub fn cmd_meta(rows_path: &Path, out: &Path) -> Result<(), CliError> {
    let rows = report::read_model_rows(rows_path)?;
    let corr = report::meta_correlations(&rows)?;
    let summary = report::emit_model_table(&rows, out)?;
    let json = serde_json::to_string_pretty(&corr).expect("correlations serialize");
    write_atomic(&out.join("correlations.json"), json.as_bytes())?;
    print!("{}", summary.text);
    println!(
        "\nlog10(params) vs BCC: r = {:.4}, p = {:.3e}, n = {}",
        corr.scaling.r, corr.scaling.p, corr.scaling.n
    );
    for b in &corr.benchmarks {
        match (b.r, b.p) {
            (Some(r), Some(p)) => println!(
                "{} vs BCC: r = {r:.4}, p = {p:.3e}, n = {}",
                b.benchmark, b.n
            ),
            _ => println!(
                "{} vs BCC: unavailable ({})",
                b.benchmark,
                b.note.as_deref().unwrap_or("")
            ),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let cases: Vec<(CliError, u8)> = vec![
            (CliError::Validation(Box::default()), 1),
            (CliError::Input("x".into()), 2),
            (
                CliError::Assembly(AssemblyError::Backend(BackendError::Protocol("x".into()))),
                3,
            ),
            (
                CliError::Metrics(MetricsError::InsufficientData { need: 3, got: 2 }),
                4,
            ),
            (
                CliError::Assembly(AssemblyError::Backend(
                    BackendError::UnsupportedTemperature {
                        backend: "b".into(),
                        temperature: 2.0,
                    },
                )),
                5,
            ),
            (CliError::Config("x".into()), 6),
        ];
        for (err, code) in cases {
            assert_eq!(err.exit_code(), code, "{err}");
        }
    }
}
