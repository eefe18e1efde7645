//! `gridcast`: command-line front end for the forecasting benchmark.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error
//! (the message names the file), 3 numeric failure (the message names the
//! model and stage).

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use env_logger::Env;

use gridcast_core::dataset::{build_features, clean, gen_synthetic, prune_correlated, write_feature_csv, write_raw_csv};
use gridcast_core::harness::{
    cell_seed, load_report, markdown_tables, prepare, summary_csv, summary_json, write_charts, BenchmarkConfig,
    BenchmarkReport, ACCURACY_THRESHOLDS,
};
use gridcast_core::metrics::{accuracy_within_masked, compute_metrics_masked};
use gridcast_core::models::{ModelConfig, ModelKind, RegressorModel};
use gridcast_core::{Error, NormalizationParams, Target};

/// Environment variable consulted for the master seed when no flag or
/// config value sets it.
const SEED_ENV: &str = "GRIDCAST_SEED";
const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "gridcast", version, about = "Electricity price and demand forecasting benchmark")]
struct Cli {
    /// Log progress to stderr (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a deterministic synthetic market series as an input CSV
    Synth(SynthArgs),
    /// Build, clean and prune the feature table and write it as CSV
    Featurize(FeaturizeArgs),
    /// Train one model on one target and save it
    Train(TrainArgs),
    /// Evaluate a saved model on the test split
    Evaluate(EvaluateArgs),
    /// Run every enabled model on both targets and write the report
    Run(RunArgs),
    /// Re-render a stored report, optionally with SVG charts
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Number of half-hourly rows (at least 200)
    #[arg(long)]
    rows: usize,
    /// Master seed [default: $GRIDCAST_SEED or 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

/// Data source and pipeline options shared by every data-consuming command.
#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Market CSV (settlement_time, price, demand, optional predispatch columns)
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Use this many synthetic rows instead of an input file
    #[arg(long)]
    synthetic: Option<usize>,
    /// Master seed [default: config file, then $GRIDCAST_SEED, then 42]
    #[arg(long)]
    seed: Option<u64>,
    /// JSON configuration file; explicit flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FeaturizeArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model to train (awmlstm, catboost, gbrt, lstm, lightgbm, svr)
    #[arg(long)]
    model: ModelKind,
    /// Target to forecast (price or demand)
    #[arg(long)]
    target: Target,
    /// Model file; normalization parameters go next to it as <out>.norm.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model file written by `train`
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Md)]
    format: Format,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Report directory
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated models to run [default: all six]
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    /// Summary printed to stdout
    #[arg(long, value_enum, default_value_t = Format::Md)]
    format: Format,
    /// Worker threads [default: one per core]
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Directory written by `run`
    #[arg(long)]
    run: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Md)]
    format: Format,
    /// Also write two SVG charts per cell
    #[arg(long)]
    svg: bool,
    /// Where to put the charts [default: <run>/charts]
    #[arg(long, requires = "svg")]
    svg_dir: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    Md,
}

/// A failure with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => 1,
            Error::Numeric(_) => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Failure {
            code: 1,
            message: format!("{SEED_ENV}={v:?} is not an unsigned integer"),
        }),
        Err(_) => Ok(None),
    }
}

fn read_config(path: &Path) -> CliResult<(BenchmarkConfig, bool)> {
    let body = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let value: serde_json::Value = serde_json::from_slice(&body)
        .map_err(|e| Error::Data(format!("{}: not valid JSON: {e}", path.display())))?;
    let has_seed = value.get("seed").is_some();
    let config = serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok((config, has_seed))
}

/// Merge config file, flags and environment. Flags win over the file; the
/// seed falls back to the environment and then to the built-in default.
fn resolve_config(data: &DataArgs) -> CliResult<BenchmarkConfig> {
    let (mut config, file_seed) = match &data.config {
        Some(path) => read_config(path)?,
        None => (BenchmarkConfig::default(), false),
    };
    if let Some(path) = &data.input {
        config.input = Some(path.clone());
        config.synthetic_rows = None;
    }
    if let Some(n) = data.synthetic {
        config.synthetic_rows = Some(n);
        config.input = None;
    }
    config.seed = match data.seed {
        Some(s) => s,
        None if file_seed => config.seed,
        None => env_seed()?.unwrap_or(DEFAULT_SEED),
    };
    Ok(config)
}

fn usage_error(subcommand: &str, e: Error) -> Failure {
    let mut failure = Failure::from(e);
    if failure.code == 1 {
        let mut cmd = Cli::command();
        cmd.build();
        if let Some(sub) = cmd.find_subcommand_mut(subcommand) {
            failure.message = format!("{}\n\n{}", failure.message, sub.render_usage());
        }
    }
    failure
}

fn write_text(path: &Path, body: &str) -> CliResult {
    std::fs::write(path, body).map_err(|e| {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}

/// Write to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(body: &str) -> CliResult {
    let mut out = std::io::stdout().lock();
    match out.write_all(body.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure {
            code: 2,
            message: format!("stdout: {e}"),
        }),
        _ => Ok(()),
    }
}

fn norm_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".norm.json");
    PathBuf::from(s)
}

fn cmd_synth(args: SynthArgs) -> CliResult {
    let seed = match args.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(DEFAULT_SEED),
    };
    let series = gen_synthetic(args.rows, seed).map_err(|e| usage_error("synth", e))?;
    write_raw_csv(&series, &args.out)?;
    log::info!("wrote {} rows to {}", series.len(), args.out.display());
    Ok(())
}

fn cmd_featurize(args: FeaturizeArgs) -> CliResult {
    let config = resolve_config(&args.data)?;
    config.validate().map_err(|e| usage_error("featurize", e))?;
    let raw = config.load_raw()?;
    let table = prune_correlated(&clean(&build_features(&raw)?)?, config.correlation_threshold)?;
    write_feature_csv(&table, &args.out)?;
    emit(&format!(
        "{} rows, {} features ({} dropped as correlated)\n",
        table.n_rows(),
        table.n_cols(),
        table.dropped_columns.len()
    ))
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let mut config = resolve_config(&args.data)?;
    config.models = vec![args.model];
    config.validate().map_err(|e| usage_error("train", e))?;
    let raw = config.load_raw()?;
    let data = prepare(&raw, config.split_ratio, config.correlation_threshold)?;
    let model_config: ModelConfig = config.model_configs.get(args.model);
    let seed = cell_seed(config.seed, args.model, args.target);
    let model = RegressorModel::fit(&model_config, &data.train_scaled, args.target, seed)?;
    model.save(&args.out)?;
    let norm = norm_path(&args.out);
    let mut body = serde_json::to_string_pretty(&data.normalization).map_err(Error::from)?;
    body.push('\n');
    write_text(&norm, &body)?;
    emit(&format!(
        "trained {}/{} on {} rows (converged: {}, iterations: {}); wrote {} and {}\n",
        args.model,
        args.target,
        data.train.n_rows(),
        model.diagnostics.converged,
        model.diagnostics.iterations,
        args.out.display(),
        norm.display()
    ))
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    let config = resolve_config(&args.data)?;
    config.validate().map_err(|e| usage_error("evaluate", e))?;
    let model = RegressorModel::load(&args.model)?;
    let norm_file = norm_path(&args.model);
    let body = std::fs::read(&norm_file).map_err(|e| Error::Io {
        path: norm_file.clone(),
        source: e,
    })?;
    let norm: NormalizationParams =
        serde_json::from_slice(&body).map_err(|e| Error::Data(format!("{}: {e}", norm_file.display())))?;
    let raw = config.load_raw()?;
    let data = prepare(&raw, config.split_ratio, config.correlation_threshold)?;
    let scaled = norm.apply(&data.test)?;
    let range = norm.target_range(model.target);
    let predicted: Vec<Option<f64>> = model
        .predict(&scaled)?
        .into_iter()
        .map(|p| p.map(|v| range.invert(v)))
        .collect();
    let actual = data.test.target(model.target);
    let metrics = compute_metrics_masked(actual, &predicted)
        .map_err(|e| Failure::from(Error::Numeric(format!("{}/{} metrics: {e}", model.kind, model.target))))?;
    let acc5 = accuracy_within_masked(actual, &predicted, ACCURACY_THRESHOLDS[0])?;
    let acc10 = accuracy_within_masked(actual, &predicted, ACCURACY_THRESHOLDS[1])?;
    let body = match args.format {
        Format::Json => {
            let v = serde_json::json!({
                "model": model.kind,
                "target": model.target,
                "metrics": metrics,
                "accuracy_5": acc5,
                "accuracy_10": acc10,
            });
            serde_json::to_string_pretty(&v).map_err(Error::from)? + "\n"
        }
        Format::Csv => format!(
            "model,target,mse,mae,r2,mape,n_excluded,accuracy_5,accuracy_10\n{},{},{},{},{},{},{},{acc5},{acc10}\n",
            model.kind, model.target, metrics.mse, metrics.mae, metrics.r2, metrics.mape, metrics.n_excluded
        ),
        Format::Md => format!(
            "| Model | Target | MSE | MAE | R² | MAPE (%) | ±5% | ±10% |\n\
             |---|---|---:|---:|---:|---:|---:|---:|\n\
             | {} | {} | {:.2} | {:.2} | {:.4} | {:.2} | {acc5:.2}% | {acc10:.2}% |\n",
            model.kind, model.target, metrics.mse, metrics.mae, metrics.r2, metrics.mape
        ),
    };
    emit(&body)
}

fn print_report(report: &BenchmarkReport, format: Format) -> CliResult {
    let body = match format {
        Format::Json => summary_json(report)?,
        Format::Csv => summary_csv(report),
        Format::Md => markdown_tables(report),
    };
    emit(&body)
}

fn cmd_run(args: RunArgs) -> CliResult {
    let mut config = resolve_config(&args.data)?;
    if let Some(models) = args.models {
        config.models = models;
    }
    config.out_dir = Some(args.out.clone());
    config.threads = args.threads;
    config.validate().map_err(|e| usage_error("run", e))?;
    let report = gridcast_core::run_benchmark(&config)?;
    print_report(&report, args.format)?;
    log::info!("report written to {}", args.out.display());
    let failed: Vec<String> = report
        .failures()
        .map(|c| {
            let f = c.failure.as_ref().expect("failed cell has a failure");
            format!("{}/{} failed during {}: {}", c.model, c.target, f.stage, f.message)
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: failed.join("\n"),
        })
    }
}

fn cmd_report(args: ReportArgs) -> CliResult {
    let report = load_report(&args.run)?;
    print_report(&report, args.format)?;
    if args.svg {
        let dir = args.svg_dir.unwrap_or_else(|| args.run.join("charts"));
        let written = write_charts(&report, &args.run, &dir)?;
        log::info!("wrote {} charts to {}", written.len(), dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Featurize(a) => cmd_featurize(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Run(a) => cmd_run(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
