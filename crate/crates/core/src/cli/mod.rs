//! Command-line driver: `ingest`, `synth`, `benchmark` and `report`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 malformed or missing input,
//! 3 no samples assembled, 4 benchmark learner missing from the config.
//! Errors are printed to stderr as one line.

mod config;
mod plots;
mod render;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{RunConfig, SynthSource, CONFIG_VERSION};
pub use plots::{coverage_svg, skill_bars_svg, skill_heatmap_svg, write_plots, PLOT_FILES};
pub use render::{
    coverage_table, format_count, format_percent, importance_table, ranking_table, render_report,
    skills_table,
};

use crate::bench::{
    generate_synthetic, read_report, run_benchmark, write_report, BenchError, ScenarioKind,
    SyntheticScenario,
};
use crate::data::Dataset;
use crate::geo::{aggregate_daily_to_monthly, build_samples, read_gauges, read_grid, GeoError, GridField, SkipRecord};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NO_SAMPLES: i32 = 3;
pub const EXIT_NO_BENCHMARK: i32 = 4;

/// An error carrying its process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    /// `error[<code>]: <message>` on a single line.
    pub fn line(&self) -> String {
        let msg: String = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{}]: {msg}", self.code)
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        let code = match e {
            BenchError::MissingBenchmark(_) => EXIT_NO_BENCHMARK,
            BenchError::Config(_) | BenchError::Json(_) => EXIT_INPUT,
            _ => EXIT_RUNTIME,
        };
        CliError::new(code, e.to_string())
    }
}

fn input_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_INPUT, format!("{}: {e}", path.display()))
}

fn runtime_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_RUNTIME, format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "precip-uq", version, about = "Quantile regression benchmarking for merged precipitation data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble regression samples from gauge and gridded CSV files.
    Ingest(IngestArgs),
    /// Draw a synthetic dataset with known conditional quantiles.
    Synth(SynthArgs),
    /// Run the k-fold learner comparison and write a report directory.
    Benchmark(BenchmarkArgs),
    /// Render an existing report directory as tables and figures.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Gauge CSV: station_id,lat,lon,elevation_m,year,month,precip_mm.
    #[arg(long)]
    pub gauges: PathBuf,
    /// First gridded product: lat,lon,year,month[,day],value.
    #[arg(long)]
    pub grid_a: PathBuf,
    /// Second gridded product, same layout.
    #[arg(long)]
    pub grid_b: PathBuf,
    /// Output directory for dataset.jsonl and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario name: hetero or single_signal.
    #[arg(long = "synth", value_name = "NAME")]
    pub scenario: String,
    #[arg(long, value_name = "COUNT")]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON-lines dataset written by `ingest` or `synth`.
    #[arg(long, conflicts_with = "scenario")]
    pub dataset: Option<PathBuf>,
    /// Benchmark on a freshly drawn synthetic scenario instead of a file.
    #[arg(long = "synth", value_name = "NAME", requires = "n")]
    pub scenario: Option<String>,
    #[arg(long, value_name = "COUNT")]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub plots: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report directory written by `benchmark`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub plots: bool,
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            if code == 0 {
                print!("{e}");
            } else {
                eprintln!("{}", CliError::new(code, e.to_string().lines().next().unwrap_or("")).line());
            }
            return code;
        }
    };
    let out = std::io::stdout();
    let mut out = out.lock();
    match execute(cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.code
        }
    }
}

pub fn execute<W: Write>(cmd: Command, out: &mut W) -> Result<(), CliError> {
    match cmd {
        Command::Ingest(a) => cmd_ingest(&a, out),
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Benchmark(a) => cmd_benchmark(&a, out),
        Command::Report(a) => cmd_report(&a, out),
    }
}

fn geo_err(path: &Path, e: GeoError) -> CliError {
    match e {
        GeoError::NoSamples => CliError::new(EXIT_NO_SAMPLES, "no samples could be assembled"),
        e => input_err(path, e),
    }
}

fn load_grid(path: &Path, tag: &str) -> Result<GridField, CliError> {
    let f = File::open(path).map_err(|e| input_err(path, e))?;
    let g = read_grid(BufReader::new(f), tag).map_err(|e| geo_err(path, e))?;
    if g.is_daily() {
        aggregate_daily_to_monthly(&g).map_err(|e| geo_err(path, e))
    } else {
        Ok(g)
    }
}

fn write_dataset(dir: &Path, dataset: &Dataset, manifest: &serde_json::Value) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| runtime_err(dir, e))?;
    let path = dir.join("dataset.jsonl");
    let f = File::create(&path).map_err(|e| runtime_err(&path, e))?;
    let mut w = BufWriter::new(f);
    dataset.write_jsonl(&mut w).map_err(|e| runtime_err(&path, e))?;
    w.flush().map_err(|e| runtime_err(&path, e))?;
    let mpath = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes") + "\n";
    std::fs::write(&mpath, text).map_err(|e| runtime_err(&mpath, e))
}

fn cmd_ingest<W: Write>(a: &IngestArgs, out: &mut W) -> Result<(), CliError> {
    let f = File::open(&a.gauges).map_err(|e| input_err(&a.gauges, e))?;
    let gauges = read_gauges(BufReader::new(f)).map_err(|e| geo_err(&a.gauges, e))?;
    let grid_a = load_grid(&a.grid_a, "a")?;
    let grid_b = load_grid(&a.grid_b, "b")?;
    let built = build_samples(&gauges, &grid_a, &grid_b).map_err(|e| geo_err(&a.gauges, e))?;
    let d = &built.dataset;
    let manifest = serde_json::json!({
        "n_samples": d.len(),
        "n_stations": d.stations().len(),
        "n_skipped": built.skips.len(),
        "skips": built.skips,
    });
    write_dataset(&a.out, d, &manifest)?;
    writeln!(
        out,
        "{} samples from {} stations; {} station-months skipped",
        format_count(d.len()),
        format_count(d.stations().len()),
        format_count(built.skips.len())
    )
    .map_err(|e| runtime_err(&a.out, e))?;
    let mut reasons: std::collections::BTreeMap<&str, usize> = Default::default();
    for s in &built.skips {
        *reasons.entry(s.reason.as_str()).or_default() += 1;
    }
    for (reason, count) in reasons {
        writeln!(out, "  skipped {}: {reason}", format_count(count)).map_err(|e| runtime_err(&a.out, e))?;
    }
    Ok(())
}

fn scenario(name: &str, n: usize, seed: u64) -> Result<SyntheticScenario, CliError> {
    let kind = ScenarioKind::from_name(name).map_err(|e| CliError::new(EXIT_INPUT, e.to_string()))?;
    if n == 0 {
        return Err(CliError::new(EXIT_INPUT, "synthetic sample count must be positive"));
    }
    Ok(SyntheticScenario::new(kind, n, seed))
}

fn cmd_synth<W: Write>(a: &SynthArgs, out: &mut W) -> Result<(), CliError> {
    let s = scenario(&a.scenario, a.n, a.seed)?;
    let d = generate_synthetic(&s);
    let manifest = serde_json::json!({
        "scenario": s.kind.name(),
        "n_samples": d.len(),
        "n_stations": d.stations().len(),
        "seed": s.seed,
    });
    write_dataset(&a.out, &d, &manifest)?;
    writeln!(out, "{} synthetic samples ({}) from {} stations", format_count(d.len()), s.kind.name(), format_count(d.stations().len()))
        .map_err(|e| runtime_err(&a.out, e))
}

/// Skip log from the `manifest.json` next to a dataset, if there is one.
fn sibling_skips(dataset: &Path) -> Vec<SkipRecord> {
    let Some(dir) = dataset.parent() else { return Vec::new() };
    std::fs::read_to_string(dir.join("manifest.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| serde_json::from_value(v.get("skips")?.clone()).ok())
        .unwrap_or_default()
}

fn cmd_benchmark<W: Write>(a: &BenchmarkArgs, out: &mut W) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p).map_err(|e| CliError::new(EXIT_INPUT, e))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &a.dataset {
        cfg.dataset = Some(p.clone());
        cfg.synth = None;
    }
    if let Some(name) = &a.scenario {
        cfg.synth = Some(SynthSource {
            scenario: name.clone(),
            n: a.n.unwrap_or(0),
        });
        cfg.dataset = None;
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    cfg.plots |= a.plots;
    let bench_cfg = cfg.benchmark_config();
    bench_cfg.validate()?;

    let (dataset, skips) = match (&cfg.dataset, &cfg.synth) {
        (Some(p), _) => {
            let f = File::open(p).map_err(|e| input_err(p, e))?;
            let d = Dataset::read_jsonl(BufReader::new(f)).map_err(|e| input_err(p, e))?;
            (d, sibling_skips(p))
        }
        (None, Some(s)) => (generate_synthetic(&scenario(&s.scenario, s.n, cfg.seed)?), Vec::new()),
        (None, None) => return Err(CliError::new(EXIT_INPUT, "no dataset: pass --dataset or --synth NAME --n COUNT")),
    };
    if dataset.is_empty() {
        return Err(CliError::new(EXIT_NO_SAMPLES, "dataset has no samples"));
    }
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let mut report = run_benchmark(&dataset, &bench_cfg, jobs)?;
    report.skips = skips;

    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("report"));
    write_report(&dir, &report).map_err(|e| runtime_err(&dir, e))?;
    if cfg.plots {
        write_plots(&dir, &report).map_err(|e| runtime_err(&dir, e))?;
    }
    write!(out, "{}", ranking_table(&report)).map_err(|e| runtime_err(&dir, e))?;
    for f in &report.failures {
        writeln!(out, "failed: {} ({})", f.learner, f.reason).map_err(|e| runtime_err(&dir, e))?;
    }
    writeln!(out, "report written to {}", dir.display()).map_err(|e| runtime_err(&dir, e))
}

fn cmd_report<W: Write>(a: &ReportArgs, out: &mut W) -> Result<(), CliError> {
    let path = a.out.join("report.json");
    if !path.is_file() {
        return Err(CliError::new(EXIT_INPUT, format!("{}: no such report file", path.display())));
    }
    let report = read_report(&a.out).map_err(|e| input_err(&path, e))?;
    write!(out, "{}", render_report(&report)).map_err(|e| runtime_err(&path, e))?;
    if a.plots {
        write_plots(&a.out, &report).map_err(|e| runtime_err(&a.out, e))?;
    }
    Ok(())
}
