use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod report;

use report::{Outcome, Rendered};

/// Markov random graph distributions and negative-dependence tests.
#[derive(Parser, Debug)]
#[command(name = "ergmgeo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Probability of every edge subset.
    Enumerate(EnumerateArgs),
    /// Generating polynomial, optionally homogenized.
    Poly(PolyArgs),
    /// Strongly Rayleigh, Lorentzian and necessary-condition verdicts.
    Check(CheckArgs),
    /// Fit a model to an observed network, then check necessary conditions.
    Fit(FitArgs),
    /// Glauber-dynamics estimates of the expected statistics.
    Sample(SampleArgs),
    /// Bundled datasets.
    Datasets {
        #[command(subcommand)]
        action: DatasetsAction,
    },
    /// Graphviz rendering of a graph.
    ExportDot(ExportDotArgs),
}

#[derive(Subcommand, Debug)]
enum DatasetsAction {
    List(CommonArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Include wall-clock timing in the report.
    #[arg(long)]
    pub timing: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct GraphArgs {
    /// Edge-list file.
    #[arg(long, conflicts_with_all = ["dataset", "complete"])]
    pub graph: Option<PathBuf>,
    /// Dataset id (see `datasets list`).
    #[arg(long, conflicts_with = "complete")]
    pub dataset: Option<String>,
    /// Complete graph on N vertices.
    #[arg(long, value_name = "N")]
    pub complete: Option<usize>,
    /// Directory searched for `<id>.edges` before the bundled copy.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnumerateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// JSON parameter file: {"T": .., "beta_triangle": .., "beta_stars": [..]}.
    #[arg(long)]
    params: PathBuf,
    #[arg(long, default_value_t = ergm_geometry::model::DEFAULT_ENUMERATION_CAP)]
    max_edges: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct PolyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    params: PathBuf,
    /// Emit `z^m g(x / z)` instead of `g`.
    #[arg(long)]
    homogenize: bool,
    #[arg(long, default_value_t = ergm_geometry::model::DEFAULT_ENUMERATION_CAP)]
    max_edges: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Stability,
    Lorentzian,
    Necessary,
    All,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    params: PathBuf,
    #[arg(long, value_enum, default_value_t = Which::All)]
    which: Which,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wagner-gap evaluations for the falsifier.
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
    /// Relative eigenvalue tolerance for the Lorentzian test.
    #[arg(long, default_value_t = ergm_geometry::lorentzian::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = ergm_geometry::model::DEFAULT_ENUMERATION_CAP)]
    max_edges: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 2000)]
    pub sweeps: u64,
    #[arg(long, default_value_t = 200)]
    pub burnin: u64,
    #[arg(long, default_value_t = 1)]
    pub thin: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Largest star order K.
    #[arg(long, default_value_t = 2)]
    stars: usize,
    /// Leave the triangle coefficient at zero.
    #[arg(long)]
    no_triangle: bool,
    #[command(flatten)]
    chain: ChainArgs,
    /// Moment-gap tolerance.
    #[arg(long, default_value_t = 2e-3)]
    tol: f64,
    /// Maximum parameter updates.
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// Robbins-Monro gain numerator.
    #[arg(long, default_value_t = 10.0)]
    a0: f64,
    #[arg(long, default_value_t = 10.0)]
    k0: f64,
    /// Write the per-iteration trajectory as CSV.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    params: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
    /// Independent chains, run in parallel.
    #[arg(long, default_value_t = 1)]
    chains: u64,
    #[arg(long, default_value_t = ergm_geometry::model::DEFAULT_ENUMERATION_CAP)]
    max_edges: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct ExportDotArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Graph name in the DOT header.
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<Usage>().is_some() { 64 } else { 3 })
        }
    }
}

/// Input problems reported with the usage exit code.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(Usage(msg.into()).into())
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let common = match &cli.command {
        Command::Enumerate(a) => &a.common,
        Command::Poly(a) => &a.common,
        Command::Check(a) => &a.common,
        Command::Fit(a) => &a.common,
        Command::Sample(a) => &a.common,
        Command::Datasets { action: DatasetsAction::List(c) } => c,
        Command::ExportDot(a) => &a.common,
    }
    .clone();
    if let Some(t) = common.threads {
        if t == 0 {
            return usage("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("thread pool")?;
    }
    let start = Instant::now();
    let mut rendered = match cli.command {
        Command::Enumerate(a) => report::enumerate(&a.graph, &load_params(&a.params)?, a.max_edges)?,
        Command::Poly(a) => report::poly(&a.graph, &load_params(&a.params)?, a.homogenize, a.max_edges)?,
        Command::Check(a) => {
            if !(a.tol.is_finite() && a.tol >= 0.0) {
                return usage("--tol must be a finite number >= 0");
            }
            report::check(&a.graph, &load_params(&a.params)?, a.which, a.seed, a.budget, a.tol, a.max_edges)?
        }
        Command::Fit(a) => {
            if a.tol.is_nan() || a.tol < 0.0 {
                return usage("--tol must be >= 0");
            }
            if a.stars == 0 {
                return usage("--stars must be at least 1");
            }
            let opts = report::FitSettings {
                stars: a.stars,
                triangle: !a.no_triangle,
                chain: chain_config(&a.chain)?,
                tol: a.tol,
                iters: a.iters,
                a0: a.a0,
                k0: a.k0,
            };
            let (r, csv) = report::fit(&a.graph, &opts)?;
            if let Some(path) = &a.trajectory {
                std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            }
            r
        }
        Command::Sample(a) => {
            report::sample(&a.graph, &load_params(&a.params)?, &chain_config(&a.chain)?, a.chains, a.max_edges)?
        }
        Command::Datasets { action: DatasetsAction::List(_) } => report::datasets_list(),
        Command::ExportDot(a) => report::export_dot(&a.graph, a.name.as_deref())?,
    };
    if common.timing {
        rendered.add_timing(start.elapsed().as_secs_f64());
    }
    let text = match common.format {
        Format::Text => rendered.text.clone(),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&rendered.json)?;
            s.push('\n');
            s
        }
    };
    emit(&common, &text)?;
    Ok(rendered.outcome)
}

fn emit(common: &CommonArgs, text: &str) -> anyhow::Result<()> {
    match &common.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn chain_config(a: &ChainArgs) -> anyhow::Result<ergm_geometry::inference::ChainConfig> {
    ergm_geometry::inference::ChainConfig::new(a.sweeps, a.burnin, a.thin, a.seed)
        .or_else(|e| usage(e.to_string()))
}

fn load_params(path: &PathBuf) -> anyhow::Result<ergm_geometry::MarkovParams> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match ergm_geometry::MarkovParams::from_json(&text) {
        Ok(p) => Ok(p),
        Err(e) => usage(format!("{}: {e}", path.display())),
    }
}

impl Rendered {
    fn add_timing(&mut self, seconds: f64) {
        self.text.push_str(&format!("elapsed: {seconds:.3} s\n"));
        if let Some(obj) = self.json.as_object_mut() {
            obj.insert("timing".into(), serde_json::json!({ "elapsed_seconds": seconds }));
        }
    }
}

pub fn bail_usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}
