use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use maxent_core::dataset::DatasetHandle;
use maxent_core::eval::synth::{write_csv, CopulaConfig};
use maxent_core::eval::{
    build_workload, resolve_attrs, run_comparison, BaselineSpec, CountEstimator, NamedSummary, SampleBaseline,
    WorkloadSizes,
};
use maxent_core::exec::Execution;
use maxent_core::fixtures;
use maxent_core::query;
use maxent_core::schema::Schema;
use maxent_core::solver::SolverConfig;
use maxent_core::statistics::{Heuristic, PairStrategy, SelectionConfig};
use maxent_core::summary::{BuildConfig, Summary};

use crate::service::{self, ServiceConfig};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "maxent", version, about = "Maximum-entropy summaries for approximate counting queries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a summary from a CSV file.
    Build(BuildArgs),
    /// Answer a query from a summary.
    Query(QueryArgs),
    /// Compare summaries against sampling baselines on a workload.
    Eval(EvalArgs),
    /// Serve summaries over HTTP.
    Serve(ServeArgs),
    /// Write a small test dataset and its schema.
    #[command(hide = true)]
    Fixture(FixtureArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Number of attribute pairs with 2D statistics.
    #[arg(long, default_value_t = 0)]
    pub pairs: usize,
    /// 2D statistics per pair.
    #[arg(long, default_value_t = 0)]
    pub buckets: usize,
    #[arg(long, default_value = "composite")]
    pub heuristic: Heuristic,
    #[arg(long, default_value = "cover")]
    pub strategy: PairStrategy,
    /// Attributes never paired, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    #[arg(long, default_value_t = 30)]
    pub max_iterations: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the per-sweep solver trace as JSON.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub summary: PathBuf,
    pub sql: String,
    /// Print the answer as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// `NAME=PATH` or `PATH`; repeatable.
    #[arg(long)]
    pub summary: Vec<String>,
    /// `uniform:RATE` or `stratified:A,B:RATE`; repeatable.
    #[arg(long)]
    pub baseline: Vec<BaselineSpec>,
    /// Query template attributes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub attrs: Vec<String>,
    #[arg(long, default_value = "heavy=100,light=100,null=200")]
    pub workload: WorkloadSizes,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// `ID=PATH` or `PATH` (id is the file stem); repeatable.
    #[arg(long = "summary")]
    pub summaries: Vec<String>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = 8)]
    pub max_concurrent: usize,
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FixtureKind {
    /// Ten rows over three binary attributes.
    Binary,
    /// Correlated categorical columns.
    Copula,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(value_enum)]
    pub kind: FixtureKind,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "data")]
    pub name: String,
    #[arg(long, value_delimiter = ',', default_value = "30,30")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 5000)]
    pub rows: usize,
    /// Latent correlation between consecutive attributes; attributes k
    /// apart get its k-th power.
    #[arg(long, default_value_t = 0.8)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub skew: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn named(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((id, path)) => (id.to_string(), PathBuf::from(path)),
        None => {
            let path = PathBuf::from(spec);
            let id = path.file_stem().map_or(spec.to_string(), |s| s.to_string_lossy().into_owned());
            (id, path)
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn build(args: &BuildArgs) -> Result<(), CliError> {
    let schema = Schema::load(&args.schema)?;
    let data = DatasetHandle::ingest(&schema, &args.input)?;
    if data.dropped_rows > 0 || data.clamped_values > 0 {
        log::warn!("dropped {} rows with nulls, clamped {} values", data.dropped_rows, data.clamped_values);
    }
    let exclude = args
        .exclude
        .iter()
        .map(|name| schema.index_of(name))
        .collect::<Result<Vec<_>, _>>()?;
    let config = BuildConfig {
        selection: SelectionConfig {
            pairs: args.pairs,
            per_pair: args.buckets,
            heuristic: args.heuristic,
            strategy: args.strategy,
            exclude,
        },
        solver: SolverConfig {
            threshold: args.threshold,
            max_iterations: args.max_iterations,
            ..Default::default()
        },
    };
    let (summary, report) = Summary::build(&data, &config)?;
    summary.save(&args.out)?;
    let meta = summary.meta();
    println!("rows: {}", data.row_count());
    println!("statistics: {}", summary.statistics());
    for (a, b) in &meta.chosen_pairs {
        println!("pair: {a} x {b}");
    }
    println!("size: {}", meta.size);
    println!(
        "solver: {} sweeps, max residual {:.3e}, converged {}, pinned {}",
        meta.sweeps, meta.max_residual, meta.converged, meta.pinned
    );
    for r in &report.solver.trace {
        println!(
            "  sweep {:>3}: residual {:.3e} gap {:.3e} psi {:.9} ({:.1} ms)",
            r.sweep, r.max_residual, r.max_update_gap, r.psi, r.wall_ms
        );
    }
    if let Some(path) = &args.trace {
        write_file(path, &report.solver.trace_json())?;
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn run_query(args: &QueryArgs) -> Result<(), CliError> {
    let summary = Summary::load(&args.summary)?;
    let answer = query::run_sql(&summary, &args.sql)?;
    if args.json {
        println!("{}", serde_json::to_string(&answer).expect("answer serializes"));
        return Ok(());
    }
    let mut header: Vec<String> = answer.columns.clone();
    header.extend(["raw".to_string(), "rounded".to_string()]);
    println!("{}", header.join("\t"));
    for g in &answer.groups {
        let mut cells = g.values.clone();
        cells.push(format!("{}", g.raw));
        cells.push(g.rounded.to_string());
        println!("{}", cells.join("\t"));
    }
    println!("({} groups, {:.3} ms)", answer.groups.len(), answer.wall_ms);
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    if args.summary.is_empty() && args.baseline.is_empty() {
        return Err(CliError::Usage("give at least one --summary or --baseline".into()));
    }
    let schema = Schema::load(&args.schema)?;
    let data = DatasetHandle::ingest(&schema, &args.data)?;
    let attrs = resolve_attrs(&schema, &args.attrs)?;
    let workload = build_workload(&data, &attrs, args.workload, args.seed)?;
    let mut summaries = Vec::new();
    for spec in &args.summary {
        let (name, path) = named(spec);
        summaries.push(NamedSummary {
            name,
            summary: Summary::load(&path)?,
        });
    }
    let samples: Vec<SampleBaseline> = args
        .baseline
        .iter()
        .enumerate()
        .map(|(i, b)| b.draw(&data, args.seed.wrapping_add(i as u64 + 1)))
        .collect::<Result<_, _>>()?;
    let mut methods: Vec<&dyn CountEstimator> = Vec::new();
    methods.extend(summaries.iter().map(|s| s as &dyn CountEstimator));
    methods.extend(samples.iter().map(|s| s as &dyn CountEstimator));
    let report = run_comparison(&methods, schema.arity(), &workload, Execution::default())?;
    report.write(&args.out)?;
    println!("method\theavy_error\tlight_error\tf_measure\tmean_ms");
    for m in &report.methods {
        println!(
            "{}\t{:.4}\t{:.4}\t{:.4}\t{:.3}",
            m.method, m.heavy_error, m.light_error, m.f_measure, m.mean_wall_ms
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn serve(args: &ServeArgs) -> Result<(), CliError> {
    if args.summaries.is_empty() {
        return Err(CliError::Usage("give at least one --summary".into()));
    }
    let config = ServiceConfig {
        port: args.port,
        summaries: args.summaries.iter().map(|s| named(s)).collect(),
        max_concurrent: args.max_concurrent,
        timeout_ms: args.timeout_ms,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Service(e.to_string()))?;
    runtime.block_on(service::serve(config))
}

pub fn fixture(args: &FixtureArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Io {
        path: args.out_dir.display().to_string(),
        source,
    })?;
    let data = match args.kind {
        FixtureKind::Binary => fixtures::binary_dataset(),
        FixtureKind::Copula => {
            let mut config = CopulaConfig::new(args.sizes.clone(), args.rows, args.seed).skew(args.skew);
            for i in 0..args.sizes.len() {
                for j in i + 1..args.sizes.len() {
                    config = config.correlate(i, j, args.rho.powi((j - i) as i32));
                }
            }
            config.generate()?
        }
    };
    let csv = args.out_dir.join(format!("{}.csv", args.name));
    let schema = args.out_dir.join(format!("{}.json", args.name));
    write_csv(&data, &csv, &schema)?;
    println!("wrote {} and {}", csv.display(), schema.display());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Build(a) => build(a),
        Command::Query(a) => run_query(a),
        Command::Eval(a) => eval(a),
        Command::Serve(a) => serve(a),
        Command::Fixture(a) => fixture(a),
    }
}
