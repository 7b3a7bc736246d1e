use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use duqbench::analysis::{render, Analysis, ClusterAxis};
use duqbench::config::{DatasetConfig, StudyConfig, SyntheticGrid};
use duqbench::design::DesignType;
use duqbench::emulators::{EmulatorRegistry, EmulatorSpec, BUILTIN_METHODS, EXTERNAL_METHOD};
use duqbench::harness::{
    filter_sim_study, join_sim_study, load_dataset_csv, seeds_audit, Filter, Harness, ResultTable,
};
use duqbench::registry::FunctionRegistry;
use duqbench::seeding::{data_seed, test_design_seed, CvType, Scenario};
use duqbench::{Error, Result};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

const RESULTS_FILE: &str = "results.csv";
const MANIFEST_FILE: &str = "manifest.json";
const WORKERS_ENV: &str = "DUQBENCH_WORKERS";

#[derive(Parser)]
#[command(name = "duqbench", version, about = "Benchmark probabilistic emulators of computer models")]
struct Cli {
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a synthetic study over test functions.
    Run(RunArgs),
    /// Run a cross-validation or bootstrap study on a CSV dataset.
    RunData(RunDataArgs),
    /// Join and filter result tables, then write analysis artifacts.
    Analyze(AnalyzeArgs),
    /// Join result tables; the first table wins on duplicate rows.
    Join(JoinArgs),
    /// Keep the rows matching every `column=value` condition.
    Filter(FilterArgs),
    /// List the registered test functions and emulators.
    List(ListArgs),
    /// Print a scenario's canonical string and seed.
    Seed(SeedArgs),
}

#[derive(Args)]
struct StudyFlags {
    /// TOML study configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emulator methods with default hyperparameters; replaces the config's list.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Predictive draws per test point.
    #[arg(short = 'M', long = "draws")]
    m: Option<usize>,
    /// Worker threads; defaults to the config, then to $DUQBENCH_WORKERS, then 1.
    #[arg(long)]
    workers: Option<usize>,
    /// Seconds allowed per fit or predict call.
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    study: StudyFlags,
    #[arg(long, value_delimiter = ',')]
    functions: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    n_train: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    nsr: Vec<f64>,
    #[arg(long)]
    design_type: Option<DesignType>,
    /// Replications, e.g. `1,7` or `1-10`.
    #[arg(long, value_delimiter = ',')]
    reps: Vec<String>,
    #[arg(long)]
    n_test: Option<usize>,
}

#[derive(Args)]
struct RunDataArgs {
    #[command(flatten)]
    study: StudyFlags,
    /// Dataset CSV with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Dataset name used in results and seeds.
    #[arg(long)]
    name: Option<String>,
    /// Response column.
    #[arg(long)]
    response: Option<String>,
    #[arg(long)]
    cv_type: Option<CvType>,
    #[arg(long)]
    folds: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Result CSVs, joined in order.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    /// Analyses to write: rank, heatmap, pareto, cluster.
    #[arg(long, value_delimiter = ',', default_value = "rank,heatmap,pareto,cluster")]
    which: Vec<String>,
    /// `column=value` condition; repeatable.
    #[arg(short, long = "filter")]
    filters: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    /// Cluster methods or problems.
    #[arg(long)]
    axis: Option<ClusterAxis>,
    /// Study configuration supplying score and analysis settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct JoinArgs {
    #[arg(required = true)]
    results: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    results: PathBuf,
    #[arg(short, long = "filter")]
    filters: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ListArgs {
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SeedArgs {
    /// Canonical scenario string, e.g. `ishigami|1000|0|LHS|rep=7`.
    scenario: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(a) => cmd_run(a),
        Command::RunData(a) => cmd_run_data(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Join(a) => cmd_join(a),
        Command::Filter(a) => cmd_filter(a),
        Command::List(a) => cmd_list(a),
        Command::Seed(a) => cmd_seed(a),
    }
}

fn env_workers() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// Loads the config (if any) and applies the shared flag overrides.
fn base_config(f: &StudyFlags) -> Result<StudyConfig> {
    let mut cfg = match &f.config {
        Some(p) => StudyConfig::load(p)?,
        None => StudyConfig::new(Vec::new()),
    };
    if !f.methods.is_empty() {
        cfg.emulators = f.methods.iter().map(EmulatorSpec::new).collect();
    }
    if let Some(out) = &f.out {
        cfg.out = Some(out.clone());
    }
    if let Some(m) = f.m {
        cfg.m = m;
    }
    if let Some(t) = f.timeout {
        cfg.timeout = Some(t);
    }
    cfg.workers = match f.workers.or(cfg.workers) {
        Some(w) => Some(w),
        None => env_workers()?,
    };
    Ok(cfg)
}

fn out_dir(cfg: &StudyConfig) -> Result<PathBuf> {
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Error::Config("an output directory is required (--out or `out` in the config)".into()))?;
    fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
    Ok(out)
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn expand_reps(tokens: &[String]) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for t in tokens {
        let bad = || Error::Config(format!("replications must look like `3` or `1-10`, got `{t}`"));
        match t.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(t.trim().parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

fn write_manifest(dir: &Path, cfg: &StudyConfig, seeds: serde_json::Value) -> Result<()> {
    let manifest = json!({
        "version": duqbench::VERSION,
        "config": cfg,
        "seeds": seeds,
    });
    let path = dir.join(MANIFEST_FILE);
    let mut body = serde_json::to_string_pretty(&manifest)?;
    body.push('\n');
    fs::write(&path, body).map_err(|e| io_error(&path, e))
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut cfg = base_config(&a.study)?;
    let grid = cfg.synthetic.get_or_insert_with(|| SyntheticGrid {
        functions: Vec::new(),
        n_train: Vec::new(),
        nsr: vec![0.0],
        design_type: DesignType::Lhs,
        replications: vec![1],
    });
    if !a.functions.is_empty() {
        grid.functions = a.functions.clone();
    }
    if !a.n_train.is_empty() {
        grid.n_train = a.n_train.clone();
    }
    if !a.nsr.is_empty() {
        grid.nsr = a.nsr.clone();
    }
    if let Some(d) = a.design_type {
        grid.design_type = d;
    }
    if !a.reps.is_empty() {
        grid.replications = expand_reps(&a.reps)?;
    }
    if let Some(n) = a.n_test {
        cfg.n_test = n;
    }
    cfg.dataset = None;
    let harness = Harness::default();
    cfg.validate(&harness)?;
    let study = cfg.sim_study()?;
    let dir = out_dir(&cfg)?;
    let table = harness.run_sim_study(&study)?;
    table.write_path(&dir.join(RESULTS_FILE))?;
    let test_seeds: serde_json::Map<String, serde_json::Value> = study
        .fnames
        .iter()
        .map(|f| (f.clone(), json!(test_design_seed(f, study.n_test))))
        .collect();
    write_manifest(
        &dir,
        &cfg,
        json!({"scenarios": seeds_audit(&study.scenarios())?, "test_designs": test_seeds}),
    )?;
    say!("wrote {} rows to {}", table.len(), dir.join(RESULTS_FILE).display());
    Ok(())
}

fn cmd_run_data(a: RunDataArgs) -> Result<()> {
    let mut cfg = base_config(&a.study)?;
    let ds = match cfg.dataset.take() {
        Some(mut d) => {
            if let Some(p) = &a.data {
                d.path = p.clone();
            }
            if let Some(n) = &a.name {
                d.name = n.clone();
            }
            if let Some(r) = &a.response {
                d.response = r.clone();
            }
            d
        }
        None => DatasetConfig {
            path: a.data.clone().ok_or_else(|| Error::Config("--data is required".into()))?,
            name: a.name.clone().ok_or_else(|| Error::Config("--name is required".into()))?,
            response: a.response.clone().ok_or_else(|| Error::Config("--response is required".into()))?,
            cv_type: CvType::CrossValidation,
            folds: 10,
        },
    };
    cfg.dataset = Some(DatasetConfig {
        cv_type: a.cv_type.unwrap_or(ds.cv_type),
        folds: a.folds.unwrap_or(ds.folds),
        ..ds
    });
    cfg.synthetic = None;
    let harness = Harness::default();
    cfg.validate(&harness)?;
    let d = cfg.dataset.as_ref().expect("set above");
    let dataset = load_dataset_csv(&d.path, &d.name, &d.response)?;
    let study = cfg.data_study()?;
    let dir = out_dir(&cfg)?;
    let table = harness.run_sim_study_data(&dataset, &study)?;
    table.write_path(&dir.join(RESULTS_FILE))?;
    let scenarios: Vec<Scenario> = table.rows().iter().map(|r| r.scenario.clone()).collect();
    let mut audit = seeds_audit(&scenarios)?;
    audit.dedup();
    write_manifest(
        &dir,
        &cfg,
        json!({"folds": data_seed(&d.name, d.cv_type, d.folds), "scenarios": audit}),
    )?;
    say!("wrote {} rows to {}", table.len(), dir.join(RESULTS_FILE).display());
    Ok(())
}

fn read_joined(paths: &[PathBuf]) -> Result<ResultTable> {
    let mut tables = paths.iter().map(|p| {
        ResultTable::read_path(p).map_err(|e| match e {
            Error::Schema(m) => Error::Schema(format!("{}: {m}", p.display())),
            other => other,
        })
    });
    let first = tables.next().expect("clap requires one input")?;
    tables.try_fold(first, |acc, t| join_sim_study(&acc, &t?))
}

fn parse_filters(raw: &[String]) -> Result<Vec<Filter>> {
    raw.iter().map(|f| f.parse()).collect()
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let which: Vec<Analysis> = a.which.iter().map(|w| w.parse()).collect::<Result<_>>()?;
    let filters = parse_filters(&a.filters)?;
    let mut acfg = match &a.config {
        Some(p) => {
            let c = StudyConfig::load(p)?;
            let mut an = c.analysis;
            an.score = c.score;
            an
        }
        None => Default::default(),
    };
    if let Some(axis) = a.axis {
        acfg.cluster.axis = axis;
    }
    let table = filter_sim_study(&read_joined(&a.results)?, &filters)?;
    if table.is_empty() {
        return Err(Error::Config("no result rows remain after filtering".into()));
    }
    for p in render(&table, &which, &a.out, &acfg)? {
        say!("wrote {}", p.display());
    }
    Ok(())
}

fn write_table(table: &ResultTable, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(RESULTS_FILE);
    table.write_path(&path)?;
    say!("wrote {} rows to {}", table.len(), path.display());
    Ok(())
}

fn cmd_join(a: JoinArgs) -> Result<()> {
    write_table(&read_joined(&a.results)?, &a.out)
}

fn cmd_filter(a: FilterArgs) -> Result<()> {
    let filters = parse_filters(&a.filters)?;
    let table = filter_sim_study(&ResultTable::read_path(&a.results)?, &filters)?;
    write_table(&table, &a.out)
}

fn cmd_list(a: ListArgs) -> Result<()> {
    let functions = FunctionRegistry::builtin();
    let emulators = EmulatorRegistry::builtin();
    if a.json {
        let body = json!({
            "functions": functions.manifest(),
            "emulators": BUILTIN_METHODS,
            "external": EXTERNAL_METHOD,
        });
        say!("{}", serde_json::to_string_pretty(&body)?);
        return Ok(());
    }
    say!("functions:");
    for f in functions.manifest() {
        let tags: Vec<String> = f.tags.iter().map(|t| t.to_string()).collect();
        let status = if f.implemented { "" } else { " (no evaluator)" };
        say!("  {:<20} p={:<3} {}{status}", f.name, f.input_dim, tags.join(","));
    }
    say!("emulators:");
    for m in emulators.methods() {
        say!("  {m}");
    }
    Ok(())
}

fn cmd_seed(a: SeedArgs) -> Result<()> {
    let s: Scenario = a.scenario.parse()?;
    say!("{}\t{}", s.canonical_string(), s.seed()?);
    Ok(())
}
