//! Command-line benchmark harness: single runs, parallel multi-seed sweeps,
//! and three-way method comparisons, all driven by a TOML config with flag
//! overrides. Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use rambo_core::{
    random_search, run_rambo, single_gp_bo, write_trace, Acquisition, Direction, Error,
    ObjectiveSpec, Result, RunConfig, RunTrace,
};

/// Default output directory when neither `--out` nor the config sets one.
pub const OUT_DIR_ENV: &str = "RAMBO_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "rambo",
    version,
    about = "Regime-adaptive mixture Bayesian optimization benchmark harness"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one optimization run and write trace.csv/convergence.csv/summary.json.
    Run(RunArgs),
    /// Run one or more methods across consecutive seeds in parallel and
    /// aggregate per-iteration convergence into aggregate.csv.
    Sweep(SweepArgs),
    /// Compare the mixture engine against both baselines under paired seeds
    /// and emit a comparison table.
    Bench(BenchArgs),
    /// List available objectives, acquisition functions, and methods.
    List,
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (TOML); omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Total evaluation budget, initialization included.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    init_count: Option<usize>,
    /// ei | pi | ucb | ts | mes.
    #[arg(long)]
    acquisition: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config and $RAMBO_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// rambo | single_gp | random.
    #[arg(long, default_value = "rambo")]
    method: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// First seed (defaults to the config seed).
    #[arg(long)]
    seed0: Option<u64>,
    /// Comma-separated method list; seeds are paired across methods.
    #[arg(long, value_delimiter = ',', default_value = "rambo")]
    methods: Vec<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    #[arg(long)]
    seed0: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Rambo,
    SingleGp,
    Random,
}

impl Method {
    const ALL: [Method; 3] = [Method::Rambo, Method::SingleGp, Method::Random];

    fn parse(s: &str) -> Result<Method> {
        match s {
            "rambo" => Ok(Method::Rambo),
            "single_gp" => Ok(Method::SingleGp),
            "random" => Ok(Method::Random),
            other => Err(Error::Config(format!(
                "unknown method '{other}'; valid names: rambo, single_gp, random"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Method::Rambo => "rambo",
            Method::SingleGp => "single_gp",
            Method::Random => "random",
        }
    }

    fn dispatch(self, cfg: &RunConfig) -> Result<RunTrace> {
        match self {
            Method::Rambo => run_rambo(cfg),
            Method::SingleGp => single_gp_bo(cfg),
            Method::Random => random_search(cfg),
        }
    }
}

/// Parse argv and execute; returns the process exit code.
pub fn main_from_args() -> u8 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) => 2,
        _ => 1,
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Bench(args) => cmd_bench(args),
        Command::List => {
            cmd_list();
            Ok(())
        }
    }
}

fn build_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_toml_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &common.objective {
        cfg.objective = v.clone();
    }
    if let Some(v) = common.dim {
        cfg.dim = v;
    }
    if let Some(v) = common.budget {
        cfg.budget = v;
    }
    if let Some(v) = common.init_count {
        cfg.init_count = v;
    }
    if let Some(v) = &common.acquisition {
        cfg.acquisition = v.clone();
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(dir) = &common.out {
        cfg.output_dir = Some(dir.clone());
    }
    cfg.validate()?;
    // Fail fast on unknown objective names before any computation or output.
    ObjectiveSpec::by_name(&cfg.objective, cfg.dim)?;
    Ok(cfg)
}

fn resolve_out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let method = Method::parse(&args.method)?;
    let cfg = build_config(&args.common)?;
    let dir = resolve_out_dir(&cfg);
    let trace = method.dispatch(&cfg)?;
    write_trace(&trace, &cfg, &dir)?;
    println!(
        "{} on {} (dim {}, budget {}, seed {}): best {:.6e} after {} evaluations → {}",
        method.name(),
        cfg.objective,
        cfg.dim,
        cfg.budget,
        cfg.seed,
        trace.best_value,
        trace.evaluations,
        dir.display()
    );
    Ok(())
}

/// Run `methods × seeds` in parallel; traces land in
/// `<dir>/<method>/seed-<s>/`. Seeds are shared across methods, so
/// comparisons are paired by construction.
fn run_matrix(
    cfg: &RunConfig,
    methods: &[Method],
    seed0: u64,
    seeds: usize,
    dir: &Path,
) -> Result<Vec<(Method, u64, RunTrace)>> {
    if seeds == 0 {
        return Err(Error::Config("need at least one seed".into()));
    }
    let jobs: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| (0..seeds as u64).map(move |i| (m, seed0 + i)))
        .collect();
    let results: Vec<Result<(Method, u64, RunTrace)>> = jobs
        .par_iter()
        .map(|&(method, seed)| {
            let run_cfg = RunConfig { seed, ..cfg.clone() };
            method.dispatch(&run_cfg).map(|trace| (method, seed, trace))
        })
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        runs.push(r?);
    }
    for (method, seed, trace) in &runs {
        let run_cfg = RunConfig { seed: *seed, ..cfg.clone() };
        let run_dir = dir.join(method.name()).join(format!("seed-{seed}"));
        write_trace(trace, &run_cfg, &run_dir)?;
    }
    Ok(runs)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Standard error of the mean with the (n−1) variance convention.
fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

fn write_aggregate(
    runs: &[(Method, u64, RunTrace)],
    methods: &[Method],
    budget: usize,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["method", "t", "median_best", "se_best"]).map_err(|e| csv_io(path, e))?;
    for &method in methods {
        for t in 1..=budget {
            let mut bests: Vec<f64> = runs
                .iter()
                .filter(|(m, _, _)| *m == method)
                .map(|(_, _, trace)| trace.records[t - 1].best)
                .collect();
            let se = standard_error(&bests);
            let med = median(&mut bests);
            w.write_record([
                method.name().to_string(),
                t.to_string(),
                format!("{med:.17e}"),
                format!("{se:.17e}"),
            ])
            .map_err(|e| csv_io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut methods = Vec::new();
    for name in &args.methods {
        let m = Method::parse(name)?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    let cfg = build_config(&args.common)?;
    let seed0 = args.seed0.unwrap_or(cfg.seed);
    let dir = resolve_out_dir(&cfg);
    let runs = run_matrix(&cfg, &methods, seed0, args.seeds, &dir)?;
    let agg_path = dir.join("aggregate.csv");
    write_aggregate(&runs, &methods, cfg.budget, &agg_path)?;
    println!("{} runs ({} seeds from {seed0}) → {}", runs.len(), args.seeds, agg_path.display());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let cfg = build_config(&args.common)?;
    let objective = ObjectiveSpec::by_name(&cfg.objective, cfg.dim)?;
    let seed0 = args.seed0.unwrap_or(cfg.seed);
    let dir = resolve_out_dir(&cfg);
    let runs = run_matrix(&cfg, &Method::ALL, seed0, args.seeds, &dir)?;
    write_aggregate(&runs, &Method::ALL, cfg.budget, &dir.join("aggregate.csv"))?;

    let better = match objective.direction() {
        Direction::Minimize => "lower",
        Direction::Maximize => "higher",
    };
    println!(
        "{} (dim {}), budget {} ({} init), {} paired seeds from {}; {} is better",
        cfg.objective, cfg.dim, cfg.budget, cfg.init_count, args.seeds, seed0, better
    );
    println!("{:<12} {:>16} {:>14}", "method", "median_best", "se_best");

    let cmp_path = dir.join("comparison.csv");
    let mut w = csv::Writer::from_path(&cmp_path).map_err(|e| csv_io(&cmp_path, e))?;
    w.write_record(["method", "median_best", "se_best", "seeds"])
        .map_err(|e| csv_io(&cmp_path, e))?;
    for method in Method::ALL {
        let mut finals: Vec<f64> = runs
            .iter()
            .filter(|(m, _, _)| *m == method)
            .map(|(_, _, trace)| trace.best_value)
            .collect();
        let se = standard_error(&finals);
        let med = median(&mut finals);
        println!("{:<12} {:>16.6e} {:>14.3e}", method.name(), med, se);
        w.write_record([
            method.name().to_string(),
            format!("{med:.17e}"),
            format!("{se:.17e}"),
            args.seeds.to_string(),
        ])
        .map_err(|e| csv_io(&cmp_path, e))?;
    }
    w.flush().map_err(|e| Error::io(cmp_path.clone(), e))?;
    println!("traces and comparison.csv → {}", dir.display());
    Ok(())
}

fn cmd_list() {
    println!("objectives:");
    for name in ObjectiveSpec::names() {
        println!("  {name}");
    }
    println!("acquisitions:");
    for name in Acquisition::names() {
        println!("  {name}");
    }
    println!("methods:");
    for method in Method::ALL {
        println!("  {}", method.name());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_se_conventions() {
        let mut odd = vec![3.0, 1.0, 2.0];
        assert_eq!(median(&mut odd), 2.0);
        let mut even = vec![4.0, 1.0, 2.0, 3.0];
        assert_eq!(median(&mut even), 2.5);
        assert_eq!(standard_error(&[5.0]), 0.0);
        // Sample std of {1,2,3,4} is √(5/3); SE divides by √4.
        let se = standard_error(&[1.0, 2.0, 3.0, 4.0]);
        assert!((se - (5.0_f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        let err = Method::parse("annealing").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("single_gp"));
    }
}
