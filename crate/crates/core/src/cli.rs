//! Command-line front end.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{RunConfig, CONFIG_REFERENCE};
use crate::data::sioux_falls;
use crate::eval::{emit_report, load_report, run_online_eval, EvalReport};
use crate::features::{
    build_feature_matrix, pearson_screen, sequential_select, BaselineStats, Direction, FeatureBuilder, FeatureSpec,
    Representation, TargetTransform,
};
use crate::heuristics::SubsetIndex;
use crate::network::{fingerprint, load_tntp, ClosureConfig, DemandMatrix, LinkId, Network};
use crate::scenario::{generate_dataset, load_dataset, save_dataset, Dataset, GenerateOptions};
use crate::tap::{solve_ue, SolverOptions};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "tap-surrogate", version, about = "Traffic assignment under road closures and surrogate TTT models", after_long_help = CONFIG_REFERENCE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one user equilibrium. Exit 0 converged, 2 not converged,
    /// 3 infeasible closure, 1 error.
    Solve(SolveArgs),
    /// Label random closure scenarios into a JSON Lines dataset.
    Generate(RunArgs),
    /// Export the feature matrix, correlations and a feature selection.
    Features(FeatureArgs),
    /// Run the online evaluation and write its report.
    Evaluate(RunArgs),
    /// Re-render CSV tables and chart from a saved report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// TNTP network file; bundled Sioux Falls when omitted.
    #[arg(long, requires = "trips")]
    pub net: Option<PathBuf>,
    /// TNTP trip table.
    #[arg(long, requires = "net")]
    pub trips: Option<PathBuf>,
    /// Link ids to close, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub close: Vec<usize>,
    #[arg(long, default_value_t = SolverOptions::default().gap_tolerance)]
    pub gap: f64,
    #[arg(long, default_value_t = SolverOptions::default().max_iterations)]
    pub max_iterations: usize,
    /// Also write the equilibrium (flows included) as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Number of scenarios to generate.
    #[arg(long)]
    pub scenarios: Option<usize>,
    /// Dataset path.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Features kept by each selection direction.
    #[arg(long, default_value_t = 9)]
    pub k: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Saved report.json.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; the input's directory when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Generate(a) => cmd_generate(&a),
        Command::Features(a) => cmd_features(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

pub fn load_network(net: Option<&Path>, trips: Option<&Path>) -> anyhow::Result<(Network, DemandMatrix)> {
    match (net, trips) {
        (Some(n), Some(t)) => {
            let net_text = fs::read_to_string(n).with_context(|| format!("reading {}", n.display()))?;
            let trips_text = fs::read_to_string(t).with_context(|| format!("reading {}", t.display()))?;
            Ok(load_tntp(&net_text, &trips_text)?)
        }
        (None, None) => Ok(sioux_falls()),
        _ => bail!("--net and --trips go together"),
    }
}

fn cmd_solve(a: &SolveArgs) -> anyhow::Result<u8> {
    let (network, demand) = load_network(a.net.as_deref(), a.trips.as_deref())?;
    let config = ClosureConfig::new(a.close.iter().map(|&i| LinkId(i)));
    let closed = network.apply_closures(&config)?;
    let missing = closed.connectivity_check(&demand);
    if !missing.is_empty() {
        eprintln!("infeasible closure {config}: {} OD pairs disconnected", missing.len());
        for (o, d) in &missing {
            eprintln!("  {o} -> {d}");
        }
        return Ok(EXIT_INFEASIBLE);
    }
    let opts = SolverOptions { gap_tolerance: a.gap, max_iterations: a.max_iterations, ..SolverOptions::default() };
    let eq = solve_ue(&closed, &demand, &opts)?;
    println!("closed      {config}");
    println!("ttt         {}", eq.ttt);
    println!("gap         {:e}", eq.relative_gap);
    println!("iterations  {}", eq.iterations);
    println!("converged   {}", eq.converged);
    if let Some(p) = &a.json {
        fs::write(p, eq.to_json_line() + "\n").with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(if eq.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Config from `--config` (or defaults) with command-line overrides.
pub fn resolve_config(a: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(n) = a.scenarios {
        cfg.dataset.scenarios = n;
    }
    if let Some(d) = &a.dataset {
        cfg.dataset.path = Some(d.clone());
    }
    if let Some(o) = &a.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_network(cfg: &RunConfig) -> anyhow::Result<(Network, DemandMatrix)> {
    load_network(cfg.network.net.as_deref(), cfg.network.trips.as_deref())
}

fn cmd_generate(a: &RunArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(a)?;
    let (network, demand) = config_network(&cfg)?;
    let gen = GenerateOptions { workers: cfg.workers, record_timings: cfg.dataset.record_timings };
    let dataset =
        generate_dataset(&network, &demand, cfg.dataset.scenarios, &cfg.sampler_config(), &cfg.solver, &gen)?;
    let path = cfg.dataset_path();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    save_dataset(&dataset, BufWriter::new(file))?;
    println!("wrote {} scenarios to {} (baseline ttt {})", dataset.len(), path.display(), dataset.baseline_ttt);
    Ok(EXIT_OK)
}

/// Loads the configured dataset, checking it belongs to the configured
/// network, and derives baseline statistics.
fn load_for_config(cfg: &RunConfig) -> anyhow::Result<(Dataset, BaselineStats)> {
    let (network, demand) = config_network(cfg)?;
    let path = cfg.dataset_path();
    let file = File::open(&path).with_context(|| format!("reading {}", path.display()))?;
    let dataset = load_dataset(BufReader::new(file), Some(&fingerprint(&network, &demand)))
        .with_context(|| format!("loading {}", path.display()))?;
    let baseline = solve_ue(&network, &demand, &dataset.solver)?;
    Ok((dataset, BaselineStats::compute(&network, &baseline)?))
}

#[derive(Serialize)]
struct Selection {
    forward: Vec<String>,
    backward: Vec<String>,
    union: Vec<String>,
}

fn cmd_features(a: &FeatureArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(&a.run)?;
    let (dataset, stats) = load_for_config(&cfg)?;
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;
    let y = dataset.targets();

    let prior = SubsetIndex::with_baseline(dataset.baseline_ttt);
    let matrix = build_feature_matrix(&dataset, &cfg.features, &stats, Some(&prior))?;
    let path = cfg.output_dir.join("features.csv");
    matrix.write_csv(BufWriter::new(File::create(&path).with_context(|| format!("writing {}", path.display()))?))?;
    println!("wrote {} x {} feature matrix to {}", matrix.nrows(), matrix.ncols(), path.display());

    let engineered = build_feature_matrix(&dataset, &FeatureSpec::new(Representation::Engineered), &stats, None)?;
    let mut corr = pearson_screen(&engineered, &y, TargetTransform::Log)?;
    let path = cfg.output_dir.join("correlations.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["feature", "r_log_ttt", "degenerate"])?;
    for c in &corr {
        w.write_record([c.name.clone(), c.r.to_string(), c.degenerate.to_string()])?;
    }
    w.flush()?;
    corr.sort_by(|a, b| b.r.abs().total_cmp(&a.r.abs()));
    println!("strongest correlations with log(TTT):");
    for c in corr.iter().take(5) {
        println!("  {:<22} {:+.3}", c.name, c.r);
    }

    let k = a.k.min(engineered.ncols());
    let forward = sequential_select(&engineered, &y, Direction::Forward, k, a.folds, cfg.seed)?;
    let backward = sequential_select(&engineered, &y, Direction::Backward, k, a.folds, cfg.seed)?;
    let mut union = forward.clone();
    union.extend(backward.iter().filter(|f| !forward.contains(f)).cloned());
    println!("selected {} features: {}", union.len(), union.join(", "));
    let path = cfg.output_dir.join("selection.json");
    let sel = Selection { forward, backward, union };
    fs::write(&path, serde_json::to_string_pretty(&sel)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(EXIT_OK)
}

fn cmd_evaluate(a: &RunArgs) -> anyhow::Result<u8> {
    let cfg = resolve_config(a)?;
    let candidates = cfg.candidates()?;
    let (dataset, stats) = load_for_config(&cfg)?;
    let builder = FeatureBuilder::new(&cfg.features, &stats)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let report = pool.install(|| run_online_eval(&dataset, &candidates, &cfg.eval_config(), &builder))?;
    let mut written = emit_report(&report, &cfg.output_dir)?;
    let path = cfg.output_dir.join("config.toml");
    fs::write(&path, cfg.to_toml()).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    print_averages(&report, &mut std::io::stdout())?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

fn cmd_report(a: &ReportArgs) -> anyhow::Result<u8> {
    let report = load_report(&a.input)?;
    let out = match &a.out {
        Some(o) => o.clone(),
        None => a.input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let written = emit_report(&report, &out)?;
    print_averages(&report, &mut std::io::stdout())?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(EXIT_OK)
}

/// Averages table, one row per model.
pub fn print_averages(report: &EvalReport, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{:<18} {:>5} {:>14} {:>14} {:>14} {:>9} {:>10}  ", "model", "iters", "mae", "pinball", "bias", "mape", "seconds")?;
    for a in &report.averages {
        writeln!(
            out,
            "{:<18} {:>5} {:>14.1} {:>14.1} {:>14.1} {:>9.3} {:>10.4}  {}",
            a.model,
            a.iterations,
            a.metrics.mae,
            a.metrics.pinball,
            a.metrics.bias,
            a.metrics.mape,
            a.fit_plus_predict_seconds,
            if a.terminated { "exceeded time cap" } else { "" }
        )?;
    }
    Ok(())
}
