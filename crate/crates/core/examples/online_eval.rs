//! Online evaluation on Sioux Falls: heuristics against gradient boosting
//! with combined features.
//!
//! cargo run --release --example online_eval -- [scenarios] [batch] [iterations]

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use tap_surrogate::data::sioux_falls;
use tap_surrogate::eval::{run_online_eval, Candidate, EvalConfig};
use tap_surrogate::features::{
    build_feature_matrix, sequential_select, BaselineStats, Direction, FeatureBuilder, FeatureSpec, Representation,
};
use tap_surrogate::heuristics::Heuristic;
use tap_surrogate::network::fingerprint;
use tap_surrogate::scenario::{generate_dataset, load_dataset, save_dataset, Dataset, GenerateOptions, SamplerConfig};
use tap_surrogate::surrogates::{ModelKind, ModelSpec};
use tap_surrogate::tap::{solve_ue, SolverOptions};

fn cached(n: usize, seed: u64) -> anyhow::Result<Dataset> {
    let (net, demand) = sioux_falls();
    let fp = fingerprint(&net, &demand);
    let path: PathBuf = std::env::temp_dir().join(format!("tap-surrogate-sf-{n}-{seed}.jsonl"));
    if let Ok(f) = File::open(&path) {
        if let Ok(d) = load_dataset(BufReader::new(f), Some(&fp)) {
            return Ok(d);
        }
    }
    let sampler = SamplerConfig { seed, ..SamplerConfig::default() };
    let gen = GenerateOptions { workers: 1, record_timings: false };
    let d = generate_dataset(&net, &demand, n, &sampler, &SolverOptions::default(), &gen)?;
    save_dataset(&d, BufWriter::new(File::create(&path)?))?;
    Ok(d)
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let n = args.first().copied().unwrap_or(1000);
    let batch = args.get(1).copied().unwrap_or(100);
    let iterations = args.get(2).copied().unwrap_or(n / batch);

    let (net, demand) = sioux_falls();
    let base = solve_ue(&net, &demand, &SolverOptions::default())?;
    let stats = BaselineStats::compute(&net, &base)?;

    // pick engineered features on an independent pilot sample
    let pilot = cached(500, 99)?;
    let engineered = build_feature_matrix(&pilot, &FeatureSpec::new(Representation::Engineered), &stats, None)?;
    let y = pilot.targets();
    let mut selected = sequential_select(&engineered, &y, Direction::Forward, 9, 5, 0)?;
    for f in sequential_select(&engineered, &y, Direction::Backward, 9, 5, 0)? {
        if !selected.contains(&f) {
            selected.push(f);
        }
    }
    println!("selected {} features: {}", selected.len(), selected.join(", "));

    let data = cached(n, 1)?;
    let spec = FeatureSpec { representation: Representation::Combined, selected: Some(selected), include_csh: true };
    let builder = FeatureBuilder::new(&spec, &stats)?;
    let mut candidates: Vec<Candidate> = Heuristic::ALL.into_iter().map(Candidate::Heuristic).collect();
    candidates.extend(
        [ModelKind::Gbt, ModelKind::LogQuantile, ModelKind::LogBayesRidge, ModelKind::LogKnn, ModelKind::RandomForest]
            .into_iter()
            .map(|k| Candidate::Model(ModelSpec::new(k))),
    );
    let config = EvalConfig { batch_size: batch, iterations, ..EvalConfig::default() };
    let report = run_online_eval(&data, &candidates, &config, &builder)?;

    println!("{:<18} {:>14} {:>14} {:>14} {:>8} {:>9}", "model", "mae", "pinball", "bias", "mape", "seconds");
    for a in &report.averages {
        println!(
            "{:<18} {:>14.1} {:>14.1} {:>14.1} {:>8.3} {:>9.3}",
            a.model, a.metrics.mae, a.metrics.pinball, a.metrics.bias, a.metrics.mape, a.fit_plus_predict_seconds
        );
    }
    Ok(())
}
