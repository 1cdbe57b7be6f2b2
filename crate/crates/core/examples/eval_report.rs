//! A short online evaluation written out as CSV tables, an SVG chart and a
//! JSON report, then reloaded.
//!
//! cargo run --release --example eval_report -- [out_dir]

use std::path::PathBuf;

use tap_surrogate::data::sioux_falls;
use tap_surrogate::eval::{emit_report, load_report, run_online_eval, Candidate, EvalConfig};
use tap_surrogate::features::{BaselineStats, FeatureBuilder, FeatureSpec, Representation};
use tap_surrogate::heuristics::Heuristic;
use tap_surrogate::scenario::{generate_dataset, GenerateOptions, SamplerConfig};
use tap_surrogate::surrogates::{ModelKind, ModelSpec};
use tap_surrogate::tap::{solve_ue, SolverOptions};

fn main() -> anyhow::Result<()> {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("tap-surrogate-report"));
    let (net, demand) = sioux_falls();
    let opts = SolverOptions::default();
    let data = generate_dataset(&net, &demand, 300, &SamplerConfig::default(), &opts, &GenerateOptions::default())?;
    let stats = BaselineStats::compute(&net, &solve_ue(&net, &demand, &opts)?)?;

    let spec = FeatureSpec { representation: Representation::Combined, selected: None, include_csh: true };
    let builder = FeatureBuilder::new(&spec, &stats)?;
    let mut candidates: Vec<Candidate> = Heuristic::ALL.into_iter().map(Candidate::Heuristic).collect();
    candidates.push(Candidate::Model(ModelSpec::new(ModelKind::Gbt).with("trees", 100.0)));
    candidates.push(Candidate::Model(ModelSpec::new(ModelKind::LogBayesRidge)));
    let config = EvalConfig { batch_size: 50, iterations: 6, ..EvalConfig::default() };
    let report = run_online_eval(&data, &candidates, &config, &builder)?;

    for it in &report.records {
        let line: Vec<String> = it.models.iter().map(|m| format!("{} {:.0}", m.model, m.metrics.pinball)).collect();
        println!("iteration {} ({} training rows): {}", it.iteration, it.train_rows, line.join(", "));
    }
    for path in emit_report(&report, &out)? {
        println!("wrote {}", path.display());
    }
    let back = load_report(&out.join("report.json"))?;
    println!("reloaded {} averages, consistent with {} iteration records", back.averages.len(), back.records.len());
    Ok(())
}
