//! Costliest subset, additive subset and cheapest superset estimates for
//! fresh closures, compared with solved TTT.
//!
//! cargo run --release --example subset_heuristics -- [known] [queries]

use tap_surrogate::data::sioux_falls;
use tap_surrogate::heuristics::{Heuristic, SubsetIndex};
use tap_surrogate::scenario::{generate_dataset, GenerateOptions, SamplerConfig};
use tap_surrogate::tap::SolverOptions;

fn main() -> anyhow::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let known = args.first().copied().unwrap_or(300);
    let queries = args.get(1).copied().unwrap_or(10);
    let (net, demand) = sioux_falls();
    let sampler = SamplerConfig { seed: 5, size_min: 1, size_max: 6, ..SamplerConfig::default() };
    let data = generate_dataset(&net, &demand, known + queries, &sampler, &SolverOptions::default(), &GenerateOptions::default())?;

    let index = SubsetIndex::from_dataset(&data.truncated(known));
    println!("index: {} closures, baseline {:.0}", index.len(), data.baseline_ttt);
    println!("{:<22} {:>12} {:>12} {:>12} {:>12}", "query", "true", "CSH", "CASH", "CSupH");
    for s in &data.scenarios[known..] {
        let est: Vec<String> = Heuristic::ALL
            .iter()
            .map(|&h| match index.estimate(h, &s.config) {
                Ok(Some(v)) => format!("{v:>12.0}"),
                Ok(None) => format!("{:>12}", "-"),
                Err(e) => format!("{e}"),
            })
            .collect();
        println!("{:<22} {:>12.0} {}", s.config.to_string(), s.ttt, est.join(" "));
    }
    Ok(())
}
