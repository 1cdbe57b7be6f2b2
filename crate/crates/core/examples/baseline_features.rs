//! Baseline link statistics, centrality, and the three feature encodings
//! of one closure.
//!
//! cargo run --example baseline_features

use tap_surrogate::data::sioux_falls;
use tap_surrogate::features::{
    engineered_features, one_hot, pairwise_encode, BaselineStats, FeatureBuilder, FeatureSpec, Representation,
};
use tap_surrogate::heuristics::SubsetIndex;
use tap_surrogate::network::ClosureConfig;
use tap_surrogate::tap::{solve_ue, SolverOptions};

fn main() -> anyhow::Result<()> {
    let (net, demand) = sioux_falls();
    let base = solve_ue(&net, &demand, &SolverOptions::default())?;
    let stats = BaselineStats::compute(&net, &base)?;

    let mut by_bc: Vec<usize> = (0..stats.project_count()).collect();
    by_bc.sort_by(|&a, &b| stats.betweenness[b].total_cmp(&stats.betweenness[a]));
    println!("most central links (edge betweenness on free-flow times):");
    for &i in by_bc.iter().take(5) {
        println!(
            "  link {i:>2}  betweenness {:>6.1}  closeness {:.4}  flow {:>8.1}  cost {:>6.2}",
            stats.betweenness[i], stats.closeness[i], stats.flow[i], stats.cost[i]
        );
    }

    let closure = ClosureConfig::from_indices([by_bc[0], by_bc[1], 40]);
    let n = stats.project_count();
    println!("\nclosure {closure}");
    println!("  one-hot width {}, pairwise width {}", one_hot(&closure, n)?.len(), pairwise_encode(&closure, n)?.len());
    for (name, v) in engineered_features(&closure, &stats)? {
        if name.ends_with("_sum") || name == "set_size" {
            println!("  {name:<20} {v:>14.3}");
        }
    }

    // combined encoding with the CSH column from an index holding one subset
    let mut index = SubsetIndex::with_baseline(base.ttt);
    index.insert(&ClosureConfig::from_indices([by_bc[0]]), base.ttt * 1.1);
    for rep in [Representation::OneHot, Representation::Pairwise, Representation::Engineered, Representation::Combined] {
        let spec = FeatureSpec { representation: rep, selected: None, include_csh: true };
        let b = FeatureBuilder::new(&spec, &stats)?;
        let row = b.encode(&closure, Some(index.csh(&closure)?))?;
        println!("  {rep:?}: {} columns, last {} = {:.1}", b.width(), b.names()[b.width() - 1], row[row.len() - 1]);
    }
    Ok(())
}
