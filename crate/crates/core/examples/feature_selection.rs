//! Correlation screen and sequential forward/backward selection of the
//! engineered features against log TTT.
//!
//! cargo run --release --example feature_selection -- [scenarios]

use tap_surrogate::data::sioux_falls;
use tap_surrogate::features::{
    build_feature_matrix, pearson_screen, sequential_select, BaselineStats, Direction, FeatureSpec, Representation,
    TargetTransform,
};
use tap_surrogate::scenario::{generate_dataset, GenerateOptions, SamplerConfig};
use tap_surrogate::tap::{solve_ue, SolverOptions};

fn main() -> anyhow::Result<()> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(150);
    let (net, demand) = sioux_falls();
    let opts = SolverOptions::default();
    let data = generate_dataset(&net, &demand, n, &SamplerConfig { seed: 3, ..SamplerConfig::default() }, &opts, &GenerateOptions::default())?;
    let stats = BaselineStats::compute(&net, &solve_ue(&net, &demand, &opts)?)?;

    let x = build_feature_matrix(&data, &FeatureSpec::new(Representation::Engineered), &stats, None)?;
    let y = data.targets();
    let mut corr = pearson_screen(&x, &y, TargetTransform::Log)?;
    corr.sort_by(|a, b| b.r.abs().total_cmp(&a.r.abs()));
    println!("correlation with log(TTT) over {n} scenarios:");
    for c in corr.iter().take(8) {
        println!("  {:<22} {:+.3}", c.name, c.r);
    }

    let forward = sequential_select(&x, &y, Direction::Forward, 9, 5, 0)?;
    let backward = sequential_select(&x, &y, Direction::Backward, 9, 5, 0)?;
    println!("forward:  {}", forward.join(", "));
    println!("backward: {}", backward.join(", "));
    let both: Vec<&String> = forward.iter().filter(|f| backward.contains(f)).collect();
    println!("in both:  {}", both.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "));
    Ok(())
}
