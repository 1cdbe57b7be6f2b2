//! Every surrogate family fit on the same closures: conservative
//! predictions, held-out pinball loss, and how often each overestimates.
//!
//! cargo run --release --example surrogate_models -- [train] [test]

use tap_surrogate::data::sioux_falls;
use tap_surrogate::features::{build_feature_matrix, BaselineStats, FeatureSpec, Representation};
use tap_surrogate::heuristics::SubsetIndex;
use tap_surrogate::scenario::{generate_dataset, GenerateOptions, SamplerConfig};
use tap_surrogate::surrogates::{fit, pinball_loss, ModelKind, ModelSpec, TrainedModel};
use tap_surrogate::tap::{solve_ue, SolverOptions};

fn main() -> anyhow::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let train = args.first().copied().unwrap_or(400);
    let test = args.get(1).copied().unwrap_or(200);
    let (net, demand) = sioux_falls();
    let opts = SolverOptions::default();
    let data = generate_dataset(&net, &demand, train + test, &SamplerConfig { seed: 8, ..SamplerConfig::default() }, &opts, &GenerateOptions::default())?;
    let stats = BaselineStats::compute(&net, &solve_ue(&net, &demand, &opts)?)?;

    let spec = FeatureSpec { representation: Representation::Engineered, selected: None, include_csh: true };
    let x = build_feature_matrix(&data, &spec, &stats, Some(&SubsetIndex::with_baseline(data.baseline_ttt)))?;
    let y = data.targets();
    let (xa, xb) = (x.select_rows(0..train), x.select_rows(train..train + test));
    let (ya, yb) = (&y[..train], &y[train..]);

    let tau = 0.05;
    println!("{:<16} {:<10} {:>12} {:>10} {:>10}", "model", "strategy", "pinball", "over-rate", "json kB");
    for kind in ModelKind::ALL {
        let model = fit(&ModelSpec::new(kind).with_tau(tau).with_seed(1), &xa, ya)?;
        let pred = model.predict_conservative(&xb, tau)?;
        let loss = yb.iter().zip(&pred).map(|(t, p)| pinball_loss(*t, *p, tau)).sum::<Result<f64, _>>()? / test as f64;
        let over = yb.iter().zip(&pred).filter(|(t, p)| p > t).count() as f64 / test as f64;
        let json = model.to_json()?;
        assert_eq!(TrainedModel::from_json(&json)?.predict(&xb)?, model.predict(&xb)?);
        println!("{:<16} {:<10} {:>12.0} {:>10.3} {:>10.1}", kind.name(), format!("{:?}", kind.strategy()), loss, over, json.len() as f64 / 1e3);
    }
    Ok(())
}
