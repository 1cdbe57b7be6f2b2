//! Label random closure scenarios and save them as JSON Lines.
//!
//! cargo run --release --example generate_dataset -- [scenarios] [seed] [workers] [out.jsonl]

use std::fs::File;
use std::io::{BufReader, BufWriter};

use tap_surrogate::data::sioux_falls;
use tap_surrogate::network::fingerprint;
use tap_surrogate::scenario::{generate_dataset, load_dataset, save_dataset, GenerateOptions, SamplerConfig};
use tap_surrogate::tap::SolverOptions;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().map(|s| s.parse()).transpose()?.unwrap_or(50);
    let seed: u64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let workers: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let out = args.get(3).cloned().unwrap_or_else(|| std::env::temp_dir().join("sioux-falls.jsonl").display().to_string());

    let (net, demand) = sioux_falls();
    let sampler = SamplerConfig { seed, size_min: 1, size_max: 10, ..SamplerConfig::default() };
    let gen = GenerateOptions { workers, record_timings: true };
    let data = generate_dataset(&net, &demand, n, &sampler, &SolverOptions::default(), &gen)?;
    save_dataset(&data, BufWriter::new(File::create(&out)?))?;

    let ttt = data.targets();
    let max = ttt.iter().copied().fold(f64::MIN, f64::max);
    let secs: f64 = data.scenarios.iter().map(|s| s.solve_time).sum();
    println!("baseline ttt {:.1}", data.baseline_ttt);
    println!("{} scenarios, ttt up to {:.1} ({:.1}x baseline), {:.2} s of solving", data.len(), max, max / data.baseline_ttt, secs);
    for s in data.scenarios.iter().take(5) {
        println!("  {:<28} {:>12.1}  gap {:.1e}", s.config.to_string(), s.ttt, s.gap);
    }

    let back = load_dataset(BufReader::new(File::open(&out)?), Some(&fingerprint(&net, &demand)))?;
    assert_eq!(back, data);
    println!("wrote {out}");
    Ok(())
}
