//! Frank-Wolfe user equilibrium with and without a set of closed links.
//!
//! cargo run --example solve_closure -- [link ids...]

use std::time::Instant;

use tap_surrogate::data::sioux_falls;
use tap_surrogate::network::ClosureConfig;
use tap_surrogate::tap::{solve_ue, SolverOptions};

fn main() -> anyhow::Result<()> {
    let ids: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let closure = if ids.is_empty() { ClosureConfig::from_indices([15, 19]) } else { ClosureConfig::from_indices(ids) };
    let (net, demand) = sioux_falls();
    let opts = SolverOptions::default();

    let start = Instant::now();
    let base = solve_ue(&net, &demand, &opts)?;
    println!(
        "baseline  ttt {:.1}  gap {:.2e}  {} iterations  {:.0} ms",
        base.ttt,
        base.relative_gap,
        base.iterations,
        start.elapsed().as_secs_f64() * 1e3
    );

    let closed = net.apply_closures(&closure)?;
    let missing = closed.connectivity_check(&demand);
    if !missing.is_empty() {
        println!("closing {closure} disconnects {} OD pairs", missing.len());
        return Ok(());
    }
    let start = Instant::now();
    let eq = solve_ue(&closed, &demand, &opts)?;
    println!(
        "closed {closure}  ttt {:.1} ({:+.2}%)  gap {:.2e}  {} iterations  {:.0} ms",
        eq.ttt,
        100.0 * (eq.ttt / base.ttt - 1.0),
        eq.relative_gap,
        eq.iterations,
        start.elapsed().as_secs_f64() * 1e3
    );

    // links whose flow changed most
    let mut shift: Vec<(usize, f64, f64)> = eq
        .flows
        .iter()
        .map(|(id, f)| (id.0, base.flows.get(id).unwrap_or(0.0), f))
        .collect();
    shift.sort_by(|a, b| (b.2 - b.1).abs().total_cmp(&(a.2 - a.1).abs()));
    for (id, before, after) in shift.into_iter().take(5) {
        println!("  link {id:>2}: {before:>9.1} -> {after:>9.1}");
    }
    let trace = &eq.objective_trace;
    println!("objective {:.1} -> {:.1} over {} steps", trace[0], trace[trace.len() - 1], trace.len() - 1);
    Ok(())
}
