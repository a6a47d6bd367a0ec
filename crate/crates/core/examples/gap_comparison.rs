//! Global solve against LLA, CD and proximal gradient on S52 instances.
//!
//! cargo run --release --example gap_comparison -- [reps] [scad|mcp]

use fcgo::experiments::{gap_instance, generate_scenario, Scenario, ScenarioKind};
use fcgo::global_solver::SolveOptions;
use fcgo::penalty::PenaltySpec;

fn main() -> fcgo::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let reps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let spec = match args.get(2).map(String::as_str) {
        Some("mcp") => PenaltySpec::mcp(0.5, 2.0)?,
        _ => PenaltySpec::scad(1.0, 3.7)?,
    };
    let solve = SolveOptions { time_limit: Some(600.0), ..Default::default() };
    println!("rep  global      best_local  method      improve%  status     cert_gap  ms");
    for rep in 0..reps {
        let s = generate_scenario(&Scenario { kind: ScenarioKind::S52, d: 20, n: 10, rho: 0.0, seed: rep as u64 })?;
        let g = gap_instance(&s, spec, &solve, rep, rep as u64)?;
        println!(
            "{rep:<4} {:<11.5} {:<11.5} {:<11} {:<9.3} {:<10} {:<9.1e} {:.0}",
            g.mipgo.objective,
            g.best_local,
            g.best_local_method.to_string(),
            100.0 * (g.best_local - g.mipgo.objective) / g.best_local,
            format!("{:?}", g.mipgo.status.unwrap()),
            g.mipgo.certified_gap.unwrap(),
            g.mipgo.time_ms
        );
    }
    Ok(())
}
