//! One S6 replicate: λ tuned by HBIC, then the global solver, LLA, LASSO and the
//! oracle estimator compared by AD, FP and FN.
//!
//! cargo run --release --example variable_selection -- [seed] [scad|mcp]

use fcgo::experiments::{generate_scenario, statistical_run, Method, Scenario, ScenarioKind};
use fcgo::global_solver::SolveOptions;
use fcgo::penalty::PenaltyFamily;

fn main() -> fcgo::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seed = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let family = if args.get(2).is_some_and(|s| s == "mcp") { PenaltyFamily::Mcp } else { PenaltyFamily::Scad };
    let s = generate_scenario(&Scenario { kind: ScenarioKind::S6, d: 40, n: 60, rho: 0.5, seed })?;
    let solve = SolveOptions { gap_tol_rel: 1e-3, time_limit: Some(300.0), ..Default::default() };
    let methods = [Method::Mipgo, Method::LlaLasso, Method::Lasso, Method::Oracle];
    let run = statistical_run(&s, family, 2.0, &methods, &solve, Some(5.0), 0, seed)?;
    println!("tuned lambda {:.4}", run.lambda);
    println!("method      objective   AD      FP  FN");
    for (r, m) in &run.runs {
        println!("{:<11} {:<11.4} {:<7.4} {:<3} {}", r.method.to_string(), r.objective, m.ad, m.fp, m.fn_);
    }
    Ok(())
}
