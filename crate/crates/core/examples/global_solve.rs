//! Certified global minimum of a small SCAD least-squares problem, checked against
//! exhaustive enumeration of complementarity patterns.

use fcgo::global_solver::{brute_force_global, solve_global, BruteMode, SolveOptions};
use fcgo::model::build_least_squares;
use fcgo::numerics::Matrix;
use fcgo::penalty::PenaltySpec;

fn main() -> fcgo::Result<()> {
    let x = Matrix::from_rows(&[vec![1.0, 0.9, 0.0], vec![0.9, 1.0, 0.2], vec![0.1, -0.2, 1.0], vec![0.5, 0.4, 0.3]]);
    let y = [1.2, 0.3, 0.8, 1.0];
    let inst = build_least_squares(&x, &y, PenaltySpec::scad(0.5, 3.7)?, None)?;

    let r = solve_global(&inst, &SolveOptions::default())?;
    println!("status     {}", r.status);
    println!("objective  {:.9}", r.objective);
    println!("lower      {:.9}", r.lower_bound);
    println!("nodes      {}", r.nodes_explored);
    println!("beta       {:?}", r.beta_hat);
    if let Some(k) = &r.kkt {
        println!("kkt        residual {:.2e}, C1 {:.3}, max multiplier {:.3}", k.residual, k.c1, k.max_penalty_multiplier);
    }

    let e = brute_force_global(&inst, BruteMode::PatternEnum)?;
    println!("enumeration {:.9} ({} patterns)", e.objective, e.nodes_explored);
    Ok(())
}
