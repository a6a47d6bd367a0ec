//! LLA, nonconvex coordinate descent and proximal gradient from several starts. They
//! stop at different stationary points; the global solve is the reference.

use fcgo::experiments::{generate_scenario, Scenario, ScenarioKind};
use fcgo::global_solver::{solve_global, SolveOptions};
use fcgo::local_solvers::{lla, nonconvex_cd, proximal_gradient, Init, LocalOptions};
use fcgo::model::build_least_squares;
use fcgo::penalty::PenaltySpec;

fn main() -> fcgo::Result<()> {
    let s = generate_scenario(&Scenario { kind: ScenarioKind::S52, d: 20, n: 10, rho: 0.0, seed: 3 })?;
    let inst = build_least_squares(&s.x, &s.y, PenaltySpec::scad(1.0, 3.7)?, None)?;
    let omega = inst.nf() * inst.penalty.lambda;
    let inits = [
        ("zero", Init::Zero),
        ("random", Init::Random { seed: 7, lo: -10.0, hi: 10.0 }),
        ("lasso", Init::Lasso { omega }),
    ];
    for (name, init) in inits {
        let opts = LocalOptions::with_init(init);
        let a = lla(&inst, &opts)?;
        let b = nonconvex_cd(&inst, &opts)?;
        let c = proximal_gradient(&inst, &opts)?;
        println!("{name:<7} lla {:<10.4} cd {:<10.4} gm {:<10.4}", a.objective, b.objective, c.objective);
    }
    let g = solve_global(&inst, &SolveOptions::default())?;
    println!("global  {:.4} ({})", g.objective, g.status);
    Ok(())
}
