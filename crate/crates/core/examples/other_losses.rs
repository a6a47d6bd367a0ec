//! LAD, quantile and hinge losses enter through auxiliary variables and linear
//! constraints; the same global solver handles them.

use fcgo::global_solver::{solve_global, SolveOptions};
use fcgo::model::{build_hinge_svm, build_lad, build_quantile};
use fcgo::numerics::Matrix;
use fcgo::penalty::PenaltySpec;

fn main() -> fcgo::Result<()> {
    let x = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.4, 1.0], vec![-0.3, 0.8], vec![1.2, -0.5]]);
    let y = [1.0, 0.7, 0.2, 1.5];
    let spec = PenaltySpec::scad(0.2, 3.7)?;
    let opts = SolveOptions::default();
    for (name, inst) in [
        ("lad", build_lad(&x, &y, spec, Some(10.0))?),
        ("quantile 0.3", build_quantile(&x, &y, 0.3, spec, Some(10.0))?),
        ("hinge", build_hinge_svm(&x, &[1.0, 1.0, -1.0, 1.0], spec, Some(10.0))?),
    ] {
        let r = solve_global(&inst, &opts)?;
        let beta = &r.beta_hat[..inst.beta_dim()];
        println!("{name:<13} {} objective {:.6} beta {beta:.4?} ({} variables, {} constraints)", r.status, r.objective, inst.dim(), inst.m());
    }
    Ok(())
}
