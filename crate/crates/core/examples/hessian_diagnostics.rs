//! The QP form of a penalized least-squares problem is nonconvex: its Hessian has
//! negative eigenvalues even when XᵀX is positive definite.

use fcgo::model::build_least_squares;
use fcgo::numerics::Matrix;
use fcgo::penalty::PenaltySpec;
use fcgo::reformulate::{build_qp_form, hessian_diagnostics};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> fcgo::Result<()> {
    let one = Matrix::from_rows(&[vec![1.0]]);
    for spec in [PenaltySpec::scad(1.0, 3.7)?, PenaltySpec::mcp(1.0, 2.0)?] {
        let inst = build_least_squares(&one, &[1.0], spec, None)?;
        let h = hessian_diagnostics(&inst)?;
        println!("d=1 {:?}: min eigenvalue {:.7}, {} negative of {}", spec.family, h.min_eig, h.num_negative, h.size);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, d) = (30, 8);
    let x = Matrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let inst = build_least_squares(&x, &y, PenaltySpec::scad(0.2, 3.7)?, None)?;
    let qp = build_qp_form(&inst)?;
    let h = hessian_diagnostics(&inst)?;
    println!(
        "n={n} d={d}: QP form has {} variables, offset {:.4}, {} negative eigenvalues (min {:.4})",
        qp.num_vars(),
        qp.penalty_offset,
        h.num_negative,
        h.min_eig
    );
    Ok(())
}
