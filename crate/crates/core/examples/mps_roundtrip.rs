//! Export the big-M model as MPS, read it back and solve it by enumerating the
//! binaries; the value matches the native solver.

use fcgo::cli_io::mps::{export_model, read_model, solve_by_enumeration};
use fcgo::global_solver::{solve_global, SolveOptions};
use fcgo::model::build_least_squares;
use fcgo::numerics::Matrix;
use fcgo::penalty::PenaltySpec;
use fcgo::reformulate::{build_mip, estimate_big_m};

fn main() -> fcgo::Result<()> {
    let x = Matrix::from_rows(&[vec![1.0, 0.3], vec![0.2, 1.0], vec![0.5, 0.5]]);
    let inst = build_least_squares(&x, &[1.4, 0.2, 0.9], PenaltySpec::mcp(0.6, 2.0)?, Some(5.0))?;
    let mip = build_mip(&inst, estimate_big_m(&inst)?)?;
    let path = std::env::temp_dir().join("fcgo_example.mps");
    export_model(&mip, &path)?;
    let (problem, sidecar) = read_model(&path)?;
    println!("{}: {} columns, {} rows, {} binaries", path.display(), problem.columns.len(), problem.rows.len(), problem.num_integer());
    let e = solve_by_enumeration(&problem)?;
    let native = solve_global(&inst, &SolveOptions::default())?;
    println!("enumeration {:.9} over {} leaves", sidecar.reported_value(e.objective), e.leaves);
    println!("native      {:.9}", native.objective);
    Ok(())
}
