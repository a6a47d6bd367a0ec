//! SCAD and MCP values, derivatives and the inner minimizer g* on a few points.

use fcgo::penalty::{evaluate, PenaltySpec};

fn main() -> fcgo::Result<()> {
    let specs = [("scad", PenaltySpec::scad(1.0, 3.7)?), ("mcp", PenaltySpec::mcp(1.0, 2.0)?)];
    for (name, spec) in specs {
        println!("{name}: lambda {} a {}  max value {:.4}", spec.lambda, spec.a, spec.max_value());
        println!("  theta    P        P'       g*");
        for theta in [0.0, 0.5, 1.0, 2.0, 3.0, 5.0] {
            let e = evaluate(theta, &spec)?;
            println!("  {theta:<8.2} {:<8.4} {:<8.4} {:<8.4}", e.value, e.deriv, e.gstar);
        }
    }
    Ok(())
}
