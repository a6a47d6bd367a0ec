//! Pass rates of the random midpoint-convexity test on S4 designs.
//!
//! cargo run --release --example rsc_table -- [instances]

use fcgo::experiments::{rsc_table, RscOptions};
use fcgo::penalty::PenaltySpec;

fn main() -> fcgo::Result<()> {
    let instances = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let cells = rsc_table(&[0.1, 0.5], &[20, 35], 100, instances, PenaltySpec::scad(0.2, 3.7)?, &RscOptions::default())?;
    println!("rho   n    pass%");
    for c in cells {
        println!("{:<5} {:<4} {:.1}", c.rho, c.n, c.pass_pct());
    }
    Ok(())
}
