//! Drives the command-line entry point in-process and reads back the JSON report.

use fcgo::cli_io::{run_command, RunReport};

fn main() -> fcgo::Result<()> {
    let dir = std::env::temp_dir();
    let (xp, yp, out) = (dir.join("fcgo_x.csv"), dir.join("fcgo_y.csv"), dir.join("fcgo_report.json"));
    std::fs::write(&xp, "1,0\n0,1\n1,1\n")?;
    std::fs::write(&yp, "2.0\n0.1\n1.9\n")?;
    let path = |p: &std::path::Path| p.display().to_string();
    let code = run_command([
        "fcgo", "solve", "--x", &path(&xp), "--y", &path(&yp), "--penalty", "mcp", "--lambda", "0.5", "--seed", "1", "--out", &path(&out),
    ]);
    println!("exit code {code}");
    let report = RunReport::read(&out)?;
    println!("{} objective {:?} nodes {:?} digest {}", report.status, report.objective, report.nodes, report.instance_digest.unwrap_or_default());
    Ok(())
}
