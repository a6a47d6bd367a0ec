use fcgo::cli_io::cli::{EXIT_DATA, EXIT_OK, EXIT_UNCERTIFIED, EXIT_USAGE};
use fcgo::cli_io::mps::{export_model, mip_problem, parse_mps, read_model, solve_by_enumeration, write_mps};
use fcgo::cli_io::report::without_timing;
use fcgo::cli_io::{read_dataset, run_command, RunReport};
use fcgo::global_solver::{solve_global, SolveOptions};
use fcgo::model::build_least_squares;
use fcgo::numerics::Matrix;
use fcgo::penalty::PenaltySpec;
use fcgo::reformulate::{build_mip, estimate_big_m, penalty_offset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["fcgo"];
    v.extend_from_slice(args);
    run_command(v)
}

#[test]
fn identity_file() {
    let p = PathBuf::from(fixture("identity.csv"));
    // two rows against one response
    assert!(read_dataset(&p, Path::new(&fixture("one_y.csv")), false).is_err());
    let dir = tempfile::tempdir().unwrap();
    let yp = dir.path().join("y.csv");
    std::fs::write(&yp, "1\n2\n").unwrap();
    let (x, y) = read_dataset(&p, &yp, false).unwrap();
    assert_eq!(x, Matrix::identity(2));
    assert_eq!(y, vec![1.0, 2.0]);
}

#[test]
fn ragged_file_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let yp = dir.path().join("y.csv");
    std::fs::write(&yp, "1\n2\n").unwrap();
    assert!(matches!(read_dataset(Path::new(&fixture("ragged.csv")), &yp, false), Err(fcgo::Error::Data(_))));
}

#[test]
fn solve_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let (x, y) = (fixture("one_x.csv"), fixture("one_y.csv"));
    let code = run(&[
        "solve", "--x", &x, "--y", &y, "--loss", "ls", "--penalty", "scad", "--lambda", "1", "--a", "3.7", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let r = RunReport::read(&out).unwrap();
    assert_eq!(r.status, "Certified");
    assert!((r.objective.unwrap() - 1.0).abs() < 1e-9);
    let beta = r.beta.unwrap().to_dense();
    assert!((beta[0] - 0.5).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    let y = fixture("one_y.csv");
    assert_eq!(run(&["solve", "--x", "/nonexistent/x.csv", "--y", &y, "--lambda", "1"]), EXIT_DATA);
    assert_eq!(run(&["solve", "--x", &fixture("ragged.csv"), "--y", &y, "--lambda", "1"]), EXIT_DATA);
    assert_eq!(run(&["solve", "--nonsense"]), EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
    // λ missing
    assert_eq!(run(&["solve", "--x", &fixture("one_x.csv"), "--y", &y]), EXIT_USAGE);
    assert_eq!(run(&["solve", "--x", &fixture("one_x.csv"), "--y", &y, "--lambda", "1", "--big-m", "-3"]), EXIT_USAGE);
    assert_eq!(run(&["--help"]), EXIT_OK);
}

fn write_problem(dir: &Path, seed: u64, n: usize, d: usize) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<String> = (0..n).map(|_| (0..d).map(|_| format!("{}", rng.random_range(-1.0..1.0))).collect::<Vec<_>>().join(",")).collect();
    let y: Vec<String> = (0..n).map(|_| format!("{}", rng.random_range(-3.0..3.0))).collect();
    let (xp, yp) = (dir.join("x.csv"), dir.join("y.csv"));
    std::fs::write(&xp, x.join("\n")).unwrap();
    std::fs::write(&yp, y.join("\n")).unwrap();
    (xp.display().to_string(), yp.display().to_string())
}

#[test]
fn node_limit_without_certificate_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = write_problem(dir.path(), 5, 10, 20);
    let out = dir.path().join("r.json");
    let code = run(&["solve", "--x", &x, "--y", &y, "--lambda", "0.3", "--node-limit", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_UNCERTIFIED);
    let r = RunReport::read(&out).unwrap();
    assert_eq!(r.status, "NodeLimit");
    assert!(r.gap.unwrap() > 0.0);
}

#[test]
fn repeated_runs_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = write_problem(dir.path(), 9, 8, 6);
    let mut outs = vec![];
    for _ in 0..2 {
        let out = dir.path().join("r.json");
        let o = out.to_str().unwrap();
        assert_eq!(run(&["local", "--x", &x, "--y", &y, "--lambda", "0.2", "--method", "lla", "--init", "random", "--seed", "4", "--threads", "1", "--out", o]), EXIT_OK);
        outs.push(without_timing(&std::fs::read_to_string(&out).unwrap()).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn two_penalized_scad_has_eight_core_binaries() {
    let x = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.1, 1.0], vec![0.3, 0.3]]);
    let inst = build_least_squares(&x, &[1.0, 2.0, 0.5], PenaltySpec::scad(0.4, 3.7).unwrap(), None).unwrap();
    let mip = build_mip(&inst, estimate_big_m(&inst).unwrap()).unwrap();
    let (p, side) = mip_problem(&mip);
    let text = write_mps(&p);
    let mut names: Vec<Vec<String>> = vec![];
    let mut open = false;
    for line in text.lines() {
        if line.contains("'INTORG'") {
            open = true;
            names.push(vec![]);
        } else if line.contains("'INTEND'") {
            open = false;
        } else if open {
            let n = line.split_whitespace().next().unwrap().to_string();
            let b = names.last_mut().unwrap();
            if !b.contains(&n) {
                b.push(n);
            }
        }
    }
    assert_eq!(names[0].len(), 8);
    assert!(text.contains("OBJSENSE") && text.contains("STAT_B_0") && text.contains("STAT_G_1") && text.contains("STAT_H_1"));
    assert!(text.contains("CPL_0_L") && text.contains("CPL_7_R"));
    let back = parse_mps(&text).unwrap();
    assert_eq!(back.rows.len(), p.rows.len());
    assert_eq!(back.columns.len(), p.columns.len());
    assert_eq!(back.num_integer(), p.num_integer());
    let expected = 3.0 * 2.0 * 4.7 * 0.16 / 2.0;
    assert!((side.objective_offset - expected).abs() < 1e-12);
    assert_eq!(penalty_offset(&inst), side.objective_offset);
    let mcp = build_least_squares(&x, &[1.0, 2.0, 0.5], PenaltySpec::mcp(0.4, 2.0).unwrap(), None).unwrap();
    let (_, side) = mip_problem(&build_mip(&mcp, 100.0).unwrap());
    assert_eq!(side.objective_offset, 0.0);
}

#[test]
fn parser_round_trips_exactly() {
    let x = Matrix::from_rows(&[vec![1.0, 0.37], vec![0.1, 1.0 / 3.0]]);
    let inst = build_least_squares(&x, &[0.123456789, -2.5e-7], PenaltySpec::mcp(0.3, 2.0).unwrap(), Some(4.0)).unwrap();
    let (p, _) = mip_problem(&build_mip(&inst, 123.456).unwrap());
    let mut back = parse_mps(&write_mps(&p)).unwrap();
    back.name = p.name.clone();
    assert_eq!(back, p);
}

#[test]
fn parser_rejects_malformed() {
    for bad in ["ROWS\n N OBJ\nCOLUMNS\n    X OBJ 1\n", "ROWS\n N OBJ\nCOLUMNS\n    X R 1\nENDATA\n", "OBJSENSE\n    MAX\nENDATA\n"] {
        assert!(parse_mps(bad).is_err(), "{bad}");
    }
}

#[test]
fn exported_model_solves_like_native() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for t in 0..6 {
        let (n, d) = (3, 1 + t % 2);
        let x = Matrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let spec = if t % 2 == 0 { PenaltySpec::scad(0.4, 3.7) } else { PenaltySpec::mcp(0.4, 2.0) }.unwrap();
        let inst = build_least_squares(&x, &y, spec, Some(6.0)).unwrap();
        let path = dir.path().join(format!("m{t}.mps"));
        export_model(&build_mip(&inst, estimate_big_m(&inst).unwrap()).unwrap(), &path).unwrap();
        let (p, side) = read_model(&path).unwrap();
        let e = solve_by_enumeration(&p).unwrap();
        let native = solve_global(&inst, &SolveOptions::default()).unwrap();
        assert!((side.reported_value(e.objective) - native.objective).abs() < 1e-6, "{t}");
        assert!((inst.objective(&side.beta(&e.x)) - native.objective).abs() < 1e-6);
    }
}

#[test]
fn export_and_solve_mps_commands() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("m.mps");
    let (x, y) = (fixture("one_x.csv"), fixture("one_y.csv"));
    assert_eq!(run(&["export", "--format", "mps", "--x", &x, "--y", &y, "--lambda", "1", "--out", mps.to_str().unwrap()]), EXIT_OK);
    assert!(mps.with_extension("json").exists());
    let out = dir.path().join("r.json");
    assert_eq!(run(&["solve-mps", "--mps", mps.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_OK);
    let r = RunReport::read(&out).unwrap();
    assert!((r.objective.unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn compare_and_rsc_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = out.to_str().unwrap();
    let code = run(&[
        "compare", "--scenario", "s6", "--d", "12", "--n", "30", "--reps", "2", "--methods", "lla_lasso,lasso,oracle", "--penalty", "mcp", "--out", o,
    ]);
    assert_eq!(code, EXIT_OK);
    let r = RunReport::read(&out).unwrap();
    match r.details.unwrap() {
        fcgo::cli_io::report::Details::Statistical { summary, .. } => assert_eq!(summary.len(), 3),
        d => panic!("{d:?}"),
    }
    assert_eq!(run(&["rsc-test", "--instances", "2", "--reps", "200", "--d", "20", "--out", o]), EXIT_OK);
    assert_eq!(run(&["simulate", "--scenario", "s52", "--reps", "1", "--out", o]), EXIT_OK);
}
