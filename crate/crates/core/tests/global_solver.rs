use fcgo::global_solver::{
    brute_force_global, enumerate_patterns, kkt_point, solve_global, solve_pattern_lp, verify_kkt, BoundKind, BruteMode,
    SolveOptions, SolveStatus,
};
use fcgo::local_solvers::{lla, Init, LocalOptions};
use fcgo::model::{build_lad, build_least_squares, LinearFeasibleSet, ProblemInstance, QuadraticLoss};
use fcgo::numerics::Matrix;
use fcgo::penalty::PenaltySpec;
use fcgo::reformulate::{build_lpcc, PairKind, PairState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scalar(y: f64) -> ProblemInstance {
    build_least_squares(&Matrix::from_rows(&[vec![1.0]]), &[y], PenaltySpec::scad(1.0, 3.7).unwrap(), Some(10.0)).unwrap()
}

#[test]
fn scalar_scad_optima() {
    for (y, beta, obj) in [(0.5, 0.0, 0.125), (1.5, 0.5, 1.0), (5.0, 5.0, 2.35)] {
        let inst = scalar(y);
        for bound in [BoundKind::Envelope, BoundKind::Lpcc] {
            let r = solve_global(&inst, &SolveOptions { bound, ..Default::default() }).unwrap();
            assert_eq!(r.status, SolveStatus::Certified);
            assert!((r.beta_hat[0] - beta).abs() < 1e-6, "{bound:?} y={y}: {:?}", r.beta_hat);
            assert!((r.objective - obj).abs() < 1e-9);
            assert!(r.kkt.unwrap().residual <= 1e-7);
        }
    }
}

#[test]
fn oracles_agree_in_one_dimension() {
    for y in [0.5, 1.5, 5.0, -2.2, 3.0] {
        let inst = scalar(y);
        let g = brute_force_global(&inst, BruteMode::Grid).unwrap();
        let p = brute_force_global(&inst, BruteMode::PatternEnum).unwrap();
        assert!((g.objective - p.objective).abs() < 1e-5, "y={y}: {} vs {}", g.objective, p.objective);
    }
}

#[test]
fn lambda_zero_is_least_squares() {
    let x = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.2, 1.0], vec![1.0, 1.0]]);
    let y = [1.0, 2.0, 0.5];
    let inst = build_least_squares(&x, &y, PenaltySpec::scad(0.0, 3.7).unwrap(), Some(10.0)).unwrap();
    let r = brute_force_global(&inst, BruteMode::PatternEnum).unwrap();
    // normal equations
    let q = x.gram();
    let rhs = x.tr_matvec(&y);
    let det = q[(0, 0)] * q[(1, 1)] - q[(0, 1)] * q[(1, 0)];
    let b0 = (q[(1, 1)] * rhs[0] - q[(0, 1)] * rhs[1]) / det;
    let b1 = (q[(0, 0)] * rhs[1] - q[(1, 0)] * rhs[0]) / det;
    assert!((r.beta_hat[0] - b0).abs() < 1e-8 && (r.beta_hat[1] - b1).abs() < 1e-8, "{:?}", r.beta_hat);
}

#[test]
fn pattern_at_g_upper_gives_zero() {
    let inst = scalar(0.5);
    let model = build_lpcc(&inst).unwrap();
    let e = enumerate_patterns(&model, &inst);
    let best = e.best.unwrap();
    assert!(best.beta[0].abs() < 1e-9);
    assert!((best.objective - 0.125).abs() < 1e-9);
    // the winning pattern has λ − g = 0
    let k = model.pairs.iter().position(|p| p.kind == PairKind::GUpper).unwrap();
    assert!(model.pairs[k].expr.eval(&best.point).abs() < 1e-9);
    assert!((best.reported - best.objective).abs() < 1e-8);
}

#[test]
fn free_pattern_rejected() {
    let inst = scalar(0.5);
    let model = build_lpcc(&inst).unwrap();
    assert!(solve_pattern_lp(&model, &inst, &vec![PairState::Free; model.pairs.len()]).is_err());
}

#[test]
fn abs_pairs_both_tight_with_nonzero_beta_infeasible() {
    // y = 5 forces β ≠ 0 at every stationary point with g = 0
    let inst = scalar(5.0);
    let model = build_lpcc(&inst).unwrap();
    let mut pattern = vec![PairState::LeftZero; model.pairs.len()];
    for (k, p) in model.pairs.iter().enumerate() {
        match p.kind {
            PairKind::AbsPlus | PairKind::AbsMinus => pattern[k] = PairState::RightZero,
            PairKind::GLower => pattern[k] = PairState::RightZero,
            _ => {}
        }
    }
    assert!(solve_pattern_lp(&model, &inst, &pattern).is_err());
}

#[test]
fn kkt_perturbation_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Matrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
    let inst = build_least_squares(&x, &y, PenaltySpec::scad(0.3, 3.7).unwrap(), Some(10.0)).unwrap();
    let r = solve_global(&inst, &SolveOptions::default()).unwrap();
    assert!(r.kkt.as_ref().unwrap().residual <= 1e-7);
    let model = build_lpcc(&inst).unwrap();
    let mut b = r.beta_hat.clone();
    for v in &mut b {
        *v += 0.1;
    }
    let mut pt = kkt_point(&model, &inst, &r.beta_hat);
    for (i, v) in b.iter().enumerate() {
        pt[model.layout.beta(i)] = *v;
    }
    assert!(verify_kkt(&model, &pt).stationarity > 1e-3);
}

#[test]
fn zero_instance_is_exact() {
    let loss = QuadraticLoss { q_mat: Matrix::identity(2), q: vec![0.0; 2], constant: 0.0, n: 1 };
    let inst =
        ProblemInstance::new(loss, LinearFeasibleSet::unconstrained(2), PenaltySpec::mcp(1.0, 2.0).unwrap(), vec![true; 2], Some(5.0))
            .unwrap();
    let model = build_lpcc(&inst).unwrap();
    let pt = kkt_point(&model, &inst, &[0.0, 0.0]);
    assert_eq!(verify_kkt(&model, &pt).residual, 0.0);
}

#[test]
fn toy_problem_global_beats_lla() {
    let x = Matrix::from_rows(&[vec![1.0, 0.9], vec![0.9, 1.0], vec![0.1, -0.2]]);
    let y = [1.2, 0.3, 0.8];
    let inst = build_least_squares(&x, &y, PenaltySpec::scad(1.0, 3.7).unwrap(), Some(10.0)).unwrap();
    let best = brute_force_global(&inst, BruteMode::PatternEnum).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let seed = rng.random();
        let r = lla(&inst, &LocalOptions::with_init(Init::Random { seed, lo: -3.0, hi: 3.0 })).unwrap();
        assert!(best.objective <= r.objective + 1e-9);
    }
}

#[test]
fn lad_small_agrees_with_grid() {
    let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
    let inst = build_lad(&x, &[0.4, 1.5], PenaltySpec::scad(0.5, 3.7).unwrap(), Some(10.0)).unwrap();
    let g = brute_force_global(&inst, BruteMode::Grid).unwrap();
    let s = solve_global(&inst, &SolveOptions::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Certified);
    assert!((g.objective - s.objective).abs() < 1e-6, "{} vs {}", g.objective, s.objective);
}
