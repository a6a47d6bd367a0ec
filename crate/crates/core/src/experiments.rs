//! Simulation designs, the random RSC test, metrics and λ tuning.

use crate::error::{Error, Result};
use crate::global_solver::{solve_global, SolveOptions, SolveStatus};
use crate::local_solvers::{lasso_cd, lla, nonconvex_cd, proximal_gradient, Init, LocalOptions};
use crate::model::{build_least_squares, ProblemInstance};
use crate::numerics::dense::{least_squares, Matrix};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const NONZERO_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// β = (1, 1, 0, …), AR(ρ) design, noise variance 0.09.
    S4,
    /// Σ = TᵀT with T_ij uniform on [0, 0.5^|i−j|], ten fixed signals, noise variance 1.44.
    S52,
    /// Five random coordinates at 1.5, AR(0.5) design plus an intercept column, noise variance 1.44.
    S6,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s4" => Ok(ScenarioKind::S4),
            "s52" => Ok(ScenarioKind::S52),
            "s6" => Ok(ScenarioKind::S6),
            _ => Err(Error::InvalidParameter(format!("unknown scenario {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Number of coefficients, including the intercept for S6.
    pub d: usize,
    pub n: usize,
    /// AR correlation for S4; ignored otherwise.
    pub rho: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub beta_true: Vec<f64>,
    /// False for the intercept column.
    pub penalized: Vec<bool>,
}

pub const S52_SIGNALS: [f64; 10] = [3.0, 2.0, 10.0, 0.0, 1.0, 1.0, 2.0, 3.0, 1.6, 6.0];

/// Generator for replicate `rep` of a seeded experiment: one ChaCha stream per replicate.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

fn ar_row(rng: &mut ChaCha8Rng, d: usize, rho: f64) -> Vec<f64> {
    let s = (1.0 - rho * rho).sqrt();
    let mut row = Vec::with_capacity(d);
    let mut prev = 0.0;
    for j in 0..d {
        let z: f64 = StandardNormal.sample(rng);
        prev = if j == 0 { z } else { rho * prev + s * z };
        row.push(prev);
    }
    row
}

pub fn generate_scenario(s: &Scenario) -> Result<Sample> {
    if s.d == 0 || s.n == 0 {
        return Err(Error::InvalidParameter("scenario needs d ≥ 1 and n ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let (d, n) = (s.d, s.n);
    let (x, beta_true, sigma) = match s.kind {
        ScenarioKind::S4 => {
            if !(0.0..1.0).contains(&s.rho) {
                return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {}", s.rho)));
            }
            let mut beta = vec![0.0; d];
            for b in beta.iter_mut().take(2) {
                *b = 1.0;
            }
            let rows: Vec<Vec<f64>> = (0..n).map(|_| ar_row(&mut rng, d, s.rho)).collect();
            (Matrix::from_rows(&rows), beta, 0.3)
        }
        ScenarioKind::S52 => {
            let t = Matrix::from_fn(d, d, |i, j| rng.random_range(0.0..=1.0) * 0.5f64.powi(i.abs_diff(j) as i32));
            let mut beta = vec![0.0; d];
            for (b, v) in beta.iter_mut().zip(S52_SIGNALS) {
                *b = v;
            }
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                    t.tr_matvec(&z)
                })
                .collect();
            (Matrix::from_rows(&rows), beta, 1.2)
        }
        ScenarioKind::S6 => {
            if d < 6 {
                return Err(Error::InvalidParameter("S6 needs d ≥ 6".into()));
            }
            let f = d - 1;
            let mut beta = vec![0.0; d];
            for i in rand::seq::index::sample(&mut rng, f, 5) {
                beta[i] = 1.5;
            }
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let mut r = ar_row(&mut rng, f, 0.5);
                    r.push(1.0);
                    r
                })
                .collect();
            (Matrix::from_rows(&rows), beta, 1.2)
        }
    };
    let noise = Normal::new(0.0, sigma).expect("positive sd");
    let mean = x.matvec(&beta_true);
    let y = mean.iter().map(|m| m + noise.sample(&mut rng)).collect();
    let mut penalized = vec![true; d];
    if s.kind == ScenarioKind::S6 {
        penalized[d - 1] = false;
    }
    Ok(Sample { x, y, beta_true, penalized })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RscOutcome {
    pub pass: bool,
    pub violations: usize,
    /// Draws with β¹ = β², not tested.
    pub skipped: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RscOptions {
    pub k_test: usize,
    pub reps: usize,
    /// Test points have coordinates uniform on [−range, range]; `None` uses aλ.
    pub range: Option<f64>,
    pub seed: u64,
    /// Stop at the first violation.
    pub stop_early: bool,
}

impl Default for RscOptions {
    fn default() -> Self {
        RscOptions { k_test: 2, reps: 10_000, range: None, seed: 0, stop_early: false }
    }
}

/// Midpoint convexity of ℒ on random `k_test`-sparse slices.
pub fn rsc_random_test(x: &Matrix, y: &[f64], penalty: &PenaltySpec, opts: &RscOptions) -> Result<RscOutcome> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::Dimension("rsc test: y length".into()));
    }
    if opts.reps == 0 || opts.k_test == 0 || opts.k_test > d {
        return Err(Error::InvalidParameter("rsc test needs reps ≥ 1 and 1 ≤ k_test ≤ d".into()));
    }
    penalty.validate()?;
    let range = opts.range.unwrap_or(penalty.a * penalty.lambda);
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::InvalidParameter(format!("rsc test range must be positive, got {range}")));
    }
    let cols: Vec<Vec<f64>> = (0..d).map(|j| x.col(j)).collect();
    let nf = n as f64;
    let objective = |idx: &[usize], b: &[f64]| {
        let mut rss = 0.0;
        for t in 0..n {
            let mut r = y[t];
            for (k, &j) in idx.iter().enumerate() {
                r -= cols[j][t] * b[k];
            }
            rss += r * r;
        }
        0.5 * rss + nf * b.iter().map(|v| penalty.value(v.abs())).sum::<f64>()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = RscOutcome { pass: true, violations: 0, skipped: 0 };
    let k = opts.k_test;
    for _ in 0..opts.reps {
        let mut idx = rand::seq::index::sample(&mut rng, d, k).into_vec();
        idx.sort_unstable();
        let b1: Vec<f64> = (0..k).map(|_| rng.random_range(-range..=range)).collect();
        let b2: Vec<f64> = (0..k).map(|_| rng.random_range(-range..=range)).collect();
        if b1 == b2 {
            out.skipped += 1;
            continue;
        }
        let mid: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| 0.5 * (a + b)).collect();
        if 0.5 * objective(&idx, &b1) + 0.5 * objective(&idx, &b2) <= objective(&idx, &mid) {
            out.violations += 1;
            out.pass = false;
            if opts.stop_early {
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ad: f64,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gap_abs: f64,
    pub gap_pct: f64,
    pub time_ms: f64,
    pub aic: f64,
    pub bic: f64,
}

/// Percentage gap (obj − ref)/obj·100.
pub fn gap_percent(objective: f64, reference: f64) -> f64 {
    if objective == 0.0 {
        return 0.0;
    }
    (objective - reference) / objective * 100.0
}

/// FP and FN count only coordinates marked in `penalized` (all when absent).
pub fn compute_metrics(
    beta_hat: &[f64],
    beta_true: &[f64],
    penalized: Option<&[bool]>,
    objective: f64,
    reference_objective: f64,
    time_ms: f64,
    data: Option<(&Matrix, &[f64])>,
) -> Result<MetricsReport> {
    if beta_hat.len() != beta_true.len() {
        return Err(Error::Dimension(format!("metrics: {} vs {} coefficients", beta_hat.len(), beta_true.len())));
    }
    let ad = beta_hat.iter().zip(beta_true).map(|(a, b)| (a - b).abs()).sum();
    let nz = |v: f64| v.abs() > NONZERO_TOL;
    if penalized.is_some_and(|m| m.len() != beta_hat.len()) {
        return Err(Error::Dimension("metrics: penalized mask length".into()));
    }
    let counted = |i: usize| penalized.is_none_or(|m| m[i]);
    let fp = (0..beta_hat.len()).filter(|&i| counted(i) && nz(beta_hat[i]) && !nz(beta_true[i])).count();
    let fn_ = (0..beta_hat.len()).filter(|&i| counted(i) && !nz(beta_hat[i]) && nz(beta_true[i])).count();
    let k = beta_hat.iter().filter(|v| nz(**v)).count() as f64;
    let (aic, bic) = match data {
        Some((x, y)) => {
            if x.cols() != beta_hat.len() || x.rows() != y.len() {
                return Err(Error::Dimension("metrics: design shape".into()));
            }
            let n = y.len() as f64;
            let fit = x.matvec(beta_hat);
            let rss: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
            let base = n * (rss / n).ln();
            (base + 2.0 * k, base + k * n.ln())
        }
        None => (f64::NAN, f64::NAN),
    };
    Ok(MetricsReport {
        ad,
        fp,
        fn_,
        gap_abs: objective - reference_objective,
        gap_pct: gap_percent(objective, reference_objective),
        time_ms,
        aic,
        bic,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// log(RSS/n) + k·log(log n)·log(d)/n.
    Hbic,
}

pub fn hbic(rss: f64, n: usize, d: usize, k: usize) -> f64 {
    let nf = n as f64;
    (rss / nf).ln() + k as f64 * nf.ln().ln() * (d as f64).ln() / nf
}

/// Log-spaced grid from λ_max = ‖Xᵀy‖∞/n down to `ratio`·λ_max, decreasing.
pub fn lambda_grid(x: &Matrix, y: &[f64], count: usize, ratio: f64) -> Vec<f64> {
    let n = x.rows() as f64;
    let lmax = x.tr_matvec(y).iter().fold(0.0_f64, |m, v| m.max(v.abs())) / n;
    if count <= 1 {
        return vec![lmax];
    }
    (0..count).map(|k| lmax * ratio.powf(k as f64 / (count - 1) as f64)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningPoint {
    pub lambda: f64,
    pub score: f64,
    pub nonzeros: usize,
}

/// Largest model HBIC may select, ⌊n / log n⌋.
pub fn max_model_size(n: usize) -> usize {
    (n as f64 / (n as f64).ln().max(1.0)).floor() as usize
}

/// Fits the path by coordinate descent (warm started, largest λ first) and returns the
/// HBIC-best penalty along with the path scores.
pub fn tune_lambda_path(
    x: &Matrix,
    y: &[f64],
    penalized: Option<&[bool]>,
    family: PenaltyFamily,
    a: f64,
    grid: &[f64],
    selector: Selector,
) -> Result<(PenaltySpec, Vec<TuningPoint>)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty λ grid".into()));
    }
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    let (n, d) = (x.rows(), x.cols());
    let mut warm = vec![0.0; d];
    let mut path = vec![];
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &order {
        let spec = PenaltySpec::new(family, lambda, a)?;
        let mut inst = build_least_squares(x, y, spec, None)?;
        if let Some(m) = penalized {
            inst = inst.with_penalized(m.to_vec())?;
        }
        let opts = LocalOptions { init: Init::Given { beta: warm.clone() }, ..Default::default() };
        let r = nonconvex_cd(&inst, &opts)?;
        warm = r.beta;
        let fit = x.matvec(&warm);
        let rss: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
        let k = warm.iter().filter(|v| v.abs() > NONZERO_TOL).count();
        let score = match selector {
            Selector::Hbic => hbic(rss.max(f64::MIN_POSITIVE), n, d, k),
        };
        // strict improvement only, so ties keep the larger λ
        if k <= max_model_size(n) && best.is_none_or(|(s, _)| score < s) {
            best = Some((score, lambda));
        }
        path.push(TuningPoint { lambda, score, nonzeros: k });
    }
    // every fit too large: fall back to the largest λ
    let lambda = best.map_or(order[0], |b| b.1);
    Ok((PenaltySpec::new(family, lambda, a)?, path))
}

pub fn tune_lambda(
    x: &Matrix,
    y: &[f64],
    penalized: Option<&[bool]>,
    family: PenaltyFamily,
    a: f64,
    grid: &[f64],
    selector: Selector,
) -> Result<PenaltySpec> {
    tune_lambda_path(x, y, penalized, family, a, grid, selector).map(|r| r.0)
}

/// Least-squares instance of a sample, with its penalized mask. `box_c` overrides the default box.
pub fn sample_instance(sample: &Sample, penalty: PenaltySpec, box_c: Option<f64>) -> Result<ProblemInstance> {
    build_least_squares(&sample.x, &sample.y, penalty, box_c)?.with_penalized(sample.penalized.clone())
}

/// Least squares restricted to `support`, zero elsewhere.
pub fn oracle_estimator(x: &Matrix, y: &[f64], support: &[usize]) -> Result<Vec<f64>> {
    let sub = Matrix::from_fn(x.rows(), support.len(), |i, j| x[(i, support[j])]);
    let b = least_squares(&sub, y)?;
    let mut out = vec![0.0; x.cols()];
    for (&j, v) in support.iter().zip(b) {
        out[j] = v;
    }
    Ok(out)
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mipgo,
    /// LLA from a uniform random start on [−10, 10]ᵈ.
    LlaRandom,
    LlaZero,
    /// LLA from the LASSO solution.
    LlaLasso,
    Cd,
    Gm,
    Lasso,
    Oracle,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "mipgo" | "global" => Method::Mipgo,
            "lla-random" | "lla_r" | "lla_random" => Method::LlaRandom,
            "lla-zero" | "lla_0" | "lla_zero" => Method::LlaZero,
            "lla-lasso" | "lla_1" | "lla_lasso" | "lla" => Method::LlaLasso,
            "cd" => Method::Cd,
            "gm" => Method::Gm,
            "lasso" => Method::Lasso,
            "oracle" => Method::Oracle,
            _ => return Err(Error::InvalidParameter(format!("unknown method {s}"))),
        })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Mipgo => "mipgo",
            Method::LlaRandom => "lla_random",
            Method::LlaZero => "lla_zero",
            Method::LlaLasso => "lla_lasso",
            Method::Cd => "cd",
            Method::Gm => "gm",
            Method::Lasso => "lasso",
            Method::Oracle => "oracle",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub beta: Vec<f64>,
    pub objective: f64,
    pub time_ms: f64,
    /// Set for `Mipgo`.
    pub status: Option<SolveStatus>,
    pub certified_gap: Option<f64>,
}

/// Runs one method on an instance. `rng_seed` drives random starts; `lasso_omega`
/// is the LASSO weight for `LlaLasso` and `Lasso`.
pub fn run_method(
    method: Method,
    inst: &ProblemInstance,
    sample: Option<&Sample>,
    solve: &SolveOptions,
    rng_seed: u64,
    lasso_omega: f64,
) -> Result<MethodRun> {
    let start = Instant::now();
    let d = inst.dim();
    let local = |init: Init| LocalOptions { init, ..Default::default() };
    let (beta, status, gap) = match method {
        Method::Mipgo => {
            let r = solve_global(inst, solve)?;
            (r.beta_hat, Some(r.status), Some(r.gap))
        }
        Method::LlaRandom => (lla(inst, &local(Init::Random { seed: rng_seed, lo: -10.0, hi: 10.0 }))?.beta, None, None),
        Method::LlaZero => (lla(inst, &local(Init::Zero))?.beta, None, None),
        Method::LlaLasso => (lla(inst, &local(Init::Lasso { omega: lasso_omega }))?.beta, None, None),
        Method::Cd => (nonconvex_cd(inst, &local(Init::Zero))?.beta, None, None),
        Method::Gm => (proximal_gradient(inst, &local(Init::Zero))?.beta, None, None),
        Method::Lasso | Method::Oracle => {
            let s = sample.ok_or_else(|| Error::InvalidParameter(format!("{method} needs the simulated sample")))?;
            let b = if method == Method::Lasso {
                lasso_cd(&s.x, &s.y, lasso_omega, Some(&s.penalized), &LocalOptions::default())?
            } else {
                let support: Vec<usize> = (0..d).filter(|&i| s.beta_true[i].abs() > NONZERO_TOL || !s.penalized[i]).collect();
                oracle_estimator(&s.x, &s.y, &support)?
            };
            (b, None, None)
        }
    };
    Ok(MethodRun {
        method,
        objective: inst.objective(&beta),
        beta,
        time_ms: start.elapsed().as_secs_f64() * 1e3,
        status,
        certified_gap: gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapInstance {
    pub rep: usize,
    pub mipgo: MethodRun,
    /// Best objective over every local run.
    pub best_local: f64,
    pub best_local_method: Method,
    pub local_runs: Vec<MethodRun>,
}

/// Local runs of the objective comparison: LLA from `random_starts` random points,
/// from zero and from the LASSO solution with ω = nλ(K−1)/10 for K = 1..=`lasso_starts`,
/// plus nonconvex CD and proximal gradient.
pub fn local_suite(inst: &ProblemInstance, random_starts: usize, lasso_starts: usize, seed: u64) -> Result<Vec<MethodRun>> {
    let solve = SolveOptions::default();
    let mut runs = vec![];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_starts {
        runs.push(run_method(Method::LlaRandom, inst, None, &solve, rng.random(), 0.0)?);
    }
    runs.push(run_method(Method::LlaZero, inst, None, &solve, 0, 0.0)?);
    let nl = inst.nf() * inst.penalty.lambda;
    for k in 1..=lasso_starts {
        runs.push(run_method(Method::LlaLasso, inst, None, &solve, 0, nl * (k - 1) as f64 / 10.0)?);
    }
    runs.push(run_method(Method::Cd, inst, None, &solve, 0, 0.0)?);
    runs.push(run_method(Method::Gm, inst, None, &solve, 0, 0.0)?);
    Ok(runs)
}

/// Global solve against the local suite on replicate `rep` of a scenario.
pub fn gap_instance(sample: &Sample, penalty: PenaltySpec, solve: &SolveOptions, rep: usize, seed: u64) -> Result<GapInstance> {
    let inst = sample_instance(sample, penalty, None)?;
    let mipgo = run_method(Method::Mipgo, &inst, Some(sample), solve, seed, 0.0)?;
    let local_runs = local_suite(&inst, 20, 20, seed)?;
    let best = local_runs.iter().min_by(|a, b| a.objective.total_cmp(&b.objective)).expect("nonempty suite");
    Ok(GapInstance { rep, best_local: best.objective, best_local_method: best.method, mipgo, local_runs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub ad: (f64, f64),
    pub fp: (f64, f64),
    pub fn_: (f64, f64),
    pub gap_pct: (f64, f64),
    pub time_ms: (f64, f64),
    pub runs: usize,
}

/// Per-method means and standard errors.
pub fn summarize(reports: &[(Method, MetricsReport)]) -> Vec<SummaryRow> {
    let mut methods: Vec<Method> = vec![];
    for (m, _) in reports {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let rs: Vec<&MetricsReport> = reports.iter().filter(|(k, _)| *k == m).map(|(_, r)| r).collect();
            let col = |f: &dyn Fn(&MetricsReport) -> f64| mean_and_se(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                method: m,
                ad: col(&|r| r.ad),
                fp: col(&|r| r.fp as f64),
                fn_: col(&|r| r.fn_ as f64),
                gap_pct: col(&|r| r.gap_pct),
                time_ms: col(&|r| r.time_ms),
                runs: rs.len(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatRun {
    pub rep: usize,
    pub lambda: f64,
    pub runs: Vec<(MethodRun, MetricsReport)>,
}

/// One replicate of the statistical comparison: tune λ by HBIC, then run `methods`
/// at the tuned penalty; gaps are measured against the global solve when present.
pub fn statistical_run(
    sample: &Sample,
    family: PenaltyFamily,
    a: f64,
    methods: &[Method],
    solve: &SolveOptions,
    box_c: Option<f64>,
    rep: usize,
    seed: u64,
) -> Result<StatRun> {
    let grid = lambda_grid(&sample.x, &sample.y, 40, 0.01);
    let spec = tune_lambda(&sample.x, &sample.y, Some(&sample.penalized), family, a, &grid, Selector::Hbic)?;
    let inst = sample_instance(sample, spec, box_c)?;
    let omega = inst.nf() * spec.lambda;
    let mut runs = vec![];
    for &m in methods {
        runs.push(run_method(m, &inst, Some(sample), solve, seed, omega)?);
    }
    let reference = runs.iter().find(|r| r.method == Method::Mipgo).map(|r| r.objective);
    let out = runs
        .into_iter()
        .map(|r| {
            let m = compute_metrics(
                &r.beta,
                &sample.beta_true,
                Some(&sample.penalized),
                r.objective,
                reference.unwrap_or(r.objective),
                r.time_ms,
                Some((&sample.x, &sample.y)),
            )?;
            Ok((r, m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StatRun { rep, lambda: spec.lambda, runs: out })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RscCell {
    pub rho: f64,
    pub n: usize,
    pub passed: usize,
    pub instances: usize,
}

impl RscCell {
    pub fn pass_pct(&self) -> f64 {
        100.0 * self.passed as f64 / self.instances as f64
    }
}

/// Pass counts of the random RSC test on S4 instances, one cell per (ρ, n).
pub fn rsc_table(
    rhos: &[f64],
    ns: &[usize],
    d: usize,
    instances: usize,
    penalty: PenaltySpec,
    opts: &RscOptions,
) -> Result<Vec<RscCell>> {
    let mut cells = vec![];
    for &rho in rhos {
        for &n in ns {
            let passes = (0..instances)
                .into_par_iter()
                .map(|i| {
                    let seed = cell_seed(opts.seed, rho, n, i);
                    let s = generate_scenario(&Scenario { kind: ScenarioKind::S4, d, n, rho, seed })?;
                    let o = rsc_random_test(&s.x, &s.y, &penalty, &RscOptions { seed: seed ^ 0x9e37_79b9, stop_early: true, ..*opts })?;
                    Ok(o.pass)
                })
                .collect::<Result<Vec<bool>>>()?;
            cells.push(RscCell { rho, n, passed: passes.iter().filter(|p| **p).count(), instances });
        }
    }
    Ok(cells)
}

fn cell_seed(seed: u64, rho: f64, n: usize, i: usize) -> u64 {
    let mut rng = replicate_rng(seed, ((rho * 1000.0).round() as u64) << 32 | (n as u64) << 16 | i as u64);
    rng.random()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s4_has_two_unit_signals() {
        let s = generate_scenario(&Scenario { kind: ScenarioKind::S4, d: 100, n: 20, rho: 0.5, seed: 1 }).unwrap();
        assert_eq!(s.beta_true.iter().filter(|v| **v != 0.0).count(), 2);
        assert_eq!(&s.beta_true[..2], &[1.0, 1.0]);
    }

    #[test]
    fn s6_signals_and_intercept() {
        let s = generate_scenario(&Scenario { kind: ScenarioKind::S6, d: 100, n: 80, rho: 0.0, seed: 4 }).unwrap();
        assert_eq!(s.beta_true.iter().filter(|v| **v == 1.5).count(), 5);
        assert_eq!(s.beta_true[99], 0.0);
        assert!((0..80).all(|i| s.x[(i, 99)] == 1.0));
    }

    #[test]
    fn same_seed_same_sample() {
        let sc = Scenario { kind: ScenarioKind::S52, d: 20, n: 10, rho: 0.0, seed: 9 };
        let a = generate_scenario(&sc).unwrap();
        let b = generate_scenario(&sc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn metrics_arithmetic() {
        let t = [1.5, 1.5, 1.5, 1.5, 1.5, 0.0];
        let m = compute_metrics(&[0.0; 6], &t, None, 1.0, 1.0, 0.0, None).unwrap();
        assert_eq!((m.ad, m.fp, m.fn_), (7.5, 0, 5));
        let m = compute_metrics(&t, &t, None, 1.0, 1.0, 0.0, None).unwrap();
        assert_eq!((m.ad, m.fp, m.fn_), (0.0, 0, 0));
    }

    #[test]
    fn gap_of_rounded_table_entries() {
        // 0.900 and 0.539 are rounded; their exact quotient gives 40.11
        assert!((gap_percent(0.900, 0.539) - 40.11).abs() < 0.01);
    }

    #[test]
    fn single_candidate_grid() {
        let x = Matrix::identity(3);
        let spec = tune_lambda(&x, &[1.0, 0.0, 2.0], None, PenaltyFamily::Scad, 3.7, &[0.3], Selector::Hbic).unwrap();
        assert_eq!(spec.lambda, 0.3);
        assert!(tune_lambda(&x, &[1.0, 0.0, 2.0], None, PenaltyFamily::Scad, 3.7, &[], Selector::Hbic).is_err());
    }

    #[test]
    fn convex_slices_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Matrix::from_fn(30, 4, |_, _| rng.random_range(-1.0..1.0));
        let y = vec![0.0; 30];
        let spec = PenaltySpec::scad(0.0, 3.7).unwrap();
        let o = rsc_random_test(&x, &y, &spec, &RscOptions { reps: 2000, range: Some(5.0), ..Default::default() }).unwrap();
        assert!(o.pass && o.violations == 0);
    }

    #[test]
    fn concave_slice_fails() {
        // one tiny column: the penalty's concavity dominates
        let x = Matrix::from_rows(&[vec![0.01, 0.0], vec![0.0, 0.01]]);
        let spec = PenaltySpec::scad(1.0, 3.7).unwrap();
        let o = rsc_random_test(&x, &[0.0, 0.0], &spec, &RscOptions { reps: 500, ..Default::default() }).unwrap();
        assert!(!o.pass && o.violations > 0);
    }

    #[test]
    fn oracle_is_restricted_least_squares() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 2.0, 1.0]]);
        let b = oracle_estimator(&x, &[1.0, 2.0, 3.0], &[0, 2]).unwrap();
        assert_eq!(b[1], 0.0);
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[2] - 2.0).abs() < 1e-12);
    }
}
