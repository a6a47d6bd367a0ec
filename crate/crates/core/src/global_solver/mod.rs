//! Certified global minimization by branch and bound.
//!
//! Two node bounds are available. `Lpcc` relaxes the big-M MIP: unresolved
//! complementarity pairs keep only nonnegativity and the ℳ caps, and branching
//! fixes one side of a pair. `Envelope` works in β space: for each coordinate the
//! pair states of the node (plus a coordinate interval) leave a small set of admissible
//! penalty pieces, their convex envelope is added to the loss, and the convex
//! relaxation is solved with coordinate descent or LP. It branches on pair states
//! first and on the coordinate interval once they are exhausted. `Auto` uses
//! `Envelope` whenever Q is positive semidefinite.

pub mod brute;
mod bnb_env;
mod bnb_lpcc;
pub mod envelope;
pub mod kkt;
pub mod pattern;

pub use brute::{brute_force_global, BruteMode};
pub use kkt::{kkt_point, verify_kkt, KktReport};
pub use pattern::{enumerate_patterns, solve_pattern_lp, PatternSolution};

use crate::error::{Error, Result};
use crate::local_solvers::{cd_from, initial_point, lla_from, Init, LocalOptions};
use crate::model::{ensure_valid, ProblemInstance};
use crate::numerics::symmetric_eigs;
use crate::reformulate::{build_lpcc, estimate_big_m, LpccModel};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Auto,
    Lpcc,
    Envelope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub gap_tol_rel: f64,
    pub gap_tol_abs: f64,
    pub node_limit: Option<usize>,
    /// Seconds.
    pub time_limit: Option<f64>,
    pub threads: usize,
    pub seed: u64,
    /// ℳ; estimated from the data when absent.
    pub big_m: Option<f64>,
    pub bound: BoundKind,
    /// Run local solvers at the root for a first incumbent.
    pub seed_incumbent: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap_tol_rel: 1e-6,
            gap_tol_abs: 1e-8,
            node_limit: None,
            time_limit: None,
            threads: 1,
            seed: 0,
            big_m: None,
            bound: BoundKind::Auto,
            seed_incumbent: true,
        }
    }
}

impl SolveOptions {
    pub(crate) fn tolerance(&self, ub: f64) -> f64 {
        self.gap_tol_abs.max(self.gap_tol_rel * ub.abs().max(1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Certified,
    /// The tree was exhausted but numerical trouble left the gap above tolerance.
    GapLimit,
    TimeLimit,
    NodeLimit,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    /// μ₁..μ₄ per penalized coordinate.
    pub mu: [Vec<f64>; 4],
    /// Constraint multipliers followed by box multipliers (upper, lower per coordinate).
    pub rho: Vec<f64>,
}

impl Multipliers {
    pub fn from_point(model: &LpccModel, x: &[f64]) -> Self {
        let lay = model.layout;
        let p = lay.p;
        Multipliers {
            g: (0..p).map(|k| x[lay.g(k)]).collect(),
            h: (0..p).map(|k| x[lay.h(k)]).collect(),
            mu: std::array::from_fn(|t| (0..p).map(|k| x[lay.mu(t, k)]).collect()),
            rho: (0..lay.rows).map(|r| x[lay.rho(r)]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub beta_hat: Vec<f64>,
    pub objective: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub nodes_explored: usize,
    pub status: SolveStatus,
    pub multipliers: Option<Multipliers>,
    pub kkt: Option<KktReport>,
    pub big_m_used: f64,
    pub bound: BoundKind,
    pub wall_time_ms: f64,
}

pub fn relative_gap(ub: f64, lb: f64) -> f64 {
    ((ub - lb) / ub.abs().max(1.0)).max(0.0)
}

/// Outcome of one tree search.
pub(crate) struct Search {
    pub beta: Vec<f64>,
    pub lower: f64,
    pub nodes: usize,
    pub status: SolveStatus,
}

/// Tracks the best point by ℒ.
pub(crate) struct Incumbent {
    pub beta: Vec<f64>,
    pub value: f64,
}

impl Incumbent {
    pub fn offer(&mut self, inst: &ProblemInstance, beta: &[f64]) -> bool {
        if inst.feasibility_violation(beta) > 1e-9 {
            return false;
        }
        let v = inst.objective(beta);
        if v < self.value {
            self.value = v;
            self.beta = beta.to_vec();
            true
        } else {
            false
        }
    }
}

pub(crate) struct Clock {
    start: Instant,
    limit: Option<f64>,
}

impl Clock {
    pub fn new(limit: Option<f64>) -> Self {
        Clock { start: Instant::now(), limit }
    }
    pub fn expired(&self) -> bool {
        self.limit.is_some_and(|l| self.start.elapsed().as_secs_f64() >= l)
    }
    pub fn ms(&self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }
}

/// Root incumbents: zero, LLA from the LASSO start and coordinate descent, for
/// instances without linear constraints.
pub(crate) fn seed_incumbent(inst: &ProblemInstance, inc: &mut Incumbent) {
    inc.offer(inst, &vec![0.0; inst.dim()]);
    if inst.m() != 0 {
        return;
    }
    let opts = LocalOptions { max_outer: 200, max_inner: 2000, ..Default::default() };
    let lam = inst.penalty.lambda * inst.nf();
    for init in [Init::Zero, Init::Lasso { omega: lam }, Init::LeastSquares] {
        let Ok(x0) = initial_point(inst, &init, 1e-10, 2000) else { continue };
        if inst.kind == crate::model::LossKind::LeastSquares {
            let r = lla_from(inst, x0.clone(), &opts);
            inc.offer(inst, &r.beta);
            let r = cd_from(inst, r.beta, 1e-12, 2000);
            inc.offer(inst, &r.beta);
        }
        let r = cd_from(inst, x0, 1e-12, 2000);
        inc.offer(inst, &r.beta);
    }
}

/// Moves β onto an exact KKT point when that does not increase ℒ.
pub(crate) fn polish(inst: &ProblemInstance, model: &LpccModel, beta: Vec<f64>) -> (Vec<f64>, Vec<f64>, KktReport) {
    let score = |b: &[f64]| {
        let x = kkt_point(model, inst, b);
        let r = verify_kkt(model, &x);
        (x, r)
    };
    let base = inst.objective(&beta);
    let tol = 1e-9 * base.abs().max(1.0);
    let (mut x, mut rep) = score(&beta);
    let mut best = beta;
    if rep.residual <= 1e-12 {
        return (best, x, rep);
    }
    let mut cands = vec![];
    // round-off from the relaxation leaves zero coordinates at ±1e-17 or so
    let snap = 1e-12 * inst.box_c.max(1.0);
    let snap_all = |b: &[f64]| -> Vec<f64> { b.iter().map(|v| if v.abs() <= snap { 0.0 } else { *v }).collect() };
    let snapped = snap_all(&best);
    let start = if snapped != best {
        cands.push(snapped.clone());
        snapped
    } else {
        best.clone()
    };
    let box_free = start.iter().all(|v| v.abs() < inst.box_c * (1.0 - 1e-9));
    if inst.m() == 0 && box_free {
        let mut cur = start.clone();
        for _ in 0..3 {
            match kkt::active_set_step(inst, &cur) {
                Some(nb) => {
                    cands.push(nb.clone());
                    cur = nb;
                }
                None => break,
            }
        }
    }
    let pat = kkt::rounded_pattern(model, &kkt_point(model, inst, &start), None);
    if let Ok(sol) = solve_pattern_lp(model, inst, &pat) {
        cands.push(sol.beta);
    }
    for c in cands {
        let c = snap_all(&c);
        if inst.feasibility_violation(&c) > 1e-9 || inst.objective(&c) > base + tol {
            continue;
        }
        let (cx, cr) = score(&c);
        if cr.residual < rep.residual {
            best = c;
            x = cx;
            rep = cr;
        }
    }
    (best, x, rep)
}

pub(crate) fn is_psd(inst: &ProblemInstance) -> Result<bool> {
    let q = &inst.loss.q_mat;
    if q.max_abs() == 0.0 {
        return Ok(true);
    }
    let ev = symmetric_eigs(q)?;
    Ok(ev[0] >= -1e-10 * q.max_abs())
}

/// Global minimization of ℒ over Λ ∩ box.
pub fn solve_global(inst: &ProblemInstance, opts: &SolveOptions) -> Result<SolveResult> {
    ensure_valid(inst)?;
    if !(opts.gap_tol_rel >= 0.0 && opts.gap_tol_abs >= 0.0) {
        return Err(Error::InvalidParameter("gap tolerances must be nonnegative".into()));
    }
    let clock = Clock::new(opts.time_limit);
    let model = build_lpcc(inst)?;
    let bound = match opts.bound {
        BoundKind::Auto if is_psd(inst)? => BoundKind::Envelope,
        BoundKind::Auto => BoundKind::Lpcc,
        b => b,
    };
    if bound == BoundKind::Envelope && !is_psd(inst)? {
        return Err(Error::InvalidInstance("envelope bound needs a positive semidefinite Q".into()));
    }
    let mut big_m = match opts.big_m {
        Some(m) => m,
        None => estimate_big_m(inst)?,
    };
    let threads = opts.threads.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    let mut escalations = 0;
    loop {
        let search = pool.install(|| match bound {
            BoundKind::Envelope => bnb_env::search(inst, &model, opts, &clock),
            _ => bnb_lpcc::search(inst, &model, big_m, opts, &clock),
        })?;
        let (beta, x, rep) = polish(inst, &model, search.beta);
        let objective = inst.objective(&beta);
        let lower = search.lower.min(objective);
        // ℳ-saturation audit: multipliers or slacks at the optimum reaching ℳ mean the
        // big-M relaxation may have cut off better points
        let peak = model
            .pairs
            .iter()
            .map(|p| x[p.var].max(p.expr.eval(&x)))
            .fold(0.0_f64, f64::max);
        if bound == BoundKind::Lpcc && peak >= big_m * (1.0 - 1e-6) && escalations < 3 {
            log::warn!("big-M {big_m} saturated (peak {peak}), escalating");
            big_m *= 10.0;
            escalations += 1;
            continue;
        }
        if beta.iter().any(|v| v.abs() >= inst.box_c * (1.0 - 1e-9)) {
            log::warn!("solution touches the box |beta_i| <= {}", inst.box_c);
        }
        let gap = relative_gap(objective, lower);
        let status = match search.status {
            SolveStatus::Certified if objective - lower > opts.tolerance(objective) => SolveStatus::GapLimit,
            s => s,
        };
        return Ok(SolveResult {
            beta_hat: beta,
            objective,
            lower_bound: lower,
            gap,
            nodes_explored: search.nodes,
            status,
            multipliers: Some(Multipliers::from_point(&model, &x)),
            kkt: Some(rep),
            big_m_used: big_m,
            bound,
            wall_time_ms: clock.ms(),
        });
    }
}
