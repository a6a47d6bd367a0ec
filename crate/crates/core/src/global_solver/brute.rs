//! Exhaustive oracles: a dense grid over β and the enumeration of all
//! complementarity patterns.

use super::pattern::enumerate_patterns;
use super::{kkt_point, verify_kkt, Clock, Multipliers, SolveResult, SolveStatus};
use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::reformulate::{build_lpcc, estimate_big_m};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BruteMode {
    Grid,
    PatternEnum,
}

pub const GRID_MAX_DIM: usize = 3;
pub const PATTERN_MAX_PAIRS: usize = 22;

/// Points per axis in the first pass, indexed by dimension.
const FIRST_PASS: [usize; 4] = [0, 1_000_001, 1_401, 127];
/// Points per axis in each refinement window.
const REFINE: [usize; 4] = [0, 2_001, 201, 41];
const CANDIDATES: usize = 8;
/// Re-centred scans allowed at one scale.
const MAX_REPEATS: usize = 200;
/// Refinement stops once the spacing is below this fraction of the box.
const FINAL_SPACING: f64 = 1e-10;

fn axis(lo: f64, hi: f64, count: usize, specials: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = if count <= 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
    };
    v.extend(specials.iter().copied().filter(|s| *s >= lo && *s <= hi));
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

struct Grid<'a> {
    inst: &'a ProblemInstance,
    dim: usize,
    specials: Vec<f64>,
}

impl Grid<'_> {
    /// ℒ at the lifted point, +∞ when infeasible.
    fn value(&self, beta: &[f64]) -> f64 {
        let inst = self.inst;
        if self.dim < inst.dim() {
            let x = inst.lift(beta);
            if x.iter().any(|v| v.abs() > inst.box_c) {
                return f64::INFINITY;
            }
            let loss = inst.data_loss(beta).expect("design");
            let pen: f64 = (0..self.dim).filter(|&i| inst.penalized[i]).map(|i| inst.penalty.value(beta[i].abs())).sum();
            return loss + inst.nf() * pen;
        }
        if inst.m() > 0 && inst.feasible.slacks(beta).iter().any(|s| *s < -1e-12) {
            return f64::INFINITY;
        }
        inst.objective(beta)
    }

    /// Evaluates the product grid of `axes`, returning local minima of the grid
    /// (no better axis neighbour), best first.
    fn scan(&self, axes: &[Vec<f64>]) -> Vec<(f64, Vec<f64>)> {
        let dims: Vec<usize> = axes.iter().map(Vec::len).collect();
        let total: usize = dims.iter().product();
        let idx = |mut k: usize| -> Vec<usize> {
            let mut out = vec![0; dims.len()];
            for (t, &n) in dims.iter().enumerate().rev() {
                out[t] = k % n;
                k /= n;
            }
            out
        };
        let point = |ix: &[usize]| -> Vec<f64> { ix.iter().enumerate().map(|(t, &j)| axes[t][j]).collect() };
        let vals: Vec<f64> = (0..total).into_par_iter().map(|k| self.value(&point(&idx(k)))).collect();
        let mut mins: Vec<(f64, Vec<f64>)> = vec![];
        let stride = |t: usize| dims[t + 1..].iter().product::<usize>();
        for k in 0..total {
            let v = vals[k];
            if !v.is_finite() {
                continue;
            }
            let ix = idx(k);
            let mut local = true;
            for t in 0..dims.len() {
                let s = stride(t);
                if ix[t] > 0 && vals[k - s] < v {
                    local = false;
                }
                if ix[t] + 1 < dims[t] && vals[k + s] < v {
                    local = false;
                }
            }
            if local {
                mins.push((v, point(&ix)));
            }
        }
        mins.sort_by(|a, b| a.0.total_cmp(&b.0));
        mins.truncate(CANDIDATES);
        mins
    }
}

fn grid_search(inst: &ProblemInstance) -> Result<(Vec<f64>, f64, usize)> {
    let dim = inst.beta_dim();
    if dim == 0 || dim > GRID_MAX_DIM {
        return Err(Error::SizeGuard(format!("grid oracle handles at most {GRID_MAX_DIM} coordinates, got {dim}")));
    }
    let c = inst.box_c;
    let s = inst.penalty;
    let mut specials = vec![0.0];
    for v in [s.lambda, s.a * s.lambda, c] {
        specials.extend([v, -v]);
    }
    let g = Grid { inst, dim, specials };
    let n0 = FIRST_PASS[dim];
    let axes: Vec<Vec<f64>> = (0..dim).map(|_| axis(-c, c, n0, &g.specials)).collect();
    let mut evals = axes.iter().map(Vec::len).product::<usize>();
    let mut cands = g.scan(&axes);
    if cands.is_empty() {
        return Err(Error::Infeasible("no feasible grid point".into()));
    }
    let mut h = 2.0 * c / (n0 - 1) as f64;
    let nr = REFINE[dim];
    let mut repeats = 0;
    while h > FINAL_SPACING * c.max(1.0) {
        let mut next = vec![];
        for (_, p) in &cands {
            let axes: Vec<Vec<f64>> =
                p.iter().map(|&v| axis((v - 2.0 * h).max(-c), (v + 2.0 * h).min(c), nr, &g.specials)).collect();
            evals += axes.iter().map(Vec::len).product::<usize>();
            next.extend(g.scan(&axes));
            next.push((g.value(p), p.clone()));
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal)));
        next.dedup_by(|b, a| a.1 == b.1);
        next.truncate(CANDIDATES);
        // a minimum on a slanted constraint is approached along a staircase of grid
        // points, so the window is re-centred at the same scale while that improves
        let moved = next[0].0 < cands[0].0 - 1e-13 * cands[0].0.abs().max(1.0);
        cands = next;
        if moved && repeats < MAX_REPEATS {
            repeats += 1;
        } else {
            repeats = 0;
            h *= 4.0 / (nr - 1) as f64;
        }
    }
    let (v, p) = cands.swap_remove(0);
    Ok((inst.lift(&p), v, evals))
}

/// Exhaustive global minimization for small instances.
pub fn brute_force_global(inst: &ProblemInstance, mode: BruteMode) -> Result<SolveResult> {
    let clock = Clock::new(None);
    let model = build_lpcc(inst)?;
    let big_m = estimate_big_m(inst)?;
    let (beta, nodes) = match mode {
        BruteMode::Grid => {
            let (beta, _, evals) = grid_search(inst)?;
            (beta, evals)
        }
        BruteMode::PatternEnum => {
            let pairs = model.pairs.len();
            if pairs > PATTERN_MAX_PAIRS {
                return Err(Error::SizeGuard(format!("pattern enumeration handles at most {PATTERN_MAX_PAIRS} pairs, got {pairs}")));
            }
            let e = enumerate_patterns(&model, inst);
            let best = e.best.ok_or_else(|| Error::Infeasible("no feasible pattern".into()))?;
            (best.beta, e.lp_solves)
        }
    };
    let objective = inst.objective(&beta);
    let x = kkt_point(&model, inst, &beta);
    let rep = verify_kkt(&model, &x);
    Ok(SolveResult {
        objective,
        lower_bound: objective,
        gap: 0.0,
        nodes_explored: nodes,
        status: SolveStatus::Certified,
        multipliers: Some(Multipliers::from_point(&model, &x)),
        kkt: Some(rep),
        big_m_used: big_m,
        bound: super::BoundKind::Auto,
        beta_hat: beta,
        wall_time_ms: clock.ms(),
    })
}
