//! Fully resolved complementarity patterns and their exhaustive enumeration.

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::numerics::simplex::{solve_lp, LpSolution, LpStatus};
use crate::reformulate::{LpccModel, PairKind, PairState};

#[derive(Clone, Debug)]
pub struct PatternSolution {
    pub lp: LpSolution,
    /// LPCC point (first `num_vars` entries of the LP solution).
    pub point: Vec<f64>,
    pub beta: Vec<f64>,
    /// LP objective plus loss constant and penalty offset.
    pub reported: f64,
    /// ℒ(β).
    pub objective: f64,
}

/// Solves the LP of a fully resolved pattern.
pub fn solve_pattern_lp(model: &LpccModel, inst: &ProblemInstance, pattern: &[PairState]) -> Result<PatternSolution> {
    if pattern.len() != model.pairs.len() {
        return Err(Error::Dimension(format!("pattern has {} entries, model has {} pairs", pattern.len(), model.pairs.len())));
    }
    if pattern.contains(&PairState::Free) {
        return Err(Error::InvalidParameter("pattern LP needs every pair resolved".into()));
    }
    let lp = solve_lp(&model.pattern_lp(pattern, None).build(), None);
    match lp.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible("pattern LP".into())),
        s => return Err(Error::Numerical(format!("pattern LP ended with {s:?}"))),
    }
    let point = lp.x[..model.num_vars()].to_vec();
    let beta = point[..model.layout.dim].to_vec();
    let reported = model.reported_value(&point);
    let objective = inst.objective(&beta);
    Ok(PatternSolution { lp, point, beta, reported, objective })
}

/// Pair order used by the enumeration: the four pairs of each penalized coordinate
/// together, then constraint pairs, then box pairs.
pub fn enumeration_order(model: &LpccModel) -> Vec<usize> {
    let p = model.layout.p;
    let mut order = vec![];
    for k in 0..p {
        for t in 0..4 {
            order.push(t * p + k);
        }
    }
    order.extend(4 * p..model.pairs.len());
    order
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub best: Option<PatternSolution>,
    pub lp_solves: usize,
    pub leaves: usize,
}

fn feasible(model: &LpccModel, pattern: &[PairState]) -> bool {
    let mut b = model.pattern_lp(pattern, None);
    for j in 0..model.num_vars() {
        b.set_cost(j, 0.0);
    }
    solve_lp(&b.build(), None).status == LpStatus::Optimal
}

/// Depth-first enumeration of all patterns, pruning partial patterns whose LP is
/// infeasible. Leaves are ranked by ℒ at their β.
pub fn enumerate_patterns(model: &LpccModel, inst: &ProblemInstance) -> Enumeration {
    let order = enumeration_order(model);
    let mut pattern = vec![PairState::Free; model.pairs.len()];
    let mut out = Enumeration { best: None, lp_solves: 0, leaves: 0 };
    dfs(model, inst, &order, 0, &mut pattern, &mut out);
    out
}

fn dfs(model: &LpccModel, inst: &ProblemInstance, order: &[usize], depth: usize, pattern: &mut Vec<PairState>, out: &mut Enumeration) {
    if depth == order.len() {
        out.lp_solves += 1;
        if let Ok(sol) = solve_pattern_lp(model, inst, pattern) {
            out.leaves += 1;
            let better = match &out.best {
                None => true,
                Some(b) => sol.reported < b.reported,
            };
            if better {
                out.best = Some(sol);
            }
        }
        return;
    }
    let k = order[depth];
    for st in [PairState::LeftZero, PairState::RightZero] {
        pattern[k] = st;
        // the last pair of a group is checked together with the leaf LP
        let check = depth + 1 < order.len() && group_end(model, order, depth);
        out.lp_solves += check as usize;
        if !check || feasible(model, pattern) {
            dfs(model, inst, order, depth + 1, pattern, out);
        }
    }
    pattern[k] = PairState::Free;
}

/// True when `order[depth]` closes a group (a coordinate's four pairs, or any single
/// constraint/box pair).
fn group_end(model: &LpccModel, order: &[usize], depth: usize) -> bool {
    let pair = &model.pairs[order[depth]];
    match pair.kind {
        PairKind::GUpper => true,
        PairKind::AbsPlus | PairKind::AbsMinus | PairKind::GLower => false,
        _ => true,
    }
}
