//! Branch and bound on complementarity disjunctions with big-M LP relaxations.

use super::kkt::rounded_pattern;
use super::pattern::solve_pattern_lp;
use super::{seed_incumbent, Clock, Incumbent, Search, SolveOptions, SolveStatus};
use crate::error::{Error, Result};
use crate::local_solvers::cd_from;
use crate::model::ProblemInstance;
use crate::numerics::simplex::{solve_lp, Basis, LpStatus};
use crate::reformulate::{LpccModel, MipModel, PairState};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

struct Node {
    pattern: Vec<PairState>,
    lb: f64,
    depth: usize,
    seq: u64,
    basis: Option<Arc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lb
            .total_cmp(&self.lb)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Eval {
    /// None when the node LP is infeasible.
    lb: Option<f64>,
    cands: Vec<Vec<f64>>,
    branch: Option<usize>,
    basis: Option<Arc<Basis>>,
    failed: bool,
}

fn evaluate(mip: &MipModel, inst: &ProblemInstance, node: &Node) -> Eval {
    let model = &mip.lpcc;
    let bounds: Vec<(f64, f64)> = node
        .pattern
        .iter()
        .map(|s| match s {
            PairState::Free => (0.0, 1.0),
            PairState::LeftZero => (0.0, 0.0),
            PairState::RightZero => (1.0, 1.0),
        })
        .collect();
    let (lp, _) = mip.relaxation(&bounds);
    let sol = solve_lp(&lp, node.basis.as_deref());
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Eval { lb: None, cands: vec![], branch: None, basis: None, failed: false },
        s => {
            log::warn!("node LP ended with {s:?}");
            return Eval { lb: None, cands: vec![], branch: None, basis: None, failed: true };
        }
    }
    let x = &sol.x[..model.num_vars()];
    let lb = (sol.objective + model.loss_constant + model.penalty_offset).max(node.lb);
    let mut cands = vec![x[..model.layout.dim].to_vec()];
    let pat = rounded_pattern(model, x, Some(&node.pattern));
    if let Ok(ps) = solve_pattern_lp(model, inst, &pat) {
        cands.push(ps.beta);
    }
    if inst.m() == 0 {
        let polished: Vec<Vec<f64>> = cands.iter().map(|c| cd_from(inst, c.clone(), 1e-10, 100).beta).collect();
        cands.extend(polished);
    }
    let mut branch = None;
    let mut best = 0.0;
    for (k, pair) in model.pairs.iter().enumerate() {
        if node.pattern[k] != PairState::Free {
            continue;
        }
        let prod = x[pair.var].max(0.0) * pair.expr.eval(x).max(0.0);
        if prod > best {
            best = prod;
            branch = Some(k);
        }
    }
    if best <= 1e-14 {
        branch = None;
    }
    Eval { lb: Some(lb), cands, branch, basis: sol.basis.map(Arc::new), failed: false }
}

pub(crate) fn search(inst: &ProblemInstance, model: &LpccModel, big_m: f64, opts: &SolveOptions, clock: &Clock) -> Result<Search> {
    let mip = MipModel { lpcc: model.clone(), big_m };
    let d = inst.dim();
    let mut inc = Incumbent { beta: vec![0.0; d], value: f64::INFINITY };
    if opts.seed_incumbent {
        seed_incumbent(inst, &mut inc);
    }
    let mut heap = BinaryHeap::new();
    heap.push(Node { pattern: vec![PairState::Free; model.pairs.len()], lb: f64::NEG_INFINITY, depth: 0, seq: 0, basis: None });
    let mut seq = 1u64;
    let mut nodes = 0usize;
    let mut closed_lb = f64::INFINITY;
    let mut status = SolveStatus::Certified;
    let mut numerical_trouble = false;
    let batch = opts.threads.max(1);
    let mut first = true;
    while !heap.is_empty() {
        if opts.node_limit.is_some_and(|l| nodes >= l) {
            status = SolveStatus::NodeLimit;
            break;
        }
        if clock.expired() {
            status = SolveStatus::TimeLimit;
            break;
        }
        let mut work = vec![];
        while work.len() < batch {
            let Some(node) = heap.pop() else { break };
            if node.lb >= inc.value - opts.tolerance(inc.value) {
                closed_lb = closed_lb.min(node.lb);
                continue;
            }
            work.push(node);
        }
        if work.is_empty() {
            break;
        }
        let evals: Vec<Eval> = work.par_iter().map(|n| evaluate(&mip, inst, n)).collect();
        nodes += work.len();
        for (node, ev) in work.into_iter().zip(evals) {
            if first && ev.lb.is_none() && !ev.failed {
                return Err(Error::Infeasible("root relaxation is infeasible".into()));
            }
            first = false;
            if ev.failed {
                numerical_trouble = true;
                closed_lb = closed_lb.min(node.lb);
                continue;
            }
            let Some(lb) = ev.lb else { continue };
            for c in &ev.cands {
                inc.offer(inst, c);
            }
            if lb >= inc.value - opts.tolerance(inc.value) {
                closed_lb = closed_lb.min(lb);
                continue;
            }
            let Some(k) = ev.branch else {
                closed_lb = closed_lb.min(lb);
                continue;
            };
            for st in [PairState::LeftZero, PairState::RightZero] {
                let mut pattern = node.pattern.clone();
                pattern[k] = st;
                seq += 1;
                heap.push(Node { pattern, lb, depth: node.depth + 1, seq, basis: ev.basis.clone() });
            }
        }
    }
    if !inc.value.is_finite() {
        return Err(Error::Infeasible("no feasible point found".into()));
    }
    let open_lb = heap.iter().map(|n| n.lb).fold(f64::INFINITY, f64::min);
    let lower = closed_lb.min(open_lb).min(inc.value);
    if numerical_trouble && status == SolveStatus::Certified {
        status = SolveStatus::GapLimit;
    }
    Ok(Search { beta: inc.beta, lower, nodes, status })
}
