//! Branch and bound with per-coordinate convex envelopes.

use super::envelope::{CoordModel, CoordPattern, FREE4};
use super::{seed_incumbent, Clock, Incumbent, Search, SolveOptions, SolveStatus};
use crate::error::{Error, Result};
use crate::local_solvers::cd_from;
use crate::model::ProblemInstance;
use crate::numerics::dense::{psd_solve, Matrix, PsdSolve};
use crate::numerics::simplex::{solve_lp, LpBuilder, LpStatus, RowKind};
use crate::penalty::PenaltyFamily;
use crate::reformulate::{LpccModel, PairState};
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

#[derive(Clone, Debug)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Coordinate restricted to |b| ≥ aλ.
    outer: Vec<bool>,
    lb: f64,
    depth: usize,
    seq: u64,
    warm: Option<Arc<Vec<f64>>>,
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
    /// Max-heap order: smallest bound first, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lb
            .total_cmp(&self.lb)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

struct Ctx<'a> {
    inst: &'a ProblemInstance,
    penalized: Vec<bool>,
    use_lp: bool,
    opts: &'a SolveOptions,
}

/// Children of one coordinate as (lo, hi, outer).
struct Split {
    coord: usize,
    parts: Vec<(f64, f64, bool)>,
}

impl Split {
    fn cuts(coord: usize, lo: f64, hi: f64, outer: bool, cuts: &[f64]) -> Split {
        let mut edges = vec![lo];
        edges.extend_from_slice(cuts);
        edges.push(hi);
        Split { coord, parts: edges.windows(2).map(|w| (w[0], w[1], outer)).collect() }
    }
}

struct Eval {
    /// None when the node is empty.
    lb: Option<f64>,
    x: Vec<f64>,
    cands: Vec<Vec<f64>>,
    split: Option<Split>,
}

impl Ctx<'_> {
    fn coord_model(&self, i: usize, lo: f64, hi: f64, outer: bool) -> CoordModel {
        if self.penalized[i] {
            let pat = if outer { self.outer_pattern() } else { FREE4 };
            CoordModel::penalized(&self.inst.penalty, self.inst.nf(), &pat, lo, hi)
        } else {
            CoordModel::unpenalized(lo, hi)
        }
    }

    /// Pair states leaving only the outer piece.
    fn outer_pattern(&self) -> CoordPattern {
        let mut pat = FREE4;
        match self.inst.penalty.family {
            PenaltyFamily::Scad => pat[2] = PairState::RightZero,
            PenaltyFamily::Mcp => pat[3] = PairState::RightZero,
        }
        pat
    }

    fn evaluate(&self, node: &Node, ub: f64) -> Eval {
        let inst = self.inst;
        let d = inst.dim();
        let empty = Eval { lb: None, x: vec![], cands: vec![], split: None };
        let cms: Vec<CoordModel> = (0..d).map(|i| self.coord_model(i, node.lo[i], node.hi[i], node.outer[i])).collect();
        if cms.iter().any(CoordModel::is_empty) {
            return empty;
        }
        let (lo, hi) = (&node.lo, &node.hi);
        let cut = ub - inst.loss.constant - 0.5 * self.opts.tolerance(ub);
        let tol = 0.1 * self.opts.tolerance(if ub.is_finite() { ub } else { 1.0 });
        let x0: Vec<f64> = match &node.warm {
            Some(w) => (0..d).map(|i| w[i].clamp(lo[i], hi[i])).collect(),
            None => (0..d).map(|i| 0.0_f64.clamp(lo[i], hi[i])).collect(),
        };
        let relax = if self.use_lp {
            lp_relax(inst, &cms, lo, hi, &x0, cut, tol)
        } else {
            Some(cd_relax(&inst.loss.q_mat, &inst.loss.q, &cms, x0, cut, tol, 400, true))
        };
        let Some(mut r) = relax else {
            return empty;
        };
        let mut cands = vec![r.x.clone()];
        if inst.m() == 0 && node.seq % 16 == 0 {
            cands.push(cd_from(inst, r.x.clone(), 1e-10, 100).beta);
        }
        if r.lb >= cut {
            let lb = r.lb.max(node.lb - inst.loss.constant) + inst.loss.constant;
            return Eval { lb: Some(lb), x: r.x, cands, split: None };
        }
        let mut split = self.choose_split(&cms, node, &r.x, r.value);
        if log::log_enabled!(log::Level::Trace) {
            let kind = split.as_ref().map_or("none".to_string(), |s| format!("{}@{:?}", s.coord, s.parts));
            log::trace!("depth {} value {:.4} lb {:.4} gap {:.2e} split {kind}", node.depth, r.value, r.lb, r.value - r.lb);
        }
        if split.is_none() && r.value - r.lb > tol {
            // envelope exact at x but the relaxation is not solved yet
            if !self.use_lp {
                r = cd_relax(&inst.loss.q_mat, &inst.loss.q, &cms, r.x, cut, tol, 20_000, false);
                cands.push(r.x.clone());
                split = self.choose_split(&cms, node, &r.x, r.value);
            }
            // cutting planes close the quadratic gap faster on narrower boxes
            let prefer_penalized = !self.use_lp;
            split = split.or_else(|| (r.value - r.lb > tol).then(|| widest(node, &self.penalized, prefer_penalized)).flatten());
        }
        let lb = r.lb.max(node.lb - inst.loss.constant) + inst.loss.constant;
        Eval { lb: Some(lb), x: r.x, cands, split }
    }

    /// Coordinate with the largest envelope error at x. An undecided coordinate is
    /// split into |b| ≤ aλ and |b| ≥ aλ, an outer one by sign; inside [−aλ, aλ] the
    /// cuts are ±λ for SCAD, then 0, then bisection at x.
    fn choose_split(&self, cms: &[CoordModel], node: &Node, x: &[f64], value: f64) -> Option<Split> {
        let (lo, hi) = (&node.lo, &node.hi);
        let d = x.len();
        let err_tol = 1e-12 * value.abs().max(1.0);
        let mut errs: Vec<(bool, f64, usize)> = (0..d)
            .filter(|&i| self.penalized[i])
            .map(|i| {
                let psi = cms[i].psi(x[i]);
                if psi.is_finite() {
                    (false, psi - cms[i].env(x[i]), i)
                } else {
                    (true, cms[i].gap_distance(x[i]), i)
                }
            })
            .filter(|&(gap, e, _)| gap || e > err_tol)
            .collect();
        errs.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
        let spec = &self.inst.penalty;
        let al = spec.a * spec.lambda;
        let c = self.inst.box_c;
        let mut tiers = vec![];
        if spec.family == PenaltyFamily::Scad {
            tiers.push(vec![-spec.lambda, spec.lambda]);
        }
        tiers.push(vec![0.0]);
        for &(_, _, i) in &errs {
            let (l, h) = (lo[i], hi[i]);
            let w = h - l;
            if w <= 1e-9 * c.max(1.0) {
                continue;
            }
            let outer = node.outer[i];
            if outer && l < -al && h > al && x[i] > -al && x[i] < al {
                return Some(Split { coord: i, parts: vec![(l, -al, true), (al, h, true)] });
            }
            let (il, ih) = (l.max(-al), h.min(al));
            if !outer && (l < -al || h > al) && il <= ih {
                return Some(Split { coord: i, parts: vec![(il, ih, false), (l, h, true)] });
            }
            let inside = |t: &f64| *t > l + 1e-12 * w && *t < h - 1e-12 * w;
            if !outer {
                for tier in &tiers {
                    let cuts: Vec<f64> = tier.iter().copied().filter(inside).collect();
                    if !cuts.is_empty() {
                        return Some(Split::cuts(i, l, h, false, &cuts));
                    }
                }
            }
            let at = x[i].clamp(l + 0.01 * w, h - 0.01 * w);
            return Some(Split::cuts(i, l, h, outer, &[at]));
        }
        None
    }
}

fn widest(node: &Node, penalized: &[bool], prefer_penalized: bool) -> Option<Split> {
    let (lo, hi) = (&node.lo, &node.hi);
    let key = |i: usize, w: f64| (prefer_penalized && penalized[i], w);
    let mut best: Option<(f64, usize)> = None;
    for i in 0..lo.len() {
        let w = hi[i] - lo[i];
        if w > 0.0 && best.is_none_or(|(bw, bi)| key(i, w) > key(bi, bw)) {
            best = Some((w, i));
        }
    }
    best.map(|(_, i)| Split::cuts(i, lo[i], hi[i], node.outer[i], &[0.5 * (lo[i] + hi[i])]))
}

pub(crate) struct Relaxed {
    pub x: Vec<f64>,
    /// Relaxation objective at x (without the loss constant).
    pub value: f64,
    /// Certified lower bound on the relaxation minimum.
    pub lb: f64,
}

fn relax_bound(q_mat: &Matrix, q: &[f64], cms: &[CoordModel], x: &[f64], g: &[f64]) -> (f64, f64) {
    let f: f64 = 0.5 * x.iter().zip(g.iter().zip(q)).map(|(xi, (gi, qi))| xi * (gi + qi)).sum::<f64>();
    let _ = q_mat;
    let mut v = f;
    let mut lb = f;
    for i in 0..x.len() {
        v += cms[i].env(x[i]);
        lb += cms[i].min_linear(g[i]) - g[i] * x[i];
    }
    (v, lb)
}

/// One active-set step: every coordinate is either held at a hull vertex where it is
/// optimal or kept on one hull segment, and the reduced quadratic is minimized
/// (minimum-norm solution) up to the first segment end. Returns true on a full step.
fn newton_step(q_mat: &Matrix, cms: &[CoordModel], x: &mut [f64], g: &mut [f64]) -> Option<bool> {
    let d = x.len();
    let mut free = vec![];
    let mut rhs = vec![];
    let mut bounds = vec![];
    for i in 0..d {
        let h = &cms[i].hull;
        if h.len() < 2 {
            continue;
        }
        let slopes = cms[i].slopes();
        let width = h[h.len() - 1].0 - h[0].0;
        let j = h.partition_point(|p| p.0 < x[i]).min(h.len() - 1);
        let near = if j > 0 && (x[i] - h[j - 1].0).abs() < (h[j].0 - x[i]).abs() { j - 1 } else { j };
        let seg = if (x[i] - h[near].0).abs() <= 1e-12 * width.max(1.0) {
            let sl = if near > 0 { slopes[near - 1] } else { f64::NEG_INFINITY };
            let sr = if near < slopes.len() { slopes[near] } else { f64::INFINITY };
            let gtol = 1e-12 * (1.0 + g[i].abs());
            if g[i] + sl <= gtol && g[i] + sr >= -gtol {
                continue;
            }
            if g[i] + sr < 0.0 {
                near
            } else {
                near - 1
            }
        } else {
            j.clamp(1, h.len() - 1) - 1
        };
        free.push(i);
        rhs.push(-(g[i] + slopes[seg]));
        bounds.push((h[seg].0, h[seg + 1].0));
    }
    // a coordinate blocked at zero step length is held for this step
    let (delta, t, hit, full_candidate) = loop {
        if free.is_empty() {
            return Some(true);
        }
        let k = free.len();
        let qff = Matrix::from_fn(k, k, |a, b| q_mat[(free[a], free[b])]);
        let (delta, full_candidate) = match psd_solve(&qff, &rhs, 1e-11) {
            PsdSolve::Solution(s) => (s, true),
            PsdSolve::NullDirection(z) => {
                // the reduced model is linear along z: go to the first segment end
                let reach = bounds.iter().map(|b| b.1 - b.0).fold(0.0_f64, f64::max);
                let zn = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                (z.iter().map(|v| v / zn * 2.0 * reach).collect::<Vec<f64>>(), false)
            }
        };
        if delta.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut t = 1.0_f64;
        let mut hit = None;
        for a in 0..k {
            let xi = x[free[a]];
            let (lo, hi) = bounds[a];
            let lim = if delta[a] > 0.0 {
                (hi - xi) / delta[a]
            } else if delta[a] < 0.0 {
                (lo - xi) / delta[a]
            } else {
                f64::INFINITY
            };
            if lim < t {
                t = lim.max(0.0);
                hit = Some(a);
            }
        }
        match hit {
            Some(a) if t <= 0.0 => {
                free.remove(a);
                rhs.remove(a);
                bounds.remove(a);
            }
            _ => break (delta, t, hit, full_candidate),
        }
    };
    let k = free.len();
    for a in 0..k {
        let i = free[a];
        let mut nx = (x[i] + t * delta[a]).clamp(bounds[a].0, bounds[a].1);
        if hit == Some(a) {
            nx = if delta[a] > 0.0 { bounds[a].1 } else { bounds[a].0 };
        }
        let step = nx - x[i];
        if step != 0.0 {
            x[i] = nx;
            for (gj, qv) in g.iter_mut().zip(q_mat.row(i)) {
                *gj += step * qv;
            }
        }
    }
    Some(hit.is_none() && full_candidate)
}

/// Coordinate descent on ½xᵀQx + qᵀx + Σ env_i(x_i), finished by active-set steps,
/// with the Lagrangian bound f(x) + Σ min_t (env_i(t) + g_i(t − x_i)).
pub(crate) fn cd_relax(q_mat: &Matrix, q: &[f64], cms: &[CoordModel], mut x: Vec<f64>, cut: f64, tol: f64, max_sweeps: usize, loose: bool) -> Relaxed {
    let d = q.len();
    let mut g = q_mat.matvec(&x);
    for (gi, qi) in g.iter_mut().zip(q) {
        *gi += qi;
    }
    let mut best_lb = f64::NEG_INFINITY;
    let mut value = f64::INFINITY;
    for sweep in 0..max_sweeps {
        for i in 0..d {
            if cms[i].hull.len() < 2 {
                continue;
            }
            let qii = q_mat[(i, i)];
            let t = cms[i].prox(qii, qii * x[i] - g[i]);
            let delta = t - x[i];
            if delta != 0.0 {
                x[i] = t;
                for (gj, qv) in g.iter_mut().zip(q_mat.row(i)) {
                    *gj += delta * qv;
                }
            }
        }
        if sweep % 4 != 3 && sweep + 1 != max_sweeps {
            continue;
        }
        let (v, lb) = relax_bound(q_mat, q, cms, &x, &g);
        value = v;
        best_lb = best_lb.max(lb);
        if value - best_lb <= tol || best_lb >= cut || loose && value - best_lb <= 0.05 * (cut - value) {
            break;
        }
        if sweep % 8 == 7 {
            let (mut xs, mut gs) = (x.clone(), g.clone());
            for _ in 0..2 * d + 2 {
                match newton_step(q_mat, cms, &mut xs, &mut gs) {
                    Some(true) => break,
                    Some(false) => {}
                    None => break,
                }
            }
            let (v, lb) = relax_bound(q_mat, q, cms, &xs, &gs);
            if v <= value {
                x = xs;
                g = gs;
                value = v;
            }
            best_lb = best_lb.max(lb);
            if value - best_lb <= tol || best_lb >= cut || loose && value - best_lb <= 0.05 * (cut - value) {
                break;
            }
        }
    }
    Relaxed { x, value, lb: best_lb }
}

/// LP relaxation with envelope epigraphs; a convex quadratic part is handled with
/// cutting planes.
fn lp_relax(inst: &ProblemInstance, cms: &[CoordModel], lo: &[f64], hi: &[f64], x0: &[f64], cut: f64, tol: f64) -> Option<Relaxed> {
    let d = inst.dim();
    let q_mat = &inst.loss.q_mat;
    let quad = q_mat.max_abs() > 0.0;
    let mut lp = LpBuilder::new();
    for i in 0..d {
        lp.add_var(inst.loss.q[i], lo[i], hi[i]);
    }
    for j in 0..inst.m() {
        let coeffs = (0..d)
            .filter_map(|i| {
                let v = inst.feasible.a[(i, j)];
                (v != 0.0).then_some((i, v))
            })
            .collect();
        lp.add_row(coeffs, RowKind::Le, inst.feasible.b[j]);
    }
    let mut constant = 0.0;
    for (i, cm) in cms.iter().enumerate() {
        if cm.hull.len() < 2 {
            constant += cm.hull[0].1;
            continue;
        }
        if cm.hull.iter().all(|p| p.1 == 0.0) {
            continue;
        }
        let t = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        for w in cm.hull.windows(2) {
            let s = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            // t ≥ v₀ + s(x − t₀)
            lp.add_row(vec![(t, 1.0), (i, -s)], RowKind::Ge, w[0].1 - s * w[0].0);
        }
    }
    let theta = quad.then(|| lp.add_var(1.0, 0.0, f64::INFINITY));
    let cut_at = |lp: &mut LpBuilder, x: &[f64]| {
        if let Some(th) = theta {
            let qx = q_mat.matvec(x);
            let half: f64 = 0.5 * x.iter().zip(&qx).map(|(a, b)| a * b).sum::<f64>();
            let mut coeffs = vec![(th, 1.0)];
            coeffs.extend((0..d).filter(|&i| qx[i] != 0.0).map(|i| (i, -qx[i])));
            lp.add_row(coeffs, RowKind::Ge, -half);
        }
    };
    cut_at(&mut lp, x0);
    let mut best_lb = f64::NEG_INFINITY;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..200 {
        let sol = solve_lp(&lp.build(), None);
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return None,
            _ => {
                log::warn!("node LP ended with {:?}", sol.status);
                return None;
            }
        }
        let x: Vec<f64> = (0..d).map(|i| sol.x[i].clamp(lo[i], hi[i])).collect();
        let lb = sol.objective + constant;
        best_lb = best_lb.max(lb);
        let f = 0.5 * q_mat.quad_form(&x) + x.iter().zip(&inst.loss.q).map(|(a, b)| a * b).sum::<f64>();
        let value = f + cms.iter().zip(&x).map(|(cm, &v)| cm.env(v)).sum::<f64>();
        if !quad || value - best_lb <= tol || best_lb >= cut {
            return Some(Relaxed { x, value, lb: best_lb });
        }
        cut_at(&mut lp, &x);
        if best.as_ref().is_none_or(|b| value < b.0) {
            best = Some((value, x));
        }
    }
    let (value, x) = best.unwrap_or_else(|| {
        let f = 0.5 * q_mat.quad_form(x0) + x0.iter().zip(&inst.loss.q).map(|(a, b)| a * b).sum::<f64>();
        (f + cms.iter().zip(x0).map(|(cm, &v)| cm.env(v)).sum::<f64>(), x0.to_vec())
    });
    Some(Relaxed { x, value, lb: best_lb })
}

pub(crate) fn search(inst: &ProblemInstance, model: &LpccModel, opts: &SolveOptions, clock: &Clock) -> Result<Search> {
    let d = inst.dim();
    let mut penalized = vec![false; d];
    for &i in &model.penalized {
        penalized[i] = true;
    }
    let ctx = Ctx { inst, penalized, use_lp: inst.m() > 0, opts };
    let mut inc = Incumbent { beta: vec![0.0; d], value: f64::INFINITY };
    if opts.seed_incumbent {
        seed_incumbent(inst, &mut inc);
    }
    let c = inst.box_c;
    let root = Node {
        lo: vec![-c; d],
        hi: vec![c; d],
        outer: vec![false; d],
        lb: f64::NEG_INFINITY,
        depth: 0,
        seq: 0,
        warm: None,
    };
    let mut heap = BinaryHeap::new();
    heap.push(root);
    let mut seq = 1u64;
    let mut nodes = 0usize;
    let mut closed_lb = f64::INFINITY;
    let mut status = SolveStatus::Certified;
    let batch = opts.threads.max(1);
    let mut root_done = false;
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
        let ub = inc.value;
        let evals: Vec<Eval> = work.par_iter().map(|n| ctx.evaluate(n, ub)).collect();
        nodes += work.len();
        if nodes % 1000 < batch {
            let open = heap.iter().map(|n| n.lb).fold(f64::INFINITY, f64::min);
            log::debug!("nodes {nodes} open {} lb {open:.6} ub {:.6}", heap.len(), inc.value);
        }
        for (node, ev) in work.into_iter().zip(evals) {
            let Some(lb) = ev.lb else {
                if !root_done {
                    return Err(Error::Infeasible("root relaxation is empty".into()));
                }
                continue;
            };
            root_done = true;
            for cand in &ev.cands {
                inc.offer(inst, cand);
            }
            if lb >= inc.value - opts.tolerance(inc.value) {
                closed_lb = closed_lb.min(lb);
                continue;
            }
            let Some(split) = ev.split else {
                closed_lb = closed_lb.min(lb);
                continue;
            };
            let warm = Some(Arc::new(ev.x));
            let i = split.coord;
            for (l, h, o) in split.parts {
                let (mut lo, mut hi, mut outer) = (node.lo.clone(), node.hi.clone(), node.outer.clone());
                lo[i] = l;
                hi[i] = h;
                outer[i] = o;
                seq += 1;
                heap.push(Node { lo, hi, outer, lb, depth: node.depth + 1, seq, warm: warm.clone() });
            }
        }
    }
    let open_lb = heap.iter().map(|n| n.lb).fold(f64::INFINITY, f64::min);
    let lower = closed_lb.min(open_lb).min(inc.value);
    if !inc.value.is_finite() {
        return Err(Error::Infeasible("no feasible point found".into()));
    }
    Ok(Search { beta: inc.beta, lower, nodes, status })
}
