//! Dense bounded-variable revised simplex.
//!
//! Solves `min cᵀx  s.t.  E x = f,  l ≤ x ≤ u` with a two-phase method. Phase 1
//! starts from an artificial basis, phase 2 optimizes the true costs. Dantzig pricing
//! with a Harris ratio test is used until `5·(rows+cols)` consecutive degenerate
//! pivots have been seen, after which Bland's rule takes over for the remainder of
//! the phase.

use super::dense::{norm_inf, Matrix};
use serde::{Deserialize, Serialize};

pub const FEAS_TOL: f64 = 1e-9;
pub const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 64;

#[derive(Clone, Debug)]
pub struct StandardLp {
    pub c: Vec<f64>,
    pub e: Matrix,
    pub f: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StandardLp {
    pub fn num_rows(&self) -> usize {
        self.e.rows()
    }

    pub fn num_cols(&self) -> usize {
        self.e.cols()
    }

    /// Max violation of `E x = f` and of the bounds.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let ex = self.e.matvec(x);
        let mut r = ex.iter().zip(&self.f).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        for j in 0..x.len() {
            r = r.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Breakdown that survived one refactorization and restart, or an iteration cap.
    NumericalFailure,
}

/// Basis snapshot: `head[r]` is the basic variable of row r; indices `≥ n` denote the
/// artificial column of row `index − n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub head: Vec<usize>,
    pub at_upper: Vec<bool>,
    pub art_sign: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers y with `c − Eᵀy` the reduced costs.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub basis: Option<Basis>,
    /// Rows found linearly dependent on the others and ignored.
    pub dropped_rows: Vec<usize>,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        LpSolution {
            status,
            x: vec![0.0; n],
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            basis: None,
            dropped_rows: vec![],
            iterations,
        }
    }

    /// Dual objective `fᵀy + Σ_j (d_j>0 ? l_j d_j : u_j d_j)`.
    pub fn dual_objective(&self, lp: &StandardLp) -> f64 {
        let mut v: f64 = self.duals.iter().zip(&lp.f).map(|(y, f)| y * f).sum();
        for j in 0..lp.num_cols() {
            let d = self.reduced_costs[j];
            if d > 0.0 {
                v += d * lp.lower[j];
            } else if d < 0.0 {
                v += d * lp.upper[j];
            }
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stat {
    Basic,
    Lower,
    Upper,
    Free,
}

enum Step {
    Optimal,
    Unbounded,
    /// Step length taken; zero for a degenerate pivot.
    Moved(f64),
}

struct Simplex<'a> {
    lp: &'a StandardLp,
    n: usize,
    m: usize,
    cols: Vec<f64>,
    art_sign: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    stat: Vec<Stat>,
    head: Vec<usize>,
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    max_iterations: usize,
    opt_tol: f64,
}

#[derive(Debug)]
struct Breakdown;

impl<'a> Simplex<'a> {
    fn new(lp: &'a StandardLp) -> Self {
        let (m, n) = (lp.num_rows(), lp.num_cols());
        let mut cols = vec![0.0; m * n];
        for i in 0..m {
            let row = lp.e.row(i);
            for j in 0..n {
                cols[j * m + i] = row[j];
            }
        }
        let mut lb = lp.lower.clone();
        let mut ub = lp.upper.clone();
        lb.extend(std::iter::repeat(0.0).take(m));
        ub.extend(std::iter::repeat(f64::INFINITY).take(m));
        let cmax = norm_inf(&lp.c);
        Simplex {
            lp,
            n,
            m,
            cols,
            art_sign: vec![1.0; m],
            lb,
            ub,
            cost: vec![0.0; n + m],
            x: vec![0.0; n + m],
            stat: vec![Stat::Lower; n + m],
            head: (n..n + m).collect(),
            binv: vec![0.0; m * m],
            since_refactor: 0,
            iterations: 0,
            max_iterations: 200 * (n + m) + 5000,
            opt_tol: OPT_TOL * cmax.max(1.0),
        }
    }

    fn cold_start(&mut self) {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            let (l, u) = (self.lb[j], self.ub[j]);
            if l.is_finite() {
                self.x[j] = l;
                self.stat[j] = Stat::Lower;
            } else if u.is_finite() {
                self.x[j] = u;
                self.stat[j] = Stat::Upper;
            } else {
                self.x[j] = 0.0;
                self.stat[j] = Stat::Free;
            }
        }
        let mut resid = self.lp.f.clone();
        for j in 0..n {
            let xj = self.x[j];
            if xj != 0.0 {
                for i in 0..m {
                    resid[i] -= self.cols[j * m + i] * xj;
                }
            }
        }
        self.binv.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let s = if resid[i] < 0.0 { -1.0 } else { 1.0 };
            self.art_sign[i] = s;
            self.head[i] = n + i;
            self.stat[n + i] = Stat::Basic;
            self.x[n + i] = resid[i].abs();
            self.lb[n + i] = 0.0;
            self.ub[n + i] = f64::INFINITY;
            self.binv[i * m + i] = s;
        }
        self.since_refactor = 0;
    }

    fn warm_start(&mut self, basis: &Basis) -> bool {
        let (n, m) = (self.n, self.m);
        if basis.head.len() != m || basis.at_upper.len() != n + m || basis.art_sign.len() != m {
            return false;
        }
        self.art_sign.clone_from(&basis.art_sign);
        let mut seen = vec![false; n + m];
        for &h in &basis.head {
            if h >= n + m || seen[h] {
                return false;
            }
            seen[h] = true;
        }
        for j in 0..n + m {
            if j >= n {
                self.lb[j] = 0.0;
                self.ub[j] = 0.0;
            }
            if seen[j] {
                self.stat[j] = Stat::Basic;
                continue;
            }
            let (l, u) = (self.lb[j], self.ub[j]);
            if basis.at_upper[j] && u.is_finite() {
                self.x[j] = u;
                self.stat[j] = Stat::Upper;
            } else if l.is_finite() {
                self.x[j] = l;
                self.stat[j] = Stat::Lower;
            } else if u.is_finite() {
                self.x[j] = u;
                self.stat[j] = Stat::Upper;
            } else {
                self.x[j] = 0.0;
                self.stat[j] = Stat::Free;
            }
        }
        self.head.clone_from(&basis.head);
        if self.refactor().is_err() {
            return false;
        }
        let tol = FEAS_TOL * (1.0 + norm_inf(&self.lp.f));
        self.head.iter().all(|&h| self.x[h] >= self.lb[h] - tol && self.x[h] <= self.ub[h] + tol)
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        let m = self.m;
        if j < self.n {
            out.copy_from_slice(&self.cols[j * m..(j + 1) * m]);
        } else {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[j - self.n] = self.art_sign[j - self.n];
        }
    }

    fn ftran(&self, j: usize, w: &mut [f64]) {
        let m = self.m;
        if j < self.n {
            let a = &self.cols[j * m..(j + 1) * m];
            for r in 0..m {
                let row = &self.binv[r * m..(r + 1) * m];
                w[r] = row.iter().zip(a).map(|(p, q)| p * q).sum();
            }
        } else {
            let i = j - self.n;
            let s = self.art_sign[i];
            for r in 0..m {
                w[r] = s * self.binv[r * m + i];
            }
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = self.cost[self.head[r]];
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for i in 0..m {
                    y[i] += cb * row[i];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let m = self.m;
        if j < self.n {
            let a = &self.cols[j * m..(j + 1) * m];
            self.cost[j] - a.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()
        } else {
            let i = j - self.n;
            self.cost[j] - self.art_sign[i] * y[i]
        }
    }

    /// Rebuilds B⁻¹ by Gauss-Jordan with partial pivoting and recomputes basic values.
    fn refactor(&mut self) -> Result<(), Breakdown> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for r in 0..m {
            self.column(self.head[r], &mut col);
            for i in 0..m {
                b[i * m + r] = col[i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let mut p = k;
            let mut best = b[k * m + k].abs();
            for i in k + 1..m {
                let v = b[i * m + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < 1e-13 {
                return Err(Breakdown);
            }
            if p != k {
                for j in 0..m {
                    b.swap(k * m + j, p * m + j);
                    inv.swap(k * m + j, p * m + j);
                }
            }
            let piv = b[k * m + k];
            for j in 0..m {
                b[k * m + j] /= piv;
                inv[k * m + j] /= piv;
            }
            for i in 0..m {
                if i != k {
                    let f = b[i * m + k];
                    if f != 0.0 {
                        for j in 0..m {
                            b[i * m + j] -= f * b[k * m + j];
                            inv[i * m + j] -= f * inv[k * m + j];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basic();
        Ok(())
    }

    fn recompute_basic(&mut self) {
        let m = self.m;
        let mut rhs = self.lp.f.clone();
        let mut col = vec![0.0; m];
        for j in 0..self.n + m {
            if self.stat[j] != Stat::Basic && self.x[j] != 0.0 {
                self.column(j, &mut col);
                for i in 0..m {
                    rhs[i] -= col[i] * self.x[j];
                }
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.x[self.head[r]] = row.iter().zip(&rhs).map(|(p, q)| p * q).sum();
        }
    }

    fn pivot(&mut self, r: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[r];
        for v in &mut self.binv[r * m..(r + 1) * m] {
            *v /= piv;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for (k, chunk) in before.chunks_mut(m).enumerate() {
            let f = w[k];
            if f != 0.0 {
                for (a, b) in chunk.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
            }
        }
        for (k, chunk) in after.chunks_mut(m).enumerate() {
            let f = w[r + 1 + k];
            if f != 0.0 {
                for (a, b) in chunk.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
            }
        }
    }

    fn iterate(&mut self, bland: bool) -> Result<Step, Breakdown> {
        let (n, m) = (self.n, self.m);
        let y = self.duals();
        let mut enter = None;
        let mut best = 0.0;
        for j in 0..n + m {
            let st = self.stat[j];
            if st == Stat::Basic || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.reduced_cost(j, &y);
            let gain = match st {
                Stat::Lower if d < -self.opt_tol => -d,
                Stat::Upper if d > self.opt_tol => d,
                Stat::Free if d.abs() > self.opt_tol => d.abs(),
                _ => continue,
            };
            if bland {
                enter = Some((j, d));
                break;
            }
            if gain > best {
                best = gain;
                enter = Some((j, d));
            }
        }
        let Some((j, d)) = enter else { return Ok(Step::Optimal) };
        let dir = if d < 0.0 { 1.0 } else { -1.0 };
        let mut w = vec![0.0; m];
        self.ftran(j, &mut w);

        // alpha_r: change of basic r per unit step
        let flip = self.ub[j] - self.lb[j];
        let mut leave: Option<usize> = None;
        let mut t_step = f64::INFINITY;
        if bland {
            for r in 0..m {
                let a = -dir * w[r];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let h = self.head[r];
                let lim = if a < 0.0 {
                    if self.lb[h].is_finite() { (self.x[h] - self.lb[h]) / -a } else { continue }
                } else if self.ub[h].is_finite() {
                    (self.ub[h] - self.x[h]) / a
                } else {
                    continue;
                };
                let lim = lim.max(0.0);
                let better = match leave {
                    None => true,
                    Some(lr) => lim < t_step || (lim == t_step && h < self.head[lr]),
                };
                if better {
                    t_step = lim;
                    leave = Some(r);
                }
            }
        } else {
            let mut tmax = f64::INFINITY;
            for r in 0..m {
                let a = -dir * w[r];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let h = self.head[r];
                let lim = if a < 0.0 {
                    if self.lb[h].is_finite() { (self.x[h] - self.lb[h] + HARRIS_TOL) / -a } else { continue }
                } else if self.ub[h].is_finite() {
                    (self.ub[h] - self.x[h] + HARRIS_TOL) / a
                } else {
                    continue;
                };
                tmax = tmax.min(lim);
            }
            if tmax.is_finite() {
                let mut best_a = 0.0;
                for r in 0..m {
                    let a = -dir * w[r];
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let h = self.head[r];
                    let lim = if a < 0.0 {
                        if self.lb[h].is_finite() { (self.x[h] - self.lb[h]) / -a } else { continue }
                    } else if self.ub[h].is_finite() {
                        (self.ub[h] - self.x[h]) / a
                    } else {
                        continue;
                    };
                    if lim <= tmax && a.abs() > best_a {
                        best_a = a.abs();
                        leave = Some(r);
                        t_step = lim.max(0.0);
                    }
                }
            }
        }

        if flip.is_finite() && (leave.is_none() || flip <= t_step) {
            // bound flip, basis unchanged
            let t = flip;
            self.x[j] += dir * t;
            for r in 0..m {
                let h = self.head[r];
                self.x[h] -= dir * t * w[r];
            }
            self.stat[j] = if dir > 0.0 { Stat::Upper } else { Stat::Lower };
            self.x[j] = if dir > 0.0 { self.ub[j] } else { self.lb[j] };
            self.iterations += 1;
            return Ok(Step::Moved(t));
        }
        let Some(r) = leave else { return Ok(Step::Unbounded) };
        let t = t_step;
        self.x[j] += dir * t;
        for k in 0..m {
            let h = self.head[k];
            self.x[h] -= dir * t * w[k];
        }
        let out = self.head[r];
        let a = -dir * w[r];
        if a < 0.0 {
            self.x[out] = self.lb[out];
            self.stat[out] = Stat::Lower;
        } else {
            self.x[out] = self.ub[out];
            self.stat[out] = Stat::Upper;
        }
        self.pivot(r, &w);
        self.head[r] = j;
        self.stat[j] = Stat::Basic;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(Step::Moved(t))
    }

    /// Runs one phase to optimality under the current costs.
    fn run_phase(&mut self) -> Result<Step, Breakdown> {
        let limit = 5 * (self.n + self.m);
        let mut degenerate = 0;
        let mut bland = false;
        loop {
            if self.iterations > self.max_iterations {
                return Err(Breakdown);
            }
            match self.iterate(bland)? {
                Step::Moved(t) => {
                    if t <= 1e-12 {
                        degenerate += 1;
                        if degenerate > limit {
                            bland = true;
                        }
                    } else {
                        degenerate = 0;
                    }
                }
                Step::Optimal => {
                    // confirm on a fresh factorization
                    if self.since_refactor > 0 {
                        self.refactor()?;
                        if matches!(self.iterate_probe(), Some(true)) {
                            continue;
                        }
                    }
                    return Ok(Step::Optimal);
                }
                Step::Unbounded => return Ok(Step::Unbounded),
            }
        }
    }

    /// After a refactorization, reports whether some reduced cost still improves.
    fn iterate_probe(&self) -> Option<bool> {
        let y = self.duals();
        for j in 0..self.n + self.m {
            let st = self.stat[j];
            if st == Stat::Basic || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.reduced_cost(j, &y);
            let improving = match st {
                Stat::Lower => d < -self.opt_tol,
                Stat::Upper => d > self.opt_tol,
                Stat::Free => d.abs() > self.opt_tol,
                Stat::Basic => false,
            };
            if improving {
                return Some(true);
            }
        }
        Some(false)
    }

    fn set_phase1_costs(&mut self) {
        let n = self.n;
        for j in 0..n + self.m {
            self.cost[j] = if j >= n { 1.0 } else { 0.0 };
        }
    }

    fn set_phase2_costs(&mut self) {
        let n = self.n;
        for j in 0..n + self.m {
            self.cost[j] = if j < n { self.lp.c[j] } else { 0.0 };
        }
    }

    /// Fixes artificials at zero and pivots basic ones out where possible.
    /// Returns rows that stay covered by an artificial, i.e. redundant rows.
    fn expel_artificials(&mut self) -> Result<Vec<usize>, Breakdown> {
        let (n, m) = (self.n, self.m);
        for i in 0..m {
            self.ub[n + i] = 0.0;
            if self.stat[n + i] != Stat::Basic {
                self.x[n + i] = 0.0;
                self.stat[n + i] = Stat::Lower;
            }
        }
        let mut dropped = vec![];
        let mut w = vec![0.0; m];
        for r in 0..m {
            let h = self.head[r];
            if h < n {
                continue;
            }
            let row = &self.binv[r * m..(r + 1) * m];
            let mut best: Option<(usize, f64, bool)> = None;
            for j in 0..n {
                if self.stat[j] == Stat::Basic {
                    continue;
                }
                let a = &self.cols[j * m..(j + 1) * m];
                let v: f64 = row.iter().zip(a).map(|(p, q)| p * q).sum();
                let fixed = self.lb[j] == self.ub[j];
                let cand = (j, v.abs(), fixed);
                best = match best {
                    None if v.abs() > 1e-9 => Some(cand),
                    Some(b) if v.abs() > 1e-9 && ((b.2 && !fixed) || (b.2 == fixed && v.abs() > b.1)) => {
                        Some(cand)
                    }
                    other => other,
                };
            }
            match best {
                Some((j, _, _)) => {
                    self.ftran(j, &mut w);
                    self.x[h] = 0.0;
                    self.stat[h] = Stat::Lower;
                    self.pivot(r, &w);
                    self.head[r] = j;
                    self.stat[j] = Stat::Basic;
                    self.since_refactor += 1;
                }
                None => dropped.push(h - n),
            }
        }
        self.refactor()?;
        Ok(dropped)
    }

    fn solve(&mut self, warm: Option<&Basis>) -> Result<LpSolution, Breakdown> {
        let (n, m) = (self.n, self.m);
        let mut dropped = vec![];
        let warmed = warm.is_some_and(|b| self.warm_start(b));
        if !warmed {
            // reset bounds that a failed warm start may have touched
            for i in 0..m {
                self.lb[n + i] = 0.0;
                self.ub[n + i] = f64::INFINITY;
            }
            self.cold_start();
            self.set_phase1_costs();
            self.run_phase()?;
            let infeas: f64 = (n..n + m).map(|j| self.x[j].max(0.0)).sum();
            if infeas > FEAS_TOL * (1.0 + norm_inf(&self.lp.f)) {
                return Ok(LpSolution::failed(LpStatus::Infeasible, n, m, self.iterations));
            }
            dropped = self.expel_artificials()?;
        } else {
            for r in 0..m {
                let h = self.head[r];
                if h >= n {
                    dropped.push(h - n);
                }
            }
        }
        self.set_phase2_costs();
        if let Step::Unbounded = self.run_phase()? {
            return Ok(LpSolution::failed(LpStatus::Unbounded, n, m, self.iterations));
        }
        let y = self.duals();
        let x: Vec<f64> = self.x[..n].to_vec();
        let reduced: Vec<f64> = (0..n).map(|j| self.reduced_cost(j, &y)).collect();
        let objective = x.iter().zip(&self.lp.c).map(|(a, b)| a * b).sum();
        let resid = self.lp.primal_residual(&x);
        if resid > 1e-7 * (1.0 + norm_inf(&self.lp.f)) {
            return Err(Breakdown);
        }
        let basis = Basis {
            head: self.head.clone(),
            at_upper: self.stat.iter().map(|s| *s == Stat::Upper).collect(),
            art_sign: self.art_sign.clone(),
        };
        Ok(LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
            duals: y,
            reduced_costs: reduced,
            basis: Some(basis),
            dropped_rows: dropped,
            iterations: self.iterations,
        })
    }
}

/// Solves `lp`, optionally from a previous basis of a structurally identical problem.
pub fn solve_lp(lp: &StandardLp, warm_basis: Option<&Basis>) -> LpSolution {
    let (m, n) = (lp.num_rows(), lp.num_cols());
    assert_eq!(lp.c.len(), n, "cost length");
    assert_eq!(lp.f.len(), m, "rhs length");
    assert_eq!(lp.lower.len(), n, "lower bound length");
    assert_eq!(lp.upper.len(), n, "upper bound length");
    for j in 0..n {
        if lp.lower[j] > lp.upper[j] {
            return LpSolution::failed(LpStatus::Infeasible, n, m, 0);
        }
    }
    let mut s = Simplex::new(lp);
    match s.solve(warm_basis) {
        Ok(sol) => sol,
        Err(Breakdown) => {
            let iters = s.iterations;
            let mut retry = Simplex::new(lp);
            retry.iterations = iters;
            retry.max_iterations += iters;
            match retry.solve(None) {
                Ok(sol) => sol,
                Err(Breakdown) => LpSolution::failed(LpStatus::NumericalFailure, n, m, retry.iterations),
            }
        }
    }
}

/// Builder for LPs written with inequality rows; slacks are appended automatically.
#[derive(Clone, Debug, Default)]
pub struct LpBuilder {
    c: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<(Vec<(usize, f64)>, RowKind, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    Eq,
    Le,
    Ge,
}

impl LpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.c.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.c.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn set_cost(&mut self, j: usize, cost: f64) {
        self.c[j] = cost;
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64) -> usize {
        self.rows.push((coeffs, kind, rhs));
        self.rows.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Standard form with one slack per inequality row, placed after the user variables.
    pub fn build(&self) -> StandardLp {
        let nv = self.c.len();
        let nslack = self.rows.iter().filter(|r| r.1 != RowKind::Eq).count();
        let n = nv + nslack;
        let m = self.rows.len();
        let mut e = Matrix::zeros(m, n);
        let mut c = self.c.clone();
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        let mut f = Vec::with_capacity(m);
        let mut next = nv;
        for (i, (coeffs, kind, rhs)) in self.rows.iter().enumerate() {
            for &(j, v) in coeffs {
                e[(i, j)] += v;
            }
            match kind {
                RowKind::Eq => {}
                RowKind::Le => {
                    e[(i, next)] = 1.0;
                    next += 1;
                }
                RowKind::Ge => {
                    e[(i, next)] = -1.0;
                    next += 1;
                }
            }
            f.push(*rhs);
        }
        c.resize(n, 0.0);
        lower.resize(n, 0.0);
        upper.resize(n, f64::INFINITY);
        StandardLp { c, e, f, lower, upper }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_var(lo: f64, hi: f64, cost: f64) -> LpSolution {
        let mut b = LpBuilder::new();
        let x = b.add_var(cost, f64::NEG_INFINITY, f64::INFINITY);
        b.add_row(vec![(x, 1.0)], RowKind::Ge, lo);
        if hi.is_finite() {
            b.add_row(vec![(x, 1.0)], RowKind::Le, hi);
        }
        solve_lp(&b.build(), None)
    }

    #[test]
    fn min_x_above_one() {
        let s = one_var(1.0, f64::INFINITY, 1.0);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        assert_eq!(one_var(1.0, 0.0, 1.0).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let lp = StandardLp {
            c: vec![-1.0],
            e: Matrix::zeros(0, 1),
            f: vec![],
            lower: vec![0.0],
            upper: vec![f64::INFINITY],
        };
        assert_eq!(solve_lp(&lp, None).status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_row_is_dropped() {
        let mut b = LpBuilder::new();
        let x = b.add_var(1.0, 0.0, 10.0);
        let y = b.add_var(2.0, 0.0, 10.0);
        b.add_row(vec![(x, 1.0), (y, 1.0)], RowKind::Eq, 3.0);
        b.add_row(vec![(x, 2.0), (y, 2.0)], RowKind::Eq, 6.0);
        let s = solve_lp(&b.build(), None);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert_eq!(s.dropped_rows.len(), 1);
    }

    #[test]
    fn warm_start_reuses_basis() {
        let mut b = LpBuilder::new();
        let x = b.add_var(-1.0, 0.0, 4.0);
        let y = b.add_var(-1.0, 0.0, 4.0);
        b.add_row(vec![(x, 1.0), (y, 2.0)], RowKind::Le, 6.0);
        let lp = b.build();
        let s = solve_lp(&lp, None);
        let again = solve_lp(&lp, s.basis.as_ref());
        assert_eq!(again.status, LpStatus::Optimal);
        assert_eq!(again.iterations, 0);
        assert!((again.objective - s.objective).abs() < 1e-12);
    }
}
