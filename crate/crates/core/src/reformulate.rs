//! Exact reformulations of the penalized problem.
//!
//! Each penalized coordinate β_i gets two auxiliaries: h_i (standing in for |β_i|) and
//! g_i (the decomposition variable of the penalty). The resulting QP is nonconvex; its
//! KKT system plus a linear objective that agrees with the QP objective on KKT points
//! is the LPCC, and encoding each complementarity pair with a binary and a big-M
//! constant gives the MIP.

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::numerics::dense::Matrix;
use crate::numerics::eigen::symmetric_eigs;
use crate::numerics::simplex::{LpBuilder, RowKind, StandardLp};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use serde::{Deserialize, Serialize};

/// Sparse affine expression `Σ coef·x_j + constant`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum::<f64>() + self.constant
    }

    /// `Some(j)` when the expression is exactly the variable x_j.
    pub fn as_variable(&self) -> Option<usize> {
        match self.terms.as_slice() {
            [(j, c)] if *c == 1.0 && self.constant == 0.0 => Some(*j),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// (μ₁, h − β)
    AbsPlus,
    /// (μ₂, h + β)
    AbsMinus,
    /// (μ₃, g)
    GLower,
    /// (μ₄, ḡ − g)
    GUpper,
    /// (ρ_j, b_j − a_jᵀβ)
    Constraint,
    /// (ρ, C − β_i)
    BoxUpper,
    /// (ρ, C + β_i)
    BoxLower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityPair {
    pub kind: PairKind,
    /// Penalized slot k, constraint index j, or coordinate i, depending on `kind`.
    pub index: usize,
    pub var: usize,
    pub expr: AffineExpr,
}

/// Index layout x = (β, g, h, μ₁, μ₂, μ₃, μ₄, ρ).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub dim: usize,
    pub p: usize,
    /// Core constraints plus 2·dim box rows.
    pub rows: usize,
}

impl Layout {
    pub fn beta(&self, i: usize) -> usize {
        i
    }
    pub fn g(&self, k: usize) -> usize {
        self.dim + k
    }
    pub fn h(&self, k: usize) -> usize {
        self.dim + self.p + k
    }
    /// Multiplier of pair family `t ∈ 0..4` for penalized slot k.
    pub fn mu(&self, t: usize, k: usize) -> usize {
        self.dim + (2 + t) * self.p + k
    }
    pub fn rho(&self, r: usize) -> usize {
        self.dim + 6 * self.p + r
    }
    pub fn total(&self) -> usize {
        self.dim + 6 * self.p + self.rows
    }
    /// Variables excluding box multipliers.
    pub fn core_total(&self) -> usize {
        self.dim + 6 * self.p + self.rows - 2 * self.dim
    }
}

/// Full constraint matrix `[A | I | −I]` (columns) and right-hand side `[b; C; C]`.
pub fn constraints_with_box(inst: &ProblemInstance) -> (Matrix, Vec<f64>) {
    let (d, m) = (inst.dim(), inst.m());
    let mut a = Matrix::zeros(d, m + 2 * d);
    for i in 0..d {
        for j in 0..m {
            a[(i, j)] = inst.feasible.a[(i, j)];
        }
        a[(i, m + 2 * i)] = 1.0;
        a[(i, m + 2 * i + 1)] = -1.0;
    }
    let mut b = inst.feasible.b.clone();
    for _ in 0..d {
        b.push(inst.box_c);
        b.push(inst.box_c);
    }
    (a, b)
}

// ------------------------------------------------------------------ QP form

#[derive(Clone, Debug)]
pub struct QpForm {
    pub dim: usize,
    pub p: usize,
    pub penalized: Vec<usize>,
    /// Hessian over (β, g, h).
    pub hessian: Matrix,
    pub linear: Vec<f64>,
    /// Rows `coeffs·z ≤ rhs` over (β, g, h): Aᵀβ ≤ b, ±β − h ≤ 0.
    pub rows: Vec<(Vec<(usize, f64)>, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// ℒ = QP objective + loss constant + penalty offset at (β, g*(|β|), |β|).
    pub penalty_offset: f64,
    pub loss_constant: f64,
}

impl QpForm {
    pub fn objective(&self, z: &[f64]) -> f64 {
        0.5 * self.hessian.quad_form(z) + z.iter().zip(&self.linear).map(|(a, b)| a * b).sum::<f64>()
    }

    /// The point (β, g*(|β|), |β|).
    pub fn lift(&self, beta: &[f64], spec: &PenaltySpec) -> Vec<f64> {
        let mut z = beta.to_vec();
        z.extend(self.penalized.iter().map(|&i| spec.gstar(beta[i].abs())));
        z.extend(self.penalized.iter().map(|&i| beta[i].abs()));
        z
    }

    pub fn num_vars(&self) -> usize {
        self.dim + 2 * self.p
    }
}

/// n·p·(a+1)λ²/2 for SCAD, 0 for MCP.
pub fn penalty_offset(inst: &ProblemInstance) -> f64 {
    inst.nf() * inst.p() as f64 * inst.penalty.decomposition_offset()
}

pub fn build_qp_form(inst: &ProblemInstance) -> Result<QpForm> {
    inst.penalty.validate()?;
    let (d, p) = (inst.dim(), inst.p());
    let pen = inst.penalized_indices();
    let nv = d + 2 * p;
    let n = inst.nf();
    let PenaltySpec { family, lambda: l, a } = inst.penalty;
    let mut hess = Matrix::zeros(nv, nv);
    for i in 0..d {
        for j in 0..d {
            hess[(i, j)] = inst.loss.q_mat[(i, j)];
        }
    }
    let mut linear = inst.loss.q.clone();
    linear.resize(nv, 0.0);
    for k in 0..p {
        let (g, h) = (d + k, d + p + k);
        match family {
            PenaltyFamily::Scad => {
                hess[(g, g)] = n * (a - 1.0);
                hess[(g, h)] = n;
                hess[(h, g)] = n;
                linear[g] = -n * a * l;
            }
            PenaltyFamily::Mcp => {
                hess[(g, g)] = n / a;
                hess[(g, h)] = -n / a;
                hess[(h, g)] = -n / a;
                linear[h] = n * l;
            }
        }
    }
    let mut rows = vec![];
    for j in 0..inst.m() {
        let coeffs = (0..d).filter_map(|i| {
            let v = inst.feasible.a[(i, j)];
            (v != 0.0).then_some((i, v))
        });
        rows.push((coeffs.collect(), inst.feasible.b[j]));
    }
    for (k, &i) in pen.iter().enumerate() {
        rows.push((vec![(i, 1.0), (d + p + k, -1.0)], 0.0));
        rows.push((vec![(i, -1.0), (d + p + k, -1.0)], 0.0));
    }
    let c = inst.box_c;
    let mut lower = vec![-c; d];
    let mut upper = vec![c; d];
    lower.extend(std::iter::repeat(0.0).take(p));
    upper.extend(std::iter::repeat(inst.penalty.g_upper()).take(p));
    lower.extend(std::iter::repeat(0.0).take(p));
    upper.extend(std::iter::repeat(c).take(p));
    Ok(QpForm {
        dim: d,
        p,
        penalized: pen,
        hessian: hess,
        linear,
        rows,
        lower,
        upper,
        penalty_offset: penalty_offset(inst),
        loss_constant: inst.loss.constant,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianDiagnostics {
    pub min_eig: f64,
    /// Number of negative eigenvalues, the exponent r of the approximation bound.
    pub num_negative: usize,
    pub size: usize,
}

pub fn hessian_diagnostics(inst: &ProblemInstance) -> Result<HessianDiagnostics> {
    let qp = build_qp_form(inst)?;
    let ev = symmetric_eigs(&qp.hessian)?;
    let tol = 1e-10 * qp.hessian.max_abs().max(1.0);
    Ok(HessianDiagnostics {
        min_eig: ev.first().copied().unwrap_or(0.0),
        num_negative: ev.iter().filter(|&&v| v < -tol).count(),
        size: ev.len(),
    })
}

// ------------------------------------------------------------------ LPCC

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpccModel {
    pub layout: Layout,
    pub family: PenaltyFamily,
    pub spec: PenaltySpec,
    pub n: f64,
    pub box_c: f64,
    pub penalized: Vec<usize>,
    /// Equality rows `coeffs·x = rhs`.
    pub eq_rows: Vec<(Vec<(usize, f64)>, f64)>,
    pub row_names: Vec<String>,
    pub pairs: Vec<ComplementarityPair>,
    /// Pairs before the box pairs: 4p + m.
    pub core_pairs: usize,
    pub objective: Vec<f64>,
    pub penalty_offset: f64,
    pub loss_constant: f64,
    /// Constraint matrix including box columns, kept for multiplier audits.
    pub a_full: Matrix,
    pub b_full: Vec<f64>,
}

pub fn build_lpcc(inst: &ProblemInstance) -> Result<LpccModel> {
    inst.penalty.validate()?;
    let (d, p, m) = (inst.dim(), inst.p(), inst.m());
    let lay = Layout { dim: d, p, rows: m + 2 * d };
    let (a_full, b_full) = constraints_with_box(inst);
    let pen = inst.penalized_indices();
    let mut slot = vec![usize::MAX; d];
    for (k, &i) in pen.iter().enumerate() {
        slot[i] = k;
    }
    let n = inst.nf();
    let spec = inst.penalty;
    let (l, a) = (spec.lambda, spec.a);
    let mut rows = vec![];
    let mut names = vec![];
    for i in 0..d {
        let mut coeffs: Vec<(usize, f64)> = (0..d)
            .filter_map(|j| {
                let v = inst.loss.q_mat[(i, j)];
                (v != 0.0).then_some((lay.beta(j), v))
            })
            .collect();
        if slot[i] != usize::MAX {
            coeffs.push((lay.mu(0, slot[i]), 1.0));
            coeffs.push((lay.mu(1, slot[i]), -1.0));
        }
        for r in 0..lay.rows {
            let v = a_full[(i, r)];
            if v != 0.0 {
                coeffs.push((lay.rho(r), v));
            }
        }
        rows.push((coeffs, -inst.loss.q[i]));
        names.push(format!("STAT_B_{i}"));
    }
    for k in 0..p {
        let (g, h) = (lay.g(k), lay.h(k));
        let (m1, m2, m3, m4) = (lay.mu(0, k), lay.mu(1, k), lay.mu(2, k), lay.mu(3, k));
        match spec.family {
            PenaltyFamily::Scad => {
                rows.push((vec![(g, n), (m1, -1.0), (m2, -1.0)], 0.0));
                names.push(format!("STAT_H_{k}"));
                rows.push((vec![(g, n * (a - 1.0)), (h, n), (m3, -1.0), (m4, 1.0)], n * a * l));
                names.push(format!("STAT_G_{k}"));
            }
            PenaltyFamily::Mcp => {
                // n(λ − g/a) − η₁ − η₂ = 0
                rows.push((vec![(g, -n / a), (m1, -1.0), (m2, -1.0)], -n * l));
                names.push(format!("STAT_H_{k}"));
                rows.push((vec![(g, n / a), (h, -n / a), (m3, -1.0), (m4, 1.0)], 0.0));
                names.push(format!("STAT_G_{k}"));
            }
        }
    }
    let gu = spec.g_upper();
    let mut pairs = vec![];
    for (t, kind) in [PairKind::AbsPlus, PairKind::AbsMinus, PairKind::GLower, PairKind::GUpper].into_iter().enumerate() {
        for (k, &i) in pen.iter().enumerate() {
            let expr = match kind {
                PairKind::AbsPlus => AffineExpr { terms: vec![(lay.h(k), 1.0), (lay.beta(i), -1.0)], constant: 0.0 },
                PairKind::AbsMinus => AffineExpr { terms: vec![(lay.h(k), 1.0), (lay.beta(i), 1.0)], constant: 0.0 },
                PairKind::GLower => AffineExpr { terms: vec![(lay.g(k), 1.0)], constant: 0.0 },
                _ => AffineExpr { terms: vec![(lay.g(k), -1.0)], constant: gu },
            };
            pairs.push(ComplementarityPair { kind, index: k, var: lay.mu(t, k), expr });
        }
    }
    for r in 0..lay.rows {
        let terms = (0..d)
            .filter_map(|i| {
                let v = a_full[(i, r)];
                (v != 0.0).then_some((lay.beta(i), -v))
            })
            .collect();
        let (kind, index) = if r < m {
            (PairKind::Constraint, r)
        } else if (r - m) % 2 == 0 {
            (PairKind::BoxUpper, (r - m) / 2)
        } else {
            (PairKind::BoxLower, (r - m) / 2)
        };
        pairs.push(ComplementarityPair { kind, index, var: lay.rho(r), expr: AffineExpr { terms, constant: b_full[r] } });
    }
    let mut obj = vec![0.0; lay.total()];
    for i in 0..d {
        obj[lay.beta(i)] = 0.5 * inst.loss.q[i];
    }
    for r in 0..lay.rows {
        obj[lay.rho(r)] = -0.5 * b_full[r];
    }
    for k in 0..p {
        match spec.family {
            PenaltyFamily::Scad => {
                obj[lay.g(k)] = -0.5 * n * a * l;
                obj[lay.mu(3, k)] = -0.5 * l;
            }
            PenaltyFamily::Mcp => {
                obj[lay.mu(3, k)] = -0.5 * a * l;
                obj[lay.h(k)] = 0.5 * l * n;
            }
        }
    }
    Ok(LpccModel {
        layout: lay,
        family: spec.family,
        spec,
        n,
        box_c: inst.box_c,
        penalized: pen,
        eq_rows: rows,
        row_names: names,
        pairs,
        core_pairs: 4 * p + m,
        objective: obj,
        penalty_offset: penalty_offset(inst),
        loss_constant: inst.loss.constant,
        a_full,
        b_full,
    })
}

/// Per-pair resolution state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairState {
    Free,
    /// The multiplier is zero.
    LeftZero,
    /// The expression is zero.
    RightZero,
}

impl LpccModel {
    pub fn num_vars(&self) -> usize {
        self.layout.total()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Reported-scale value: linear objective + loss constant + penalty offset.
    pub fn reported_value(&self, x: &[f64]) -> f64 {
        self.objective_value(x) + self.loss_constant + self.penalty_offset
    }

    pub fn beta<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.layout.dim]
    }

    /// Is the variable j a multiplier (constrained to be ≥ 0)?
    pub fn is_multiplier(&self, j: usize) -> bool {
        j >= self.layout.mu(0, 0)
    }

    /// LP over the LPCC rows with the given pattern. Free pairs keep only φ, δ ≥ 0;
    /// `cap` additionally bounds free-pair φ and δ when supplied.
    pub fn pattern_lp(&self, pattern: &[PairState], cap: Option<f64>) -> LpBuilder {
        assert_eq!(pattern.len(), self.pairs.len());
        let mut lp = LpBuilder::new();
        let lay = self.layout;
        for j in 0..lay.total() {
            let lo = if self.is_multiplier(j) { 0.0 } else { f64::NEG_INFINITY };
            lp.add_var(self.objective[j], lo, f64::INFINITY);
        }
        for (coeffs, rhs) in &self.eq_rows {
            lp.add_row(coeffs.clone(), RowKind::Eq, *rhs);
        }
        for (pair, st) in self.pairs.iter().zip(pattern) {
            let var_cap = match (st, cap) {
                (PairState::LeftZero, _) => 0.0,
                (PairState::Free, Some(mc)) => mc,
                _ => f64::INFINITY,
            };
            lp.set_bounds(pair.var, 0.0, var_cap);
            let rhs = -pair.expr.constant;
            match st {
                PairState::RightZero => {
                    lp.add_row(pair.expr.terms.clone(), RowKind::Eq, rhs);
                }
                _ => {
                    lp.add_row(pair.expr.terms.clone(), RowKind::Ge, rhs);
                    if let (PairState::Free, Some(mc)) = (st, cap) {
                        lp.add_row(pair.expr.terms.clone(), RowKind::Le, mc + rhs);
                    }
                }
            }
        }
        lp
    }

    /// Max complementarity product, stationarity residual and sign violation at x.
    pub fn residuals(&self, x: &[f64]) -> (f64, f64, f64) {
        let stat = self
            .eq_rows
            .iter()
            .map(|(c, r)| {
                let v: f64 = c.iter().map(|&(j, a)| a * x[j]).sum();
                let scale = 1.0 + r.abs() + c.iter().map(|&(j, a)| (a * x[j]).abs()).fold(0.0, f64::max);
                (v - r).abs() / scale
            })
            .fold(0.0, f64::max);
        let mut comp = 0.0_f64;
        let mut sign = 0.0_f64;
        for pair in &self.pairs {
            let phi = x[pair.var];
            let delta = pair.expr.eval(x);
            sign = sign.max(-phi).max(-delta);
            comp = comp.max(phi.max(0.0) * delta.max(0.0));
        }
        (stat, comp, sign)
    }
}

// ------------------------------------------------------------------ MIP

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MipModel {
    pub lpcc: LpccModel,
    pub big_m: f64,
}

impl MipModel {
    pub fn num_binaries(&self) -> usize {
        self.lpcc.pairs.len()
    }

    pub fn core_binaries(&self) -> usize {
        self.lpcc.core_pairs
    }

    /// LP with continuous variables of the LPCC followed by one z per pair
    /// (z = 1 frees the multiplier side). Binaries are bounded by `z_bounds`.
    pub fn relaxation(&self, z_bounds: &[(f64, f64)]) -> (StandardLp, usize) {
        let model = &self.lpcc;
        let mut lp = LpBuilder::new();
        for j in 0..model.num_vars() {
            let lo = if model.is_multiplier(j) { 0.0 } else { f64::NEG_INFINITY };
            lp.add_var(model.objective[j], lo, f64::INFINITY);
        }
        let z0 = lp.num_vars();
        for &(lo, hi) in z_bounds {
            lp.add_var(0.0, lo, hi);
        }
        for (coeffs, rhs) in &model.eq_rows {
            lp.add_row(coeffs.clone(), RowKind::Eq, *rhs);
        }
        let bm = self.big_m;
        for (k, pair) in model.pairs.iter().enumerate() {
            let z = z0 + k;
            // φ − M z ≤ 0
            lp.add_row(vec![(pair.var, 1.0), (z, -bm)], RowKind::Le, 0.0);
            // δ + M z ≤ M
            let mut t = pair.expr.terms.clone();
            t.push((z, bm));
            lp.add_row(t, RowKind::Le, bm - pair.expr.constant);
            // δ ≥ 0
            if pair.expr.as_variable().is_some() {
                let j = pair.expr.terms[0].0;
                lp.set_bounds(j, 0.0, f64::INFINITY);
            } else {
                lp.add_row(pair.expr.terms.clone(), RowKind::Ge, -pair.expr.constant);
            }
        }
        (lp.build(), z0)
    }

    /// Variables within `rel·M` of the big-M bound at x (indices of pairs).
    pub fn saturated_pairs(&self, x: &[f64], rel: f64) -> Vec<usize> {
        let lim = self.big_m * (1.0 - rel);
        self.lpcc
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, p)| x[p.var] >= lim || p.expr.eval(x) >= lim)
            .map(|(k, _)| k)
            .collect()
    }
}

pub fn build_mip(inst: &ProblemInstance, big_m: f64) -> Result<MipModel> {
    if !(big_m > 0.0 && big_m.is_finite()) {
        return Err(Error::InvalidParameter(format!("big-M must be positive and finite, got {big_m}")));
    }
    Ok(MipModel { lpcc: build_lpcc(inst)?, big_m })
}

/// Gradient bound C₁ of the QP-form objective over the box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigMEstimate {
    pub c1: f64,
    pub multiplier_bound: f64,
    pub constraint_multiplier_bound: f64,
    pub slack_bound: f64,
    pub big_m: f64,
}

pub fn estimate_big_m(inst: &ProblemInstance) -> Result<f64> {
    Ok(big_m_details(inst)?.big_m)
}

pub fn gradient_bound(inst: &ProblemInstance) -> f64 {
    let c = inst.box_c;
    let n = inst.nf();
    let PenaltySpec { family, lambda: l, a } = inst.penalty;
    let d = inst.dim();
    let mut c1 = 0.0_f64;
    for i in 0..d {
        let row: f64 = inst.loss.q_mat.row(i).iter().map(|v| v.abs()).sum();
        c1 = c1.max(row * c + inst.loss.q[i].abs());
    }
    if inst.p() > 0 {
        let (gh, gg) = match family {
            PenaltyFamily::Scad => (n * l, (n * a * l).max(n * (c - l).abs())),
            PenaltyFamily::Mcp => (n * l, (n * l).max(n * c / a)),
        };
        c1 = c1.max(gh).max(gg);
    }
    c1
}

pub fn big_m_details(inst: &ProblemInstance) -> Result<BigMEstimate> {
    let c = inst.box_c;
    if !c.is_finite() {
        return Err(Error::InvalidInstance("gradient bound needs a finite box".into()));
    }
    let c1 = gradient_bound(inst);
    let (l, a) = (inst.penalty.lambda, inst.penalty.a);
    let mut slack = 2.0 * c;
    for j in 0..inst.m() {
        let col: f64 = (0..inst.dim()).map(|i| inst.feasible.a[(i, j)].abs()).sum();
        slack = slack.max(inst.feasible.b[j].abs() + col * c);
    }
    let big_m = 10.0 * (3.0 * c1).max(l).max(a * l).max(c).max(slack);
    if !big_m.is_finite() {
        return Err(Error::Numerical("unbounded gradient bound".into()));
    }
    Ok(BigMEstimate { c1, multiplier_bound: c1, constraint_multiplier_bound: 3.0 * c1, slack_bound: slack, big_m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_least_squares;

    #[test]
    fn counts_for_two_coordinates() {
        let x = Matrix::identity(2);
        let inst = build_least_squares(&x, &[1.0, 0.5], PenaltySpec::scad(1.0, 3.7).unwrap(), None).unwrap();
        let m = build_lpcc(&inst).unwrap();
        assert_eq!(m.core_pairs, 8);
        assert_eq!(m.layout.core_total(), 14);
        assert_eq!(m.pairs.len(), 12);
        let qp = build_qp_form(&inst).unwrap();
        assert_eq!(qp.num_vars(), 6);
    }

    #[test]
    fn big_m_from_gradient_bound() {
        let x = Matrix::from_rows(&[vec![1.0]]);
        let inst = build_least_squares(&x, &[1.0], PenaltySpec::scad(1.0, 3.7).unwrap(), Some(2.0)).unwrap();
        let e = big_m_details(&inst).unwrap();
        // |Q|·C + |q| = 3, n·aλ = 3.7
        assert!((e.c1 - 3.7).abs() < 1e-12);
        assert!((e.big_m - 111.0).abs() < 1e-9);
    }
}
