//! KKT points of the QP form at a given β and their audit.

use crate::model::ProblemInstance;
use crate::numerics::dense::{Lu, Matrix};
use crate::numerics::simplex::{solve_lp, LpBuilder, LpStatus, RowKind};
use crate::penalty::PenaltyFamily;
use crate::reformulate::{LpccModel, PairState};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Max stationarity row residual, scaled by max(1, |rhs|, largest term).
    pub stationarity: f64,
    /// Max φ·δ over all pairs.
    pub complementarity: f64,
    /// Max violation of φ ≥ 0 and δ ≥ 0.
    pub sign: f64,
    pub residual: f64,
    /// Gradient bound at the point: max of ‖∇_β‖∞, ‖∇_g‖∞, ‖∇_h‖∞ of the QP objective.
    pub c1: f64,
    pub max_penalty_multiplier: f64,
    /// ‖A_full ρ‖∞
    pub constraint_force: f64,
    pub bounds_hold: bool,
}

fn row_scale(coeffs: &[(usize, f64)], x: &[f64], rhs: f64) -> f64 {
    coeffs.iter().map(|&(j, a)| (a * x[j]).abs()).fold(rhs.abs(), f64::max).max(1.0)
}

/// Residual record of an LPCC point, including the multiplier bounds
/// max μ ≤ C₁ and ‖A_full ρ‖∞ ≤ 3C₁.
pub fn verify_kkt(model: &LpccModel, x: &[f64]) -> KktReport {
    let lay = model.layout;
    let (d, p) = (lay.dim, lay.p);
    assert_eq!(x.len(), lay.total(), "point dimension");
    let mut stat = 0.0_f64;
    for (coeffs, rhs) in &model.eq_rows {
        let v: f64 = coeffs.iter().map(|&(j, a)| a * x[j]).sum();
        stat = stat.max((v - rhs).abs() / row_scale(coeffs, x, *rhs));
    }
    let mut comp = 0.0_f64;
    let mut sign = 0.0_f64;
    for pair in &model.pairs {
        let phi = x[pair.var];
        let delta = pair.expr.eval(x);
        sign = sign.max(-phi).max(-delta);
        comp = comp.max(phi.max(0.0) * delta.max(0.0));
    }
    // ∇_β = Qβ + q, read off the β part of the STAT_B rows
    let mut c1 = 0.0_f64;
    for i in 0..d {
        let (coeffs, rhs) = &model.eq_rows[i];
        let qb: f64 = coeffs.iter().filter(|&&(j, _)| j < d).map(|&(j, a)| a * x[j]).sum();
        c1 = c1.max((qb - rhs).abs());
    }
    let n = model.n;
    let (l, a) = (model.spec.lambda, model.spec.a);
    let mut maxmu = 0.0_f64;
    for k in 0..p {
        let (g, h) = (x[lay.g(k)], x[lay.h(k)]);
        let (dg, dh) = match model.family {
            PenaltyFamily::Scad => (n * (a - 1.0) * g + n * h - n * a * l, n * g),
            PenaltyFamily::Mcp => (n / a * (g - h), -n / a * g + n * l),
        };
        c1 = c1.max(dg.abs()).max(dh.abs());
        for t in 0..4 {
            maxmu = maxmu.max(x[lay.mu(t, k)]);
        }
    }
    let mut force = 0.0_f64;
    for i in 0..d {
        let s: f64 = (0..lay.rows).map(|r| model.a_full[(i, r)] * x[lay.rho(r)]).sum();
        force = force.max(s.abs());
    }
    let slack = 1e-7 * c1.max(1.0);
    KktReport {
        stationarity: stat,
        complementarity: comp,
        sign,
        residual: stat.max(comp).max(sign),
        c1,
        max_penalty_multiplier: maxmu,
        constraint_force: force,
        bounds_hold: maxmu <= c1 + slack && force <= 3.0 * c1 + slack,
    }
}

/// Activity threshold for a constraint with right-hand side b.
fn active(slack: f64, b: f64) -> bool {
    slack <= 1e-9 * (1.0 + b.abs())
}

/// The LPCC point at β with h = |β|, g = g*(|β|) and multipliers fitted to the
/// stationarity rows (least ℓ1 residual). Returns the point.
pub fn kkt_point(model: &LpccModel, inst: &ProblemInstance, beta: &[f64]) -> Vec<f64> {
    let lay = model.layout;
    let d = lay.dim;
    let spec = model.spec;
    let n = model.n;
    let (l, a) = (spec.lambda, spec.a);
    let mut x = vec![0.0; lay.total()];
    x[..d].copy_from_slice(beta);
    let grad = inst.loss.gradient(beta);
    // per-coordinate totals T = μ₁ + μ₂ and the fixed part of μ₁ − μ₂
    let mut fixed = vec![0.0; d];
    let mut split: Vec<(usize, usize, f64)> = vec![];
    for (k, &i) in model.penalized.iter().enumerate() {
        let b = beta[i];
        let th = b.abs();
        let g = spec.gstar(th);
        x[lay.g(k)] = g;
        x[lay.h(k)] = th;
        let total = match spec.family {
            PenaltyFamily::Scad => n * g,
            PenaltyFamily::Mcp => n * (l - g / a),
        };
        if th == 0.0 {
            split.push((k, i, total));
        } else if b > 0.0 {
            x[lay.mu(0, k)] = total;
            fixed[i] = total;
        } else {
            x[lay.mu(1, k)] = total;
            fixed[i] = -total;
        }
        match spec.family {
            PenaltyFamily::Scad => {
                let r = n * (a * l - (a - 1.0) * g - th);
                x[lay.mu(3, k)] = r.max(0.0);
                x[lay.mu(2, k)] = (-r).max(0.0);
            }
            PenaltyFamily::Mcp => {
                let r = n / a * (g - th);
                x[lay.mu(2, k)] = r.max(0.0);
                x[lay.mu(3, k)] = (-r).max(0.0);
            }
        }
    }
    let slacks: Vec<f64> = (0..lay.rows)
        .map(|r| model.b_full[r] - (0..d).map(|i| model.a_full[(i, r)] * beta[i]).sum::<f64>())
        .collect();
    let act: Vec<usize> = (0..lay.rows).filter(|&r| active(slacks[r], model.b_full[r])).collect();
    if act.is_empty() {
        for &(k, i, total) in &split {
            let s = (-grad[i]).clamp(-total, total);
            x[lay.mu(0, k)] = 0.5 * (total + s);
            x[lay.mu(1, k)] = 0.5 * (total - s);
        }
        return x;
    }
    // min Σ|e_i|  s.t.  grad_i + fixed_i + s_i + Σ_r A_ir ρ_r + e⁺ − e⁻ = 0
    let mut lp = LpBuilder::new();
    let mut svar = vec![usize::MAX; d];
    for &(_, i, total) in &split {
        svar[i] = lp.add_var(0.0, -total, total);
    }
    let rvar: Vec<usize> = act.iter().map(|_| lp.add_var(0.0, 0.0, f64::INFINITY)).collect();
    for i in 0..d {
        let ep = lp.add_var(1.0, 0.0, f64::INFINITY);
        let em = lp.add_var(1.0, 0.0, f64::INFINITY);
        let mut coeffs = vec![(ep, 1.0), (em, -1.0)];
        if svar[i] != usize::MAX {
            coeffs.push((svar[i], 1.0));
        }
        for (t, &r) in act.iter().enumerate() {
            let v = model.a_full[(i, r)];
            if v != 0.0 {
                coeffs.push((rvar[t], v));
            }
        }
        lp.add_row(coeffs, RowKind::Eq, -grad[i] - fixed[i]);
    }
    let sol = solve_lp(&lp.build(), None);
    if sol.status != LpStatus::Optimal {
        return x;
    }
    for &(k, i, total) in &split {
        let s = sol.x[svar[i]];
        x[lay.mu(0, k)] = (0.5 * (total + s)).max(0.0);
        x[lay.mu(1, k)] = (0.5 * (total - s)).max(0.0);
    }
    for (t, &r) in act.iter().enumerate() {
        x[lay.rho(r)] = sol.x[rvar[t]];
    }
    x
}

/// Pattern read off an LPCC point: the smaller side of each pair is set to zero.
pub fn rounded_pattern(model: &LpccModel, x: &[f64], fixed: Option<&[PairState]>) -> Vec<PairState> {
    model
        .pairs
        .iter()
        .enumerate()
        .map(|(k, pair)| {
            if let Some(f) = fixed {
                if f[k] != PairState::Free {
                    return f[k];
                }
            }
            if x[pair.var] > pair.expr.eval(x) {
                PairState::RightZero
            } else {
                PairState::LeftZero
            }
        })
        .collect()
}

/// Newton step on the region structure of β for unconstrained instances with an
/// inactive box: zero coordinates stay at zero and each other coordinate keeps the
/// linear piece of P′ it currently sits on.
pub fn active_set_step(inst: &ProblemInstance, beta: &[f64]) -> Option<Vec<f64>> {
    let d = inst.dim();
    let n = inst.nf();
    let spec = inst.penalty;
    let (l, a) = (spec.lambda, spec.a);
    let free: Vec<usize> = (0..d).filter(|&i| !(inst.penalized[i] && beta[i] == 0.0)).collect();
    if free.is_empty() {
        return Some(vec![0.0; d]);
    }
    let mut diag = vec![0.0; free.len()];
    let mut rhs: Vec<f64> = free.iter().map(|&i| -inst.loss.q[i]).collect();
    for (t, &i) in free.iter().enumerate() {
        if !inst.penalized[i] {
            continue;
        }
        let th = beta[i].abs();
        let sg = beta[i].signum();
        match spec.family {
            PenaltyFamily::Scad => {
                if th <= l {
                    rhs[t] -= n * l * sg;
                } else if th < a * l {
                    diag[t] = -n / (a - 1.0);
                    rhs[t] -= n * a * l * sg / (a - 1.0);
                }
            }
            PenaltyFamily::Mcp => {
                if th < a * l {
                    diag[t] = -n / a;
                    rhs[t] -= n * l * sg;
                }
            }
        }
    }
    let m = Matrix::from_fn(free.len(), free.len(), |r, c| inst.loss.q_mat[(free[r], free[c])] + if r == c { diag[r] } else { 0.0 });
    let lu = Lu::new(&m).ok()?;
    let sol = lu.solve(&rhs);
    let mut out = vec![0.0; d];
    for (t, &i) in free.iter().enumerate() {
        out[i] = sol[t];
    }
    if out.iter().any(|v| !v.is_finite() || v.abs() > inst.box_c) {
        return None;
    }
    Some(out)
}
