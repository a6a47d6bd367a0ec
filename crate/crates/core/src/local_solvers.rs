//! Local methods for penalized least squares: LASSO coordinate descent, LLA,
//! nonconvex coordinate descent and proximal gradient.

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::numerics::dense::{least_squares, Matrix};
use crate::numerics::symmetric_eigs;
use crate::penalty::PenaltySpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "init", rename_all = "snake_case")]
pub enum Init {
    Zero,
    /// Coordinates uniform on [lo, hi].
    Random { seed: u64, lo: f64, hi: f64 },
    Given { beta: Vec<f64> },
    /// LASSO solution with weight ω.
    Lasso { omega: f64 },
    /// Least squares, minimum norm when the design is wide.
    LeastSquares,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalOptions {
    pub init: Init,
    pub max_outer: usize,
    /// Coordinate sweeps per inner solve.
    pub max_inner: usize,
    pub tol: f64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions { init: Init::Zero, max_outer: 1000, max_inner: 100_000, tol: 1e-8 }
    }
}

impl LocalOptions {
    pub fn with_init(init: Init) -> Self {
        LocalOptions { init, ..Default::default() }
    }

    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalResult {
    pub beta: Vec<f64>,
    pub objective: f64,
    /// ℒ after each outer iteration (LLA) or sweep.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Minimizes ½xᵀQx + qᵀx + Σ w_i|x_i| over [−C, C]ᵈ by cyclic coordinate descent.
/// Returns the point and the number of sweeps.
pub(crate) fn weighted_lasso(q_mat: &Matrix, q: &[f64], w: &[f64], box_c: f64, x0: &[f64], tol: f64, max_sweeps: usize) -> (Vec<f64>, usize, bool) {
    let d = q.len();
    let mut x = x0.to_vec();
    let mut grad = q_mat.matvec(&x);
    for (g, qi) in grad.iter_mut().zip(q) {
        *g += qi;
    }
    let mut warned = false;
    for sweep in 1..=max_sweeps {
        let mut moved = 0.0_f64;
        for i in 0..d {
            let qii = q_mat[(i, i)];
            if qii <= 0.0 {
                if !warned {
                    log::warn!("coordinate {i} has zero curvature, skipped");
                    warned = true;
                }
                continue;
            }
            let u = qii * x[i] - grad[i];
            let t = (soft(u, w[i]) / qii).clamp(-box_c, box_c);
            let delta = t - x[i];
            if delta != 0.0 {
                x[i] = t;
                for (g, qv) in grad.iter_mut().zip(q_mat.row(i)) {
                    *g += delta * qv;
                }
                moved = moved.max(delta.abs());
            }
        }
        if moved <= tol {
            return (x, sweep, true);
        }
    }
    (x, max_sweeps, false)
}

/// min ½‖y − Xβ‖² + ω‖β‖₁ by cyclic coordinate descent from zero. Coordinates with a
/// false entry in `penalized` are left unpenalized.
pub fn lasso_cd(x: &Matrix, y: &[f64], omega: f64, penalized: Option<&[bool]>, opts: &LocalOptions) -> Result<Vec<f64>> {
    opts.check()?;
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega must be >= 0, got {omega}")));
    }
    if x.rows() != y.len() {
        return Err(Error::Dimension("X and y disagree".into()));
    }
    let q_mat = x.gram();
    let q: Vec<f64> = x.tr_matvec(y).into_iter().map(|v| -v).collect();
    if penalized.is_some_and(|m| m.len() != x.cols()) {
        return Err(Error::Dimension("penalized mask length".into()));
    }
    let w: Vec<f64> = (0..x.cols()).map(|i| if penalized.is_none_or(|m| m[i]) { omega } else { 0.0 }).collect();
    let (b, _, _) = weighted_lasso(&q_mat, &q, &w, f64::INFINITY, &vec![0.0; x.cols()], opts.tol, opts.max_inner);
    Ok(b)
}

/// Global minimizer of ½(x−c)²/step + P(|x|) over [lo, hi] when `spec` is given, or the
/// projection of c otherwise.
pub(crate) fn prox_interval(c: f64, step: f64, spec: Option<&PenaltySpec>, lo: f64, hi: f64) -> f64 {
    let Some(s) = spec.filter(|s| s.lambda > 0.0) else {
        return c.clamp(lo, hi);
    };
    let (l, a) = (s.lambda, s.a);
    let f = |x: f64| 0.5 * (x - c) * (x - c) / step + s.value(x.abs());
    let knots = [0.0, l, a * l, f64::INFINITY];
    let mut cands = [0.0_f64; 18];
    let mut len = 0;
    let mut push = |v: f64| {
        cands[len] = v;
        len += 1;
    };
    for sign in [1.0, -1.0] {
        // θ range allowed on this side
        let (tlo, thi) = if sign > 0.0 { (lo.max(0.0), hi) } else { ((-hi).max(0.0), -lo) };
        if tlo > thi {
            continue;
        }
        let t = sign * c;
        for r in 0..3 {
            let (r0, r1) = (knots[r].max(tlo), knots[r + 1].min(thi));
            if r0 > r1 {
                continue;
            }
            push(sign * r0);
            if r1.is_finite() {
                push(sign * r1);
            }
            // stationary point of the region quadratic when it is convex
            let stat = match (s.family, r) {
                (_, 2) => Some(t),
                (_, 0) if s.family == crate::penalty::PenaltyFamily::Scad => Some(t - step * l),
                (crate::penalty::PenaltyFamily::Scad, 1) => {
                    let curv = 1.0 / step - 1.0 / (a - 1.0);
                    (curv > 0.0).then(|| (t / step - a * l / (a - 1.0)) / curv)
                }
                (crate::penalty::PenaltyFamily::Mcp, 0 | 1) => {
                    let curv = 1.0 / step - 1.0 / a;
                    (curv > 0.0).then(|| (t / step - l) / curv)
                }
                _ => None,
            };
            if let Some(th) = stat {
                push(sign * th.clamp(r0, r1));
            }
        }
    }
    // smallest value, ties to the smaller |x| and then the smaller x
    let mut best = cands[0];
    let mut fb = f(best);
    for &x in &cands[1..len] {
        let fx = f(x);
        let key = fx.total_cmp(&fb).then(x.abs().total_cmp(&best.abs())).then(x.total_cmp(&best));
        if key.is_lt() {
            best = x;
            fb = fx;
        }
    }
    best
}

/// Global minimizer of ½(x−c)²/step + P_λ(|x|); ties go to the smaller |x|.
pub fn scalar_prox(c: f64, step: f64, spec: &PenaltySpec) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    if !c.is_finite() {
        return Err(Error::NonFinite("prox argument".into()));
    }
    Ok(prox_interval(c, step, Some(spec), f64::NEG_INFINITY, f64::INFINITY))
}

fn require_ls(inst: &ProblemInstance) -> Result<()> {
    if !inst.is_unconstrained_least_squares() {
        return Err(Error::InvalidInstance("local solvers accept unconstrained least-squares instances only".into()));
    }
    Ok(())
}

pub(crate) fn initial_point(inst: &ProblemInstance, init: &Init, tol: f64, max_inner: usize) -> Result<Vec<f64>> {
    let d = inst.dim();
    let c = inst.box_c;
    Ok(match init {
        Init::Zero => vec![0.0; d],
        Init::Random { seed, lo, hi } => {
            if !(lo <= hi) {
                return Err(Error::InvalidParameter("random init needs lo <= hi".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..d).map(|_| rng.random_range(*lo..=*hi).clamp(-c, c)).collect()
        }
        Init::Given { beta } => {
            if beta.len() != d {
                return Err(Error::Dimension(format!("initial point has {} entries, expected {d}", beta.len())));
            }
            beta.iter().map(|v| v.clamp(-c, c)).collect()
        }
        Init::Lasso { omega } => {
            let w: Vec<f64> = (0..d).map(|i| if inst.penalized[i] { *omega } else { 0.0 }).collect();
            weighted_lasso(&inst.loss.q_mat, &inst.loss.q, &w, c, &vec![0.0; d], tol, max_inner).0
        }
        Init::LeastSquares => match &inst.design {
            Some(des) => least_squares(&des.x, &des.y)?.into_iter().map(|v| v.clamp(-c, c)).collect(),
            None => weighted_lasso(&inst.loss.q_mat, &inst.loss.q, &vec![0.0; d], c, &vec![0.0; d], tol, max_inner).0,
        },
    })
}

/// Local linear approximation: repeated weighted LASSO with weights n·P′(|β_i|).
pub fn lla(inst: &ProblemInstance, opts: &LocalOptions) -> Result<LocalResult> {
    require_ls(inst)?;
    opts.check()?;
    let x = initial_point(inst, &opts.init, opts.tol, opts.max_inner)?;
    Ok(lla_from(inst, x, opts))
}

pub(crate) fn lla_from(inst: &ProblemInstance, mut x: Vec<f64>, opts: &LocalOptions) -> LocalResult {
    let n = inst.nf();
    let mut trace = vec![];
    let mut converged = false;
    let mut it = 0;
    while it < opts.max_outer {
        it += 1;
        let w: Vec<f64> = (0..x.len())
            .map(|i| if inst.penalized[i] { n * inst.penalty.deriv(x[i].abs()) } else { 0.0 })
            .collect();
        let (nx, _, _) = weighted_lasso(&inst.loss.q_mat, &inst.loss.q, &w, inst.box_c, &x, opts.tol * 1e-2, opts.max_inner);
        let change = nx.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = nx;
        trace.push(inst.objective(&x));
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    LocalResult { objective: inst.objective(&x), beta: x, trace, iterations: it, converged }
}

/// Coordinate descent for any instance without linear constraints.
pub(crate) fn cd_from(inst: &ProblemInstance, mut x: Vec<f64>, tol: f64, max_sweeps: usize) -> LocalResult {
    let d = inst.dim();
    let n = inst.nf();
    let c = inst.box_c;
    let q_mat = &inst.loss.q_mat;
    let mut grad = inst.loss.gradient(&x);
    let mut trace = vec![];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut moved = 0.0_f64;
        for i in 0..d {
            let qii = q_mat[(i, i)];
            let spec = inst.penalized[i].then_some(&inst.penalty);
            let t = if qii > 0.0 {
                let u = x[i] - grad[i] / qii;
                match spec {
                    Some(s) => prox_interval(u, n / qii, Some(s), -c, c),
                    None => u.clamp(-c, c),
                }
            } else {
                // linear (or concave) in t: compare the candidate breakpoints
                let lin = grad[i] - qii * x[i];
                let f = |t: f64| 0.5 * qii * t * t + lin * t + spec.map_or(0.0, |s| n * s.value(t.abs()));
                let mut cands = vec![-c, c, 0.0, x[i]];
                if let Some(s) = spec {
                    for k in [s.lambda, s.a * s.lambda] {
                        cands.extend([k.min(c), -k.min(c)]);
                    }
                }
                cands.into_iter().fold(x[i], |b, t| if f(t) < f(b) { t } else { b })
            };
            let delta = t - x[i];
            if delta != 0.0 {
                x[i] = t;
                for (g, qv) in grad.iter_mut().zip(q_mat.row(i)) {
                    *g += delta * qv;
                }
                moved = moved.max(delta.abs());
            }
        }
        trace.push(inst.objective(&x));
        if moved <= tol {
            converged = true;
            break;
        }
    }
    LocalResult { objective: inst.objective(&x), beta: x, trace, iterations: sweeps, converged }
}

/// Cyclic coordinate minimization with exact scalar proximal steps.
pub fn nonconvex_cd(inst: &ProblemInstance, opts: &LocalOptions) -> Result<LocalResult> {
    require_ls(inst)?;
    opts.check()?;
    let x = initial_point(inst, &opts.init, opts.tol, opts.max_inner)?;
    Ok(cd_from(inst, x, opts.tol, opts.max_inner))
}

/// Composite gradient steps x⁺ = prox(x − t∇f(x)), t = 1/‖Q‖₂ halved on increase.
pub fn proximal_gradient(inst: &ProblemInstance, opts: &LocalOptions) -> Result<LocalResult> {
    require_ls(inst)?;
    opts.check()?;
    let mut x = initial_point(inst, &opts.init, opts.tol, opts.max_inner)?;
    let n = inst.nf();
    let c = inst.box_c;
    let lmax = symmetric_eigs(&inst.loss.q_mat)?.last().copied().unwrap_or(0.0);
    let base = if lmax > 0.0 { 1.0 / lmax } else { 1.0 };
    let mut fx = inst.objective(&x);
    let mut trace = vec![];
    let mut converged = false;
    let mut it = 0;
    let max_iter = opts.max_outer.max(1) * 100;
    while it < max_iter {
        it += 1;
        let g = inst.loss.gradient(&x);
        let mut step = base;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = (0..x.len())
                .map(|i| {
                    let v = x[i] - step * g[i];
                    prox_interval(v, n * step, inst.penalized[i].then_some(&inst.penalty), -c, c)
                })
                .collect();
            let fc = inst.objective(&cand);
            if fc <= fx {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((nx, fnew)) = accepted else {
            converged = true;
            break;
        };
        let change = nx.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = nx;
        fx = fnew;
        trace.push(fx);
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    Ok(LocalResult { objective: fx, beta: x, trace, iterations: it, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_least_squares;

    fn scad() -> PenaltySpec {
        PenaltySpec::scad(1.0, 3.7).unwrap()
    }

    #[test]
    fn prox_examples() {
        assert!((scalar_prox(1.5, 1.0, &scad()).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(scalar_prox(5.0, 1.0, &scad()).unwrap(), 5.0);
        let z = PenaltySpec::scad(0.0, 3.7).unwrap();
        assert_eq!(scalar_prox(-2.25, 1.0, &z).unwrap(), -2.25);
    }

    #[test]
    fn lasso_one_dimensional() {
        let x = Matrix::from_rows(&[vec![1.0]]);
        let b = lasso_cd(&x, &[1.5], 1.0, None, &LocalOptions::default()).unwrap();
        assert!((b[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lla_one_dimensional() {
        let inst = build_least_squares(&Matrix::from_rows(&[vec![1.0]]), &[1.5], scad(), None).unwrap();
        let r = lla(&inst, &LocalOptions::default()).unwrap();
        assert!((r.beta[0] - 0.5).abs() < 1e-12);
        assert!(r.iterations <= 2);
    }

    #[test]
    fn rejects_constrained() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        let inst = crate::model::build_lad(&x, &[0.0, 1.0], scad(), None).unwrap();
        assert!(lla(&inst, &LocalOptions::default()).is_err());
    }
}
