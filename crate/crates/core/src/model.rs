//! The unified penalized problem
//!
//! ```text
//! min ½xᵀQx + qᵀx + const + n·Σ_{i penalized} P(|x_i|)   s.t.  Aᵀx ≤ b,  ‖x‖∞ ≤ C
//! ```
//!
//! and builders for least squares, LAD, quantile and hinge losses.

use crate::error::{Error, Result};
use crate::numerics::dense::{dot, norm_inf, numerical_rank, Matrix};
use crate::numerics::simplex::{solve_lp, LpBuilder, LpStatus, RowKind};
use crate::numerics::symmetric_eigs;
use crate::penalty::PenaltySpec;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticLoss {
    pub q_mat: Matrix,
    pub q: Vec<f64>,
    /// Additive constant so objectives match the statistical loss (½yᵀy for least squares).
    pub constant: f64,
    /// Sample scale multiplying the penalty.
    pub n: usize,
}

impl QuadraticLoss {
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.q_mat.quad_form(x) + dot(&self.q, x) + self.constant
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.q_mat.matvec(x);
        for (gi, qi) in g.iter_mut().zip(&self.q) {
            *gi += qi;
        }
        g
    }
}

/// `{x : Aᵀx ≤ b}` with A stored as d̃×m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFeasibleSet {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl LinearFeasibleSet {
    pub fn unconstrained(dim: usize) -> Self {
        LinearFeasibleSet { a: Matrix::zeros(dim, 0), b: vec![] }
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// Column j of A.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.a.col(j)
    }

    /// Slacks b − Aᵀx.
    pub fn slacks(&self, x: &[f64]) -> Vec<f64> {
        let ax = self.a.tr_matvec(x);
        self.b.iter().zip(ax).map(|(b, v)| b - v).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    LeastSquares,
    Lad,
    Quantile { tau: f64 },
    Hinge,
    Custom,
}

/// Original regression data kept alongside instances built from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub x: Matrix,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub loss: QuadraticLoss,
    pub feasible: LinearFeasibleSet,
    pub penalty: PenaltySpec,
    pub penalized: Vec<bool>,
    pub box_c: f64,
    pub kind: LossKind,
    pub design: Option<Design>,
}

/// `10·(1 + ‖q‖∞ / max(1, min_i Q_ii clipped at 1e-6))`.
pub fn default_box_c(q_mat: &Matrix, q: &[f64]) -> f64 {
    let dmin = (0..q_mat.rows()).map(|i| q_mat[(i, i)]).fold(f64::INFINITY, f64::min);
    let dmin = if dmin.is_finite() { dmin.max(1e-6) } else { 1.0 };
    10.0 * (1.0 + norm_inf(q) / dmin.max(1.0))
}

impl ProblemInstance {
    /// Generic constructor; `box_c = None` selects the data-scaled default.
    pub fn new(
        loss: QuadraticLoss,
        feasible: LinearFeasibleSet,
        penalty: PenaltySpec,
        penalized: Vec<bool>,
        box_c: Option<f64>,
    ) -> Result<Self> {
        let d = loss.dim();
        if loss.q_mat.rows() != d || loss.q_mat.cols() != d {
            return Err(Error::Dimension(format!("Q is {}x{}, q has {d}", loss.q_mat.rows(), loss.q_mat.cols())));
        }
        if feasible.a.rows() != d || feasible.a.cols() != feasible.b.len() {
            return Err(Error::Dimension(format!(
                "A is {}x{}, expected {d} rows and {} columns",
                feasible.a.rows(),
                feasible.a.cols(),
                feasible.b.len()
            )));
        }
        if penalized.len() != d {
            return Err(Error::Dimension("penalized mask length".into()));
        }
        if loss.n == 0 {
            return Err(Error::InvalidParameter("sample scale n must be >= 1".into()));
        }
        if !loss.q_mat.all_finite()
            || loss.q.iter().any(|v| !v.is_finite())
            || !loss.constant.is_finite()
            || !feasible.a.all_finite()
            || feasible.b.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("problem data".into()));
        }
        penalty.validate()?;
        let box_c = box_c.unwrap_or_else(|| default_box_c(&loss.q_mat, &loss.q));
        if !(box_c.is_finite() && box_c > 0.0) {
            return Err(Error::InvalidParameter(format!("box constant must be finite and positive, got {box_c}")));
        }
        Ok(ProblemInstance { loss, feasible, penalty, penalized, box_c, kind: LossKind::Custom, design: None })
    }

    pub fn dim(&self) -> usize {
        self.loss.dim()
    }

    pub fn m(&self) -> usize {
        self.feasible.m()
    }

    pub fn n(&self) -> usize {
        self.loss.n
    }

    pub fn nf(&self) -> f64 {
        self.loss.n as f64
    }

    pub fn p(&self) -> usize {
        self.penalized.iter().filter(|&&b| b).count()
    }

    /// Replaces the penalized mask.
    pub fn with_penalized(mut self, penalized: Vec<bool>) -> Result<Self> {
        if penalized.len() != self.dim() {
            return Err(Error::Dimension("penalized mask length".into()));
        }
        self.penalized = penalized;
        Ok(self)
    }

    pub fn penalized_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.penalized[i]).collect()
    }

    pub fn with_penalty(&self, penalty: PenaltySpec) -> Self {
        ProblemInstance { penalty, ..self.clone() }
    }

    pub fn with_box(&self, box_c: f64) -> Self {
        ProblemInstance { box_c, ..self.clone() }
    }

    /// Least-squares instance without constraints, the shape local solvers accept.
    pub fn is_unconstrained_least_squares(&self) -> bool {
        self.kind == LossKind::LeastSquares && self.m() == 0
    }

    pub fn penalty_sum(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if self.penalized[i] {
                s += self.penalty.value(xi.abs());
            }
        }
        self.nf() * s
    }

    /// ℒ(x) without input checks.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.loss.value(x) + self.penalty_sum(x)
    }

    /// Max violation of Aᵀx ≤ b and of the box.
    pub fn feasibility_violation(&self, x: &[f64]) -> f64 {
        let mut v = self.feasible.slacks(x).iter().fold(0.0_f64, |m, s| m.max(-s));
        for &xi in x {
            v = v.max(xi.abs() - self.box_c);
        }
        v.max(0.0)
    }

    /// The statistical loss of the β block evaluated directly from the design, for
    /// instances built from data. Returns `None` for custom instances.
    pub fn data_loss(&self, beta: &[f64]) -> Option<f64> {
        let des = self.design.as_ref()?;
        let fit = des.x.matvec(beta);
        let r = des.y.iter().zip(&fit).map(|(y, f)| y - f);
        Some(match self.kind {
            LossKind::LeastSquares => 0.5 * r.map(|v| v * v).sum::<f64>(),
            LossKind::Lad => r.map(f64::abs).sum(),
            LossKind::Quantile { tau } => r.map(|v| v * (tau - if v < 0.0 { 1.0 } else { 0.0 })).sum(),
            LossKind::Hinge => des.y.iter().zip(&fit).map(|(y, f)| (1.0 - y * f).max(0.0)).sum(),
            LossKind::Custom => return None,
        })
    }

    /// Number of leading coordinates that form β (the rest are auxiliaries).
    pub fn beta_dim(&self) -> usize {
        match (&self.design, self.kind) {
            (Some(d), LossKind::Lad | LossKind::Quantile { .. } | LossKind::Hinge) => d.x.cols(),
            _ => self.dim(),
        }
    }

    /// Completes β with the cheapest feasible auxiliary values.
    pub fn lift(&self, beta: &[f64]) -> Vec<f64> {
        let d = self.beta_dim();
        if d == self.dim() {
            return beta.to_vec();
        }
        let des = self.design.as_ref().expect("auxiliary instances carry their design");
        let fit = des.x.matvec(&beta[..d]);
        let mut x = beta[..d].to_vec();
        for (t, f) in fit.iter().enumerate() {
            let r = des.y[t] - f;
            x.push(match self.kind {
                LossKind::Lad => r.abs(),
                LossKind::Quantile { .. } => (-r).max(0.0),
                LossKind::Hinge => (1.0 - des.y[t] * f).max(0.0),
                _ => unreachable!(),
            });
        }
        x
    }
}

fn check_data(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::Dimension("design needs n >= 1 and d >= 1".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!("X has {} rows, y has {} entries", x.rows(), y.len())));
    }
    if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design data".into()));
    }
    Ok(())
}

pub fn build_least_squares(x: &Matrix, y: &[f64], penalty: PenaltySpec, box_c: Option<f64>) -> Result<ProblemInstance> {
    check_data(x, y)?;
    let q_mat = x.gram();
    let q: Vec<f64> = x.tr_matvec(y).into_iter().map(|v| -v).collect();
    let loss = QuadraticLoss { q_mat, q, constant: 0.5 * dot(y, y), n: x.rows() };
    let d = x.cols();
    let mut inst = ProblemInstance::new(loss, LinearFeasibleSet::unconstrained(d), penalty, vec![true; d], box_c)?;
    inst.kind = LossKind::LeastSquares;
    inst.design = Some(Design { x: x.clone(), y: y.to_vec() });
    Ok(inst)
}

/// Shared layout for (β, ψ) losses: Q = 0, objective `lin·x + constant`, rows given
/// as (β coefficients, ψ index, ψ coefficient, rhs).
fn build_auxiliary(
    x: &Matrix,
    y: &[f64],
    penalty: PenaltySpec,
    box_c: Option<f64>,
    lin: Vec<f64>,
    constant: f64,
    rows: Vec<(Vec<f64>, usize, f64, f64)>,
    kind: LossKind,
) -> Result<ProblemInstance> {
    let (n, d) = (x.rows(), x.cols());
    let dim = d + n;
    let mut a = Matrix::zeros(dim, rows.len());
    let mut b = Vec::with_capacity(rows.len());
    for (j, (coef, t, psi_coef, rhs)) in rows.into_iter().enumerate() {
        for (i, v) in coef.into_iter().enumerate() {
            a[(i, j)] = v;
        }
        a[(d + t, j)] = psi_coef;
        b.push(rhs);
    }
    let loss = QuadraticLoss { q_mat: Matrix::zeros(dim, dim), q: lin, constant, n };
    let mut mask = vec![true; d];
    mask.resize(dim, false);
    let mut inst = ProblemInstance::new(loss, LinearFeasibleSet { a, b }, penalty, mask, box_c)?;
    inst.kind = kind;
    inst.design = Some(Design { x: x.clone(), y: y.to_vec() });
    Ok(inst)
}

/// ℓ1 loss through −ψ ≤ y − Xβ ≤ ψ.
pub fn build_lad(x: &Matrix, y: &[f64], penalty: PenaltySpec, box_c: Option<f64>) -> Result<ProblemInstance> {
    check_data(x, y)?;
    let (n, d) = (x.rows(), x.cols());
    let mut lin = vec![0.0; d];
    lin.resize(d + n, 1.0);
    let mut rows = Vec::with_capacity(2 * n);
    for t in 0..n {
        let xt = x.row(t);
        // y − xβ ≤ ψ  ⇔  −xβ − ψ ≤ −y
        rows.push((xt.iter().map(|v| -v).collect(), t, -1.0, -y[t]));
        // xβ − y ≤ ψ  ⇔  xβ − ψ ≤ y
        rows.push((xt.to_vec(), t, -1.0, y[t]));
    }
    build_auxiliary(x, y, penalty, box_c, lin, 0.0, rows, LossKind::Lad)
}

/// Check loss ρ_τ through ψ ≥ Xβ − y, ψ ≥ 0, objective 1ᵀ[(y − Xβ)τ + ψ].
pub fn build_quantile(
    x: &Matrix,
    y: &[f64],
    tau: f64,
    penalty: PenaltySpec,
    box_c: Option<f64>,
) -> Result<ProblemInstance> {
    check_data(x, y)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau must lie in (0,1), got {tau}")));
    }
    let (n, d) = (x.rows(), x.cols());
    let ones = vec![1.0; n];
    let mut lin: Vec<f64> = x.tr_matvec(&ones).into_iter().map(|v| -tau * v).collect();
    lin.resize(d + n, 1.0);
    let constant = tau * y.iter().sum::<f64>();
    let mut rows = Vec::with_capacity(2 * n);
    for t in 0..n {
        // xβ − y ≤ ψ  ⇔  xβ − ψ ≤ y
        rows.push((x.row(t).to_vec(), t, -1.0, y[t]));
        // −ψ ≤ 0
        rows.push((vec![0.0; d], t, -1.0, 0.0));
    }
    build_auxiliary(x, y, penalty, box_c, lin, constant, rows, LossKind::Quantile { tau })
}

/// Hinge loss through ψ_t ≥ 1 − y_t x_tᵀβ, ψ ≥ 0.
pub fn build_hinge_svm(x: &Matrix, y: &[f64], penalty: PenaltySpec, box_c: Option<f64>) -> Result<ProblemInstance> {
    check_data(x, y)?;
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter(format!("labels must be -1 or +1, got {bad}")));
    }
    let (n, d) = (x.rows(), x.cols());
    let mut lin = vec![0.0; d];
    lin.resize(d + n, 1.0);
    let mut rows = Vec::with_capacity(2 * n);
    for t in 0..n {
        // 1 − y xβ ≤ ψ  ⇔  −y xβ − ψ ≤ −1
        rows.push((x.row(t).iter().map(|v| -y[t] * v).collect(), t, -1.0, -1.0));
        rows.push((vec![0.0; d], t, -1.0, 0.0));
    }
    build_auxiliary(x, y, penalty, box_c, lin, 0.0, rows, LossKind::Hinge)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "failure", rename_all = "snake_case")]
pub enum ValidationFailure {
    Asymmetric { defect: f64 },
    RankDeficient { rank: usize, expected: usize },
    EmptyFeasibleSet,
    NoPenalizedCoordinate,
    BadPenalty { message: String },
    BadBox { box_c: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub symmetry_defect: f64,
    /// Numerical rank of A and the rank it must reach, min(d̃, m).
    pub rank: usize,
    pub expected_rank: usize,
    /// Point certifying Aᵀx ≤ b within the box, if one was found.
    pub feasible_point: Option<Vec<f64>>,
    /// Finite lower bound on the loss over the box.
    pub loss_lower_bound: f64,
    pub min_eig_q: f64,
    pub failures: Vec<ValidationFailure>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const RANK_TOL: f64 = 1e-10;

/// Checks the standing assumptions: symmetric Q, full-rank A, nonempty feasible set and
/// a loss bounded below on the box.
pub fn validate_instance(inst: &ProblemInstance) -> Diagnostics {
    let mut failures = vec![];
    let defect = inst.loss.q_mat.symmetry_defect();
    if defect > SYMMETRY_TOL {
        failures.push(ValidationFailure::Asymmetric { defect });
    }
    let (dim, m) = (inst.dim(), inst.m());
    let expected = dim.min(m);
    let rank = numerical_rank(&inst.feasible.a, RANK_TOL);
    if m > 0 && rank < expected {
        failures.push(ValidationFailure::RankDeficient { rank, expected });
    }
    if let Err(e) = inst.penalty.validate() {
        failures.push(ValidationFailure::BadPenalty { message: e.to_string() });
    }
    if inst.p() == 0 {
        failures.push(ValidationFailure::NoPenalizedCoordinate);
    }
    if !(inst.box_c.is_finite() && inst.box_c > 0.0) {
        failures.push(ValidationFailure::BadBox { box_c: inst.box_c });
    }
    let c = inst.box_c;
    let feasible_point = if m == 0 {
        Some(vec![0.0; dim])
    } else {
        let mut lp = LpBuilder::new();
        for _ in 0..dim {
            lp.add_var(0.0, -c, c);
        }
        for j in 0..m {
            let coeffs = (0..dim).filter_map(|i| {
                let v = inst.feasible.a[(i, j)];
                (v != 0.0).then_some((i, v))
            });
            lp.add_row(coeffs.collect(), RowKind::Le, inst.feasible.b[j]);
        }
        let sol = solve_lp(&lp.build(), None);
        (sol.status == LpStatus::Optimal).then(|| sol.x[..dim].to_vec())
    };
    if feasible_point.is_none() {
        failures.push(ValidationFailure::EmptyFeasibleSet);
    }
    let sym = if defect > SYMMETRY_TOL {
        Matrix::from_fn(dim, dim, |i, j| 0.5 * (inst.loss.q_mat[(i, j)] + inst.loss.q_mat[(j, i)]))
    } else {
        inst.loss.q_mat.clone()
    };
    let min_eig = symmetric_eigs(&sym).ok().and_then(|v| v.first().copied()).unwrap_or(0.0);
    // ½xᵀQx ≥ ½ min(λ_min,0)·‖x‖² and qᵀx ≥ −‖q‖₁C on the box
    let q1: f64 = inst.loss.q.iter().map(|v| v.abs()).sum();
    let lb = 0.5 * min_eig.min(0.0) * dim as f64 * c * c - q1 * c + inst.loss.constant;
    Diagnostics {
        symmetry_defect: defect,
        rank,
        expected_rank: if m > 0 { expected } else { 0 },
        feasible_point,
        loss_lower_bound: lb,
        min_eig_q: min_eig,
        failures,
    }
}

/// Like `validate_instance` but turns failures into an error.
pub fn ensure_valid(inst: &ProblemInstance) -> Result<Diagnostics> {
    let d = validate_instance(inst);
    if d.passed() {
        Ok(d)
    } else {
        Err(Error::InvalidInstance(format!("{:?}", d.failures)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scad() -> PenaltySpec {
        PenaltySpec::scad(1.0, 3.7).unwrap()
    }

    #[test]
    fn identity_design() {
        let inst = build_least_squares(&Matrix::identity(2), &[1.0, 1.0], scad(), None).unwrap();
        assert_eq!(inst.loss.q_mat, Matrix::identity(2));
        assert_eq!(inst.loss.q, vec![-1.0, -1.0]);
    }

    #[test]
    fn scalar_design() {
        let inst = build_least_squares(&Matrix::from_rows(&[vec![2.0]]), &[4.0], scad(), None).unwrap();
        assert_eq!(inst.loss.q_mat[(0, 0)], 4.0);
        assert_eq!(inst.loss.q, vec![-8.0]);
    }

    #[test]
    fn lad_counts_two_rows_per_sample() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]);
        let inst = build_lad(&x, &[0.0, 1.0], scad(), None).unwrap();
        assert_eq!(inst.m(), 4);
        assert_eq!(inst.penalized, vec![true, false, false]);
        assert!(validate_instance(&inst).passed());
    }

    #[test]
    fn asymmetric_q_reported() {
        let loss = QuadraticLoss { q_mat: Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]), q: vec![0.0; 2], constant: 0.0, n: 1 };
        let inst = ProblemInstance::new(loss, LinearFeasibleSet::unconstrained(2), scad(), vec![true; 2], Some(5.0)).unwrap();
        let d = validate_instance(&inst);
        assert!(matches!(d.failures[0], ValidationFailure::Asymmetric { .. }));
    }

    #[test]
    fn duplicated_constraint_column_reported() {
        let loss = QuadraticLoss { q_mat: Matrix::identity(3), q: vec![0.0; 3], constant: 0.0, n: 1 };
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0], vec![2.0, 2.0]]);
        let inst = ProblemInstance::new(loss, LinearFeasibleSet { a, b: vec![1.0, 1.0] }, scad(), vec![true; 3], Some(5.0))
            .unwrap();
        let d = validate_instance(&inst);
        assert!(d.failures.iter().any(|f| matches!(f, ValidationFailure::RankDeficient { rank: 1, expected: 2 })));
    }

    #[test]
    fn plain_instance_passes() {
        let loss = QuadraticLoss { q_mat: Matrix::identity(2), q: vec![0.0; 2], constant: 0.0, n: 1 };
        let inst = ProblemInstance::new(loss, LinearFeasibleSet::unconstrained(2), scad(), vec![true; 2], None).unwrap();
        assert!(validate_instance(&inst).passed());
    }

    #[test]
    fn empty_feasible_set_reported() {
        let loss = QuadraticLoss { q_mat: Matrix::identity(1), q: vec![0.0], constant: 0.0, n: 1 };
        // x ≤ -1 and -x ≤ -1
        let a = Matrix::from_rows(&[vec![1.0, -1.0]]);
        let inst = ProblemInstance::new(loss, LinearFeasibleSet { a, b: vec![-1.0, -1.0] }, scad(), vec![true], Some(5.0)).unwrap();
        assert!(validate_instance(&inst).failures.contains(&ValidationFailure::EmptyFeasibleSet));
    }
}
