//! Row-major dense matrices and the handful of factorizations the solver needs.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Panics on ragged input; use `try_from_rows` for untrusted data.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        Self::try_from_rows(rows).expect("ragged rows")
    }

    pub fn try_from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::Dimension(format!("row {i} has {} entries, expected {c}", row.len())));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Computes `selfᵀ x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, self.row(i), &mut out);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a != 0.0 {
                    let src = other.row(k);
                    axpy(a, src, out.row_mut(i));
                }
            }
        }
        out
    }

    /// `selfᵀ self`.
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                let ri = row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..self.cols {
                    g.data[i * self.cols + j] += ri * row[j];
                }
            }
        }
        for i in 0..self.cols {
            for j in 0..i {
                g.data[i * self.cols + j] = g.data[j * self.cols + i];
            }
        }
        g
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute row sum, an upper bound on the spectral norm of a symmetric matrix.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Max |a_ij − a_ji| relative to max(1, max |a_ij|); infinite when not square.
    pub fn symmetry_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut d = 0.0_f64;
        for i in 0..self.rows {
            for j in 0..i {
                d = d.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        d / self.max_abs().max(1.0)
    }

    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    pub fn principal(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    /// `xᵀ self x` for square self.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// LU factorization with partial pivoting, stored compactly.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if n != a.cols() {
            return Err(Error::Dimension("LU needs a square matrix".into()));
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(1e-300);
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pv <= 1e-14 * scale {
                return Err(Error::Numerical(format!("singular matrix at column {k}")));
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / piv;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }
}

pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    Ok(Lu::new(a)?.solve(b))
}

/// Cholesky factor L (lower) with A = L Lᵀ.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut s = a[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if s <= 0.0 {
            return Err(Error::Numerical("matrix not positive definite".into()));
        }
        let d = s.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Numerical rank from Householder QR with column pivoting.
pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> usize {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return 0;
    }
    let mut r = a.clone();
    let mut norms: Vec<f64> = (0..n).map(|j| norm2(&r.col(j))).collect();
    let first = norms.iter().cloned().fold(0.0, f64::max);
    if first == 0.0 {
        return 0;
    }
    let mut rank = 0;
    for k in 0..m.min(n) {
        let (p, pn) = (k..n).map(|j| (j, norms[j])).fold((k, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        if pn <= rel_tol * first {
            break;
        }
        if p != k {
            norms.swap(p, k);
            for i in 0..m {
                let t = r[(i, k)];
                r[(i, k)] = r[(i, p)];
                r[(i, p)] = t;
            }
        }
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        let vnorm = norm2(&v);
        let alpha = if v[0] >= 0.0 { -vnorm } else { vnorm };
        v[0] -= alpha;
        let vn = dot(&v, &v);
        if vn > 0.0 {
            for j in k..n {
                let s: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum::<f64>() * 2.0 / vn;
                for i in k..m {
                    r[(i, j)] -= s * v[i - k];
                }
            }
        }
        rank += 1;
        for j in k + 1..n {
            norms[j] = (k + 1..m).map(|i| r[(i, j)] * r[(i, j)]).sum::<f64>().sqrt();
        }
    }
    rank
}

/// Least squares min ‖y − Xβ‖. Uses the normal equations through Cholesky when X has
/// full column rank and the minimum-norm solution Xᵀ(XXᵀ)⁻¹y otherwise.
pub fn least_squares(x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::Dimension("least squares: y length".into()));
    }
    if d == 0 {
        return Ok(vec![]);
    }
    let g = x.gram();
    if n >= d {
        if let Ok(l) = cholesky(&g) {
            let rhs = x.tr_matvec(y);
            return Ok(chol_solve(&l, &rhs));
        }
    }
    // minimum-norm route; a tiny ridge keeps the rank-deficient case solvable
    let xxt = x.transpose().gram();
    let ridge = 1e-12 * xxt.max_abs().max(1.0);
    let mut reg = xxt.clone();
    for i in 0..n {
        reg[(i, i)] += ridge;
    }
    let l = cholesky(&reg)?;
    let w = chol_solve(&l, y);
    Ok(x.tr_matvec(&w))
}

pub fn chol_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[(k, i)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

/// Outcome of a positive semidefinite solve.
#[derive(Clone, Debug)]
pub enum PsdSolve {
    /// A solution of M·x = b.
    Solution(Vec<f64>),
    /// b is not in the range of M: z with M·z = 0 and bᵀz > 0.
    NullDirection(Vec<f64>),
}

/// Solves M·x = b for symmetric positive semidefinite M by Cholesky with diagonal
/// pivoting; pivots below `rel_tol`·max diag count as zero.
pub fn psd_solve(m: &Matrix, b: &[f64], rel_tol: f64) -> PsdSolve {
    let k = m.rows();
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..k).collect();
    let dmax = (0..k).map(|i| m[(i, i)]).fold(0.0_f64, f64::max);
    let mut r = 0;
    while r < k {
        let p = (r..k).max_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)])).expect("nonempty");
        if a[(p, p)] <= rel_tol * dmax || a[(p, p)] <= 0.0 {
            break;
        }
        if p != r {
            perm.swap(p, r);
            for c in 0..k {
                let t = a[(p, c)];
                a[(p, c)] = a[(r, c)];
                a[(r, c)] = t;
            }
            for row in 0..k {
                let t = a[(row, p)];
                a[(row, p)] = a[(row, r)];
                a[(row, r)] = t;
            }
        }
        let piv = a[(r, r)].sqrt();
        a[(r, r)] = piv;
        for i in r + 1..k {
            a[(i, r)] /= piv;
        }
        for j in r + 1..k {
            let ljr = a[(j, r)];
            if ljr == 0.0 {
                continue;
            }
            for i in j..k {
                let v = a[(i, r)] * ljr;
                a[(i, j)] -= v;
            }
        }
        for j in r + 1..k {
            for i in r + 1..j {
                a[(i, j)] = a[(j, i)];
            }
        }
        r += 1;
    }
    // L11 is a[0..r, 0..r] (lower), L21 is a[r..k, 0..r]
    let pb: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
    let fwd = |rhs: &[f64]| {
        let mut y = rhs.to_vec();
        for i in 0..r {
            for j in 0..i {
                y[i] -= a[(i, j)] * y[j];
            }
            y[i] /= a[(i, i)];
        }
        y
    };
    let bwd = |rhs: &[f64]| {
        let mut x = rhs.to_vec();
        for i in (0..r).rev() {
            for j in i + 1..r {
                x[i] -= a[(j, i)] * x[j];
            }
            x[i] /= a[(i, i)];
        }
        x
    };
    let y = fwd(&pb[..r]);
    let xb = bwd(&y);
    // residual on the dependent block: b_N − L21·y
    let rn: Vec<f64> = (r..k).map(|i| pb[i] - (0..r).map(|j| a[(i, j)] * y[j]).sum::<f64>()).collect();
    let scale = norm_inf(b).max(f64::MIN_POSITIVE);
    let mut out = vec![0.0; k];
    if rn.iter().all(|v| v.abs() <= 1e-10 * scale) {
        for (t, &i) in perm[..r].iter().enumerate() {
            out[i] = xb[t];
        }
        return PsdSolve::Solution(out);
    }
    // z_N = r_N, z_B = −L11⁻ᵀ L21ᵀ r_N
    let l21t: Vec<f64> = (0..r).map(|j| (r..k).map(|i| a[(i, j)] * rn[i - r]).sum()).collect();
    let zb = bwd(&l21t);
    for (t, &i) in perm[..r].iter().enumerate() {
        out[i] = -zb[t];
    }
    for (t, &i) in perm[r..].iter().enumerate() {
        out[i] = rn[t];
    }
    PsdSolve::NullDirection(out)
}

#[cfg(test)]
mod tests {
    #[test]
    fn psd_solve_singular() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 1.0]]);
        let m = x.gram();
        let b = m.matvec(&[1.0, -1.0, 0.5]);
        match psd_solve(&m, &b, 1e-12) {
            PsdSolve::Solution(s) => {
                let r = m.matvec(&s);
                assert!(r.iter().zip(&b).all(|(a, c)| (a - c).abs() < 1e-10));
            }
            PsdSolve::NullDirection(_) => panic!("consistent system"),
        }
        let b = vec![1.0, 0.0, 0.0];
        match psd_solve(&m, &b, 1e-12) {
            PsdSolve::NullDirection(z) => {
                assert!(norm_inf(&m.matvec(&z)) < 1e-10);
                assert!(dot(&b, &z) > 0.0);
            }
            PsdSolve::Solution(_) => panic!("inconsistent system"),
        }
    }

    use super::*;

    #[test]
    fn gram_matches_transpose_product() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 4.0]]);
        assert_eq!(x.gram(), x.transpose().matmul(&x));
    }

    #[test]
    fn lu_solves_permuted_system() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
        let b = [3.0, 2.0, 4.0];
        let x = solve_linear(&a, &b).unwrap();
        let r = a.matvec(&x);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_detects_duplicate_column() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 1.0], vec![3.0, 3.0, 5.0]]);
        assert_eq!(numerical_rank(&a, 1e-10), 2);
        assert_eq!(numerical_rank(&Matrix::identity(4), 1e-10), 4);
    }

    #[test]
    fn min_norm_least_squares_when_wide() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0]]);
        let b = least_squares(&x, &[2.0]).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-9 && (b[1] - 1.0).abs() < 1e-9);
    }
}
