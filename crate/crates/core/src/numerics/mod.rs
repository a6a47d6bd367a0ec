//! Dense linear algebra, a symmetric eigensolver and a simplex LP solver.

pub mod dense;
pub mod eigen;
pub mod simplex;

pub use dense::Matrix;
pub use eigen::{symmetric_eigen, symmetric_eigs};
pub use simplex::{solve_lp, Basis, LpBuilder, LpSolution, LpStatus, RowKind, StandardLp};
