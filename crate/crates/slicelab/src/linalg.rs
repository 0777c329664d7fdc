//! Small dense helpers: SPD checks and the generalized symmetric
//! eigenproblem used by the monotonicity classifier.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Cholesky factor of a symmetric positive-definite matrix, or an error
/// naming the context.
pub fn cholesky_spd(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::DegenerateMetric(format!("{what}: Cholesky failed on {m}")))
}

/// Eigenvalues of `a` relative to the SPD matrix `b`: solutions of
/// `a v = lambda b v`, computed via `C = L^-1 a L^-T` with `b = L L^T`.
/// Returned in ascending order.
pub fn generalized_symmetric_eigenvalues(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let chol = cholesky_spd(b, "generalized eigenvalue base form")?;
    let l = chol.l();
    // y = L^-1 a, c = y L^-T = (L^-1 y^T)^T
    let y = l.solve_lower_triangular(a).ok_or_else(|| {
        Error::DegenerateMetric("singular Cholesky factor in generalized eigensolve".into())
    })?;
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| {
            Error::DegenerateMetric("singular Cholesky factor in generalized eigensolve".into())
        })?
        .transpose();
    // symmetrize to guard against round-off before the symmetric solver
    let c = (&c + c.transpose()) * 0.5;
    let mut eig: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(eig)
}

/// Solve the dense system `m x = rhs` by LU, or report a singular matrix.
pub fn lu_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().lu().solve(rhs)
}
