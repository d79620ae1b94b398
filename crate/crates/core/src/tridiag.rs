//! Thomas algorithm for tridiagonal systems.

/// Error raised when elimination meets a (near) zero pivot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroPivot {
    pub row: usize,
    pub pivot: f64,
}

/// Solves `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` in
/// place. `lower[0]` and `upper[n-1]` are ignored. Pivots with magnitude at
/// most `pivot_tol` are rejected.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    pivot_tol: f64,
) -> Result<(), ZeroPivot> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let tiny = pivot_tol.max(f64::MIN_POSITIVE);
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta.abs() <= tiny {
        return Err(ZeroPivot { row: 0, pivot: beta });
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta.abs() <= tiny || !beta.is_finite() {
            return Err(ZeroPivot { row: i, pivot: beta });
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}
