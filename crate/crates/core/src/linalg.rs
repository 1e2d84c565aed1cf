//! Shared dense linear-algebra helpers for the small (q ≤ ~10) systems
//! that the moment machinery produces.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff below which a design is declared rank
/// deficient.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// Ridge escalation ladder, as multiples of tr(Σ)/q.
const RIDGE_STEPS: [f64; 4] = [1e-10, 1e-8, 1e-6, 1e-4];

/// Error if the smallest singular value of `x` falls below
/// `RANK_TOL`, relative to the largest.
pub(crate) fn check_full_rank(x: &DMatrix<f64>) -> Result<()> {
    let sv = x.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if !max.is_finite() || max <= 0.0 || min < RANK_TOL * max {
        return Err(Error::RankDeficient);
    }
    Ok(())
}

/// Least-squares solution of `X β = y` via the normal equations
/// (rank-checked first).
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_full_rank(x)?;
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let chol = Cholesky::new(xtx).ok_or(Error::RankDeficient)?;
    Ok(chol.solve(&xty))
}

/// Solve `(Σ + r·I) z = rhs` by Cholesky, escalating the ridge `r` from
/// `base_ridge` through `base_ridge + ε·tr(Σ)/q` until the factorization
/// succeeds. Returns the solution and the ridge that was actually used.
pub(crate) fn solve_spd_escalating(
    sigma: &DMatrix<f64>,
    rhs: &DVector<f64>,
    base_ridge: f64,
) -> Result<(DVector<f64>, f64)> {
    let q = sigma.nrows();
    let trace_scale = sigma.trace() / q as f64;
    let attempt = |ridge: f64| -> Option<DVector<f64>> {
        let mut m = sigma.clone();
        for i in 0..q {
            m[(i, i)] += ridge;
        }
        Cholesky::new(m).map(|chol| chol.solve(rhs))
    };
    if let Some(sol) = attempt(base_ridge) {
        return Ok((sol, base_ridge));
    }
    for eps in RIDGE_STEPS {
        let ridge = base_ridge + eps * trace_scale;
        if let Some(sol) = attempt(ridge) {
            return Ok((sol, ridge));
        }
    }
    Err(Error::SingularCovariance)
}

/// Inverse of a symmetric positive-definite matrix.
pub(crate) fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Cholesky::new(m.clone())
        .map(|c| c.inverse())
        .ok_or(Error::RankDeficient)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_check_catches_collinear_columns() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(check_full_rank(&x).is_err());
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        assert!(check_full_rank(&x).is_ok());
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let beta = DVector::from_vec(vec![0.5, -1.5]);
        let y = &x * &beta;
        let hat = least_squares(&x, &y).unwrap();
        assert!((hat - beta).amax() < 1e-12);
    }

    #[test]
    fn ridge_escalation_reports_zero_on_pd_input() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let rhs = DVector::from_vec(vec![1.0, 1.0]);
        let (_, ridge) = solve_spd_escalating(&sigma, &rhs, 0.0).unwrap();
        assert_eq!(ridge, 0.0);
    }

    #[test]
    fn ridge_escalation_rescues_semidefinite_input() {
        // rank-1 matrix, not PD
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let rhs = DVector::from_vec(vec![1.0, 0.0]);
        let (_, ridge) = solve_spd_escalating(&sigma, &rhs, 0.0).unwrap();
        assert!(ridge > 0.0);
    }

    #[test]
    fn zero_matrix_is_singular_at_max_ridge() {
        let sigma = DMatrix::zeros(2, 2);
        let rhs = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            solve_spd_escalating(&sigma, &rhs, 0.0),
            Err(Error::SingularCovariance)
        ));
    }
}
