//! Small dense kernels shared by the solvers and the ERC evaluation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on `|R_kk|` below which a QR factor is treated as singular.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Thin Householder QR of a tall matrix with full column rank.
pub struct ThinQr {
    qr: nalgebra::QR<f64, nalgebra::Dyn, nalgebra::Dyn>,
    r: DMatrix<f64>,
}

impl ThinQr {
    /// Factorizes `a`; fails when the columns are numerically dependent.
    pub fn new(a: &DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        let (m, k) = a.shape();
        if k > m {
            return Err(Error::RankDeficient(format!(
                "{k} columns in dimension {m}"
            )));
        }
        let qr = a.clone().qr();
        let r = qr.r();
        let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..k {
            if r[(i, i)].abs() <= rank_tol * max_diag.max(f64::MIN_POSITIVE) {
                return Err(Error::RankDeficient(format!(
                    "|R[{i},{i}]| = {:e} relative to {:e}",
                    r[(i, i)].abs(),
                    max_diag
                )));
            }
        }
        Ok(ThinQr { qr, r })
    }

    /// Least-squares coefficients `argmin_c ‖A c − b‖₂`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let k = self.r.ncols();
        let mut qtb = b.clone();
        self.qr.q_tr_mul(&mut qtb);
        let top = qtb.rows(0, k).into_owned();
        self.r
            .solve_upper_triangular(&top)
            .expect("diagonal checked nonzero")
    }
}

/// Least-squares fit on the given columns: coefficients and residual `b − A c`.
pub fn least_squares(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    rank_tol: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if a.nrows() != b.len() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows, right-hand side has length {}",
            a.nrows(),
            b.len()
        )));
    }
    if a.ncols() == 0 {
        return Ok((DVector::zeros(0), b.clone()));
    }
    let qr = ThinQr::new(a, rank_tol)?;
    let c = qr.solve(b);
    let residual = b - a * &c;
    Ok((c, residual))
}

/// True when the columns of `a` have numerical rank below their count, i.e.
/// `σ_min ≤ rank_tol · σ_max` (or there are more columns than rows).
pub fn columns_dependent(a: &DMatrix<f64>, rank_tol: f64) -> bool {
    let (m, k) = a.shape();
    if k == 0 {
        return false;
    }
    if k > m {
        return true;
    }
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    max == 0.0 || min <= rank_tol * max
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn solves_overdetermined_consistent_system() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (c, r) = least_squares(&a, &b, DEFAULT_RANK_TOL).unwrap();
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c[1], 2.0, epsilon = 1e-14);
        assert!(r.norm() < 1e-14);
    }

    #[test]
    fn residual_is_orthogonal_to_columns() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let (_, r) = least_squares(&a, &b, DEFAULT_RANK_TOL).unwrap();
        assert!((a.transpose() * r).amax() < 1e-14);
    }

    #[test]
    fn dependent_columns_are_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        assert!(least_squares(&a, &DVector::zeros(2), DEFAULT_RANK_TOL).is_err());
        assert!(columns_dependent(&a, 1e-10));
        assert!(!columns_dependent(&DMatrix::identity(2, 2), 1e-10));
        assert!(columns_dependent(&DMatrix::identity(2, 3), 1e-10));
    }
}
