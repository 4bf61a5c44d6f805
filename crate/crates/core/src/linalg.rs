//! Dense least-squares used by the factor and panel regressions.
//!
//! The design matrix is reduced with a Householder QR and the triangular
//! factor is decomposed with an SVD, which exposes the singular values of
//! the design for the rank test without ever forming `XᵀX`.

use nalgebra::{DMatrix, DVector};

/// Columns whose singular value falls below this fraction of the largest
/// one are treated as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("design matrix is rank deficient (rank {rank} < {columns} columns)")]
pub struct RankDeficient {
    pub rank: usize,
    pub columns: usize,
}

#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    /// `(XᵀX)⁻¹`, assembled from the SVD as `V S⁻² Vᵀ`.
    pub xtx_inverse: DMatrix<f64>,
}

pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares, RankDeficient> {
    let (n, k) = x.shape();
    assert_eq!(n, y.len(), "row count mismatch");
    if k == 0 {
        return Ok(LeastSquares {
            coefficients: DVector::zeros(0),
            residuals: y.clone(),
            rss: y.norm_squared(),
            xtx_inverse: DMatrix::zeros(0, 0),
        });
    }
    if n < k {
        return Err(RankDeficient { rank: n, columns: k });
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let qty_head = qty.rows(0, k).into_owned();

    let svd = r.svd(true, true);
    let s = &svd.singular_values;
    let s_max = s.iter().cloned().fold(0.0_f64, f64::max);
    let threshold = RANK_TOLERANCE * s_max;
    let rank = s.iter().filter(|&&v| v > threshold).count();
    if s_max == 0.0 || rank < k || s.iter().any(|v| !v.is_finite()) {
        return Err(RankDeficient { rank, columns: k });
    }

    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut scaled = u.transpose() * qty_head;
    for (i, val) in scaled.iter_mut().enumerate() {
        *val /= s[i];
    }
    let coefficients = v_t.transpose() * scaled;

    let mut v_scaled = v_t.transpose();
    for (j, mut col) in v_scaled.column_iter_mut().enumerate() {
        col /= s[j];
    }
    let xtx_inverse = &v_scaled * v_scaled.transpose();

    let residuals = y - x * &coefficients;
    let rss = residuals.norm_squared();
    Ok(LeastSquares {
        coefficients,
        residuals,
        rss,
        xtx_inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_and_normal_equations() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let fit = least_squares(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(fit.rss < 1e-24);
        let gram = x.transpose() * &x;
        let ident = gram * &fit.xtx_inverse;
        assert!((ident - DMatrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn collinear_columns_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let err = least_squares(&x, &y).unwrap_err();
        assert_eq!(err.columns, 2);
        assert_eq!(err.rank, 1);
    }

    #[test]
    fn zero_column_rejected() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(least_squares(&x, &y).is_err());
    }
}
