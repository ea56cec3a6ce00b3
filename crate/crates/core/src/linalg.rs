//! Small dense linear-algebra helpers on top of nalgebra.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub(crate) fn column_means<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    let n = T::from_count(m.nrows().max(1));
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

pub(crate) fn centered<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let means = column_means(m);
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}

/// Sample cross-covariance `n⁻¹ Σ (a_i − ā)(b_i − b̄)ᵀ` between the columns of `a` and `b`.
pub(crate) fn cross_covariance<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let n = T::from_count(a.nrows());
    (centered(a).transpose() * centered(b)) / n
}

/// Second-moment matrix `n⁻¹ Σ x_i x_iᵀ` of the rows of `m`.
pub(crate) fn second_moment<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = T::from_count(m.nrows());
    (m.transpose() * m) / n
}

pub(crate) fn min_eigenvalue_sym<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 {
        return T::zero();
    }
    let eig = SymmetricEigen::new(m.clone());
    eig.eigenvalues
        .iter()
        .copied()
        .fold(T::max_value().unwrap(), |a, b| a.min(b))
}

/// Inverse symmetric square root of a positive-definite matrix.
pub(crate) fn inv_sqrt_sym<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    let eig = SymmetricEigen::new(m.clone());
    let largest = eig.eigenvalues.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let floor = largest * T::lit(1e-12);
    let mut scaled = eig.eigenvectors.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let lam = eig.eigenvalues[j];
        if lam <= floor || lam <= T::zero() {
            return Err(Error::Numerical(format!(
                "covariance matrix is singular (eigenvalue {lam:e}); cannot whiten"
            )));
        }
        col /= lam.sqrt().sqrt();
    }
    Ok(&scaled * scaled.transpose())
}

/// Solves `m x = rhs` for symmetric positive-definite `m`.
pub(crate) fn solve_spd<T: Real>(m: &DMatrix<T>, rhs: &DVector<T>) -> Option<DVector<T>> {
    m.clone().cholesky().map(|c| c.solve(rhs))
}

pub(crate) fn inverse_spd<T: Real>(m: &DMatrix<T>) -> Option<DMatrix<T>> {
    m.clone().cholesky().map(|c| c.inverse())
}

/// Ordinary least squares `argmin ‖y − xβ‖²` through an SVD.
///
/// Fails with [`Error::RankDeficient`] when the smallest singular value is below
/// `1e-10` times the largest; the reported columns are those carrying weight in
/// the offending right singular vector (positions within `x`).
pub(crate) fn least_squares<T: Real>(x: &DMatrix<T>, y: &DVector<T>) -> Result<DVector<T>> {
    if x.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    if x.ncols() > x.nrows() {
        return Err(Error::RankDeficient {
            columns: (0..x.ncols()).collect(),
        });
    }
    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let (imin, smin) = sv.argmin();
    if !(smin > smax * T::lit(1e-10)) {
        let v_t = svd.v_t.as_ref().expect("requested V");
        let null = v_t.row(imin);
        let columns = null
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > T::lit(0.1))
            .map(|(j, _)| j)
            .collect();
        return Err(Error::RankDeficient { columns });
    }
    svd.solve(y, T::zero()).map_err(|e| Error::Numerical(e.to_string()))
}

/// Orthogonal projector `Σ⁺Σ` onto the row space of `sigma`, treating singular
/// values below `rel_tol · σ_max` as zero.
pub(crate) fn row_space_projector<T: Real>(sigma: &DMatrix<T>, rel_tol: T) -> DMatrix<T> {
    let svd = sigma.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let mut proj = DMatrix::zeros(sigma.ncols(), sigma.ncols());
    if smax <= T::zero() {
        return proj;
    }
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s >= smax * rel_tol {
            let v = v_t.row(i).transpose();
            proj += &v * v.transpose();
        }
    }
    proj
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn inv_sqrt_squares_to_inverse() {
        let m = dmatrix![4.0, 1.0; 1.0, 3.0];
        let r = inv_sqrt_sym(&m).unwrap();
        let prod = &r * &m * &r;
        assert!((prod - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn least_squares_flags_collinear_columns() {
        let x = dmatrix![1.0, 2.0, 0.5; 2.0, 4.0, -1.0; 3.0, 6.0, 0.0; 1.0, 2.0, 1.0];
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        match least_squares(&x, &y) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec![0, 1]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn projector_of_full_column_rank_is_identity() {
        let s = dmatrix![1.0, 0.2; 0.3, 1.0; 0.5, -0.4];
        let p = row_space_projector(&s, 1e-8);
        assert!((p - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }
}
