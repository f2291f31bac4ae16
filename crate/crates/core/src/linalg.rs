//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// The standard symplectic matrix `[[0, I_d], [-I_d, 0]]` of size `2d`.
pub fn j_matrix(d: usize) -> RMat {
    let mut j = RMat::zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, i + d)] = 1.0;
        j[(i + d, i)] = -1.0;
    }
    j
}

/// Largest singular value.
pub fn spectral_norm(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |a, &s| a.max(s))
}

pub fn symmetrize(m: &RMat) -> RMat {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize_c(m: &CMat) -> CMat {
    (m + m.transpose()) * C64::new(0.5, 0.0)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

pub fn re(m: &CMat) -> RMat {
    m.map(|v| v.re)
}

pub fn im(m: &CMat) -> RMat {
    m.map(|v| v.im)
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue(m: &RMat) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v))
}

/// Lower Cholesky factor, or a domain error when `m` is not positive definite.
pub fn cholesky_lower(m: &RMat) -> Result<RMat> {
    symmetrize(m)
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Domain("matrix is not positive definite".into()))
}

/// Whitening factor `W = L^{-T}` for `m = L Lᵀ`, so that `(Wy)ᵀ m (Wy) = |y|²`.
pub fn whitening(m: &RMat) -> Result<(RMat, f64)> {
    let l = cholesky_lower(m)?;
    let det_l: f64 = l.diagonal().iter().product();
    let inv_lt = l
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular Cholesky factor".into()))?;
    Ok((inv_lt, det_l))
}

pub fn inverse_c(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular complex matrix".into()))
}

/// `det(Q)^{-1/2}` for complex symmetric `Q` with positive definite real part, on the
/// branch reached continuously from `Re(Q)` along `Re(Q) + i s Im(Q)`, `s ∈ [0, 1]`.
///
/// With `Re(Q) = C Cᵀ` and `C⁻¹ Im(Q) C⁻ᵀ` having eigenvalues `μ_k`, the path determinant
/// is `det Re(Q) · ∏ (1 + i s μ_k)`; every factor stays in the right half plane, so the
/// principal square root of each factor is continuous along the path.
pub fn det_inv_sqrt_continuous(q: &CMat) -> Result<C64> {
    let r = symmetrize(&re(q));
    let s = symmetrize(&im(q));
    let c = cholesky_lower(&r).map_err(|_| {
        Error::Domain("real part of the quadratic form is not positive definite".into())
    })?;
    let det_r_sqrt: f64 = c.diagonal().iter().product();
    let c_inv = c
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular real part".into()))?;
    let m = &c_inv * &s * c_inv.transpose();
    let mu = symmetrize(&m).symmetric_eigen().eigenvalues;
    let mut out = C64::new(1.0 / det_r_sqrt, 0.0);
    for &v in mu.iter() {
        out /= C64::new(1.0, v).sqrt();
    }
    Ok(out)
}

/// Ratio of extreme singular values.
pub fn condition_number_c(q: &CMat) -> f64 {
    let sv = q.clone().svd(false, false).singular_values;
    let max = sv.iter().fold(0.0_f64, |a, &v| a.max(v));
    let min = sv.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn check_square(m: &RMat, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(invalid(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Symmetric matrix from its upper-triangular entries in row-major order.
pub fn sym_from_upper(k: usize, params: &[f64]) -> RMat {
    let mut m = RMat::zeros(k, k);
    let mut idx = 0;
    for i in 0..k {
        for j in i..k {
            m[(i, j)] = params[idx];
            m[(j, i)] = params[idx];
            idx += 1;
        }
    }
    m
}

pub fn n_upper(k: usize) -> usize {
    k * (k + 1) / 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_is_orthogonal_and_antisymmetric() {
        let j = j_matrix(2);
        assert_eq!(&j.transpose() * &j, RMat::identity(4, 4));
        assert_eq!(j.transpose(), -&j);
    }

    #[test]
    fn det_branch_matches_principal_for_small_imaginary_part() {
        let q = CMat::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(0.0, 0.25), C64::new(0.0, 0.25), C64::new(1.0, 0.0)],
        );
        let det = q.determinant();
        let expected = det.sqrt().inv();
        let got = det_inv_sqrt_continuous(&q).unwrap();
        assert!((got - expected).norm() < 1e-14);
    }

    #[test]
    fn det_branch_is_continuous_past_the_principal_cut() {
        // three factors whose product has argument beyond π
        let z = C64::new(1.0, 3.0);
        let q = CMat::from_diagonal(&CVec::from_vec(vec![z, z, z]));
        let got = det_inv_sqrt_continuous(&q).unwrap();
        let expected = z.sqrt().inv().powi(3);
        assert!((got - expected).norm() < 1e-14);
        // the principal branch of the full determinant differs in sign here
        let principal = q.determinant().sqrt().inv();
        assert!((principal + expected).norm() < 1e-12);
    }
}
