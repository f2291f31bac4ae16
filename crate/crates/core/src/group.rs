//! The `·_A` family of group products on `ℝ^{2d+1}`, exponent bookkeeping and the sharp
//! Young constant.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gausspoly::GaussianPolynomial;
use crate::linalg::{check_square, j_matrix, spectral_norm, RMat, RVec};

/// Tolerance on `Σ 1/p_j = 2`.
pub const ADMISSIBLE_TOL: f64 = 1e-12;

/// Hölder exponents `(p1, p2, p3)`, each in `(1, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTriple {
    p: [f64; 3],
}

impl ExponentTriple {
    pub fn new(p1: f64, p2: f64, p3: f64) -> Result<Self> {
        let p = [p1, p2, p3];
        for (j, &v) in p.iter().enumerate() {
            if !(v.is_finite() && v > 1.0) {
                return Err(invalid(format!("p{} = {v} is not in (1, ∞)", j + 1)));
            }
        }
        Ok(Self { p })
    }

    /// `(3/2, 3/2, 3/2)`.
    pub fn symmetric() -> Self {
        Self { p: [1.5; 3] }
    }

    /// Completes `(p1, p2)` to an admissible triple.
    pub fn complete(p1: f64, p2: f64) -> Result<Self> {
        let r = 2.0 - 1.0 / p1 - 1.0 / p2;
        if !(r > 0.0 && r < 1.0) {
            return Err(invalid(format!("no admissible p3 completes ({p1}, {p2})")));
        }
        Self::new(p1, p2, 1.0 / r)
    }

    pub fn p(&self) -> [f64; 3] {
        self.p
    }

    /// Conjugate exponents `p/(p−1)`.
    pub fn conj(&self) -> [f64; 3] {
        self.p.map(|p| p / (p - 1.0))
    }

    /// Gaussian rates `γ_j = π p_j'`.
    pub fn gamma(&self) -> [f64; 3] {
        self.conj().map(|q| PI * q)
    }

    /// Orthogonality weights `τ_j = p_j p_j' / 2`.
    pub fn tau(&self) -> [f64; 3] {
        let c = self.conj();
        [0, 1, 2].map(|j| self.p[j] * c[j] / 2.0)
    }

    pub fn is_admissible(&self) -> bool {
        (self.p.iter().map(|p| 1.0 / p).sum::<f64>() - 2.0).abs() <= ADMISSIBLE_TOL
    }

    pub fn is_strict_interior(&self) -> bool {
        self.p.iter().all(|&p| p > 1.0 && p < 2.0)
    }

    pub(crate) fn require_admissible(&self) -> Result<()> {
        if !self.is_admissible() {
            return Err(invalid(format!(
                "exponents {:?} are not admissible: Σ1/p = {}",
                self.p,
                self.p.iter().map(|p| 1.0 / p).sum::<f64>()
            )));
        }
        Ok(())
    }
}

/// A point `(x, t)` with `x ∈ ℝ^{2d}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HPoint {
    pub x: RVec,
    pub t: f64,
}

impl HPoint {
    pub fn new(x: RVec, t: f64) -> Result<Self> {
        if x.is_empty() || x.len() % 2 != 0 {
            return Err(invalid(format!("x must have even positive length, got {}", x.len())));
        }
        Ok(Self { x, t })
    }

    pub fn identity(d: usize) -> Self {
        Self { x: RVec::zeros(2 * d), t: 0.0 }
    }

    pub fn d(&self) -> usize {
        self.x.len() / 2
    }

    pub fn inverse(&self) -> Self {
        Self { x: -&self.x, t: -self.t }
    }

    /// Coordinates as a single vector `(x, t)`.
    pub fn to_vec(&self) -> RVec {
        let mut v = RVec::zeros(self.x.len() + 1);
        v.rows_mut(0, self.x.len()).copy_from(&self.x);
        v[self.x.len()] = self.t;
        v
    }
}

/// The attached parameters `(A, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttachedParams {
    pub a: RMat,
    pub b: f64,
}

impl AttachedParams {
    pub fn new(a: RMat, b: f64) -> Result<Self> {
        check_square(&a, "A")?;
        if a.nrows() == 0 || a.nrows() % 2 != 0 {
            return Err(invalid(format!("A must be 2d×2d, got {}x{}", a.nrows(), a.ncols())));
        }
        if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(invalid("attached parameters must be finite"));
        }
        Ok(Self { a, b })
    }

    /// `(Id, 0)`: the Heisenberg group itself.
    pub fn heisenberg(d: usize) -> Self {
        Self { a: RMat::identity(2 * d, 2 * d), b: 0.0 }
    }

    /// `(0, 0)`: Euclidean convolution.
    pub fn euclidean(d: usize) -> Self {
        Self { a: RMat::zeros(2 * d, 2 * d), b: 0.0 }
    }

    pub fn d(&self) -> usize {
        self.a.nrows() / 2
    }
}

/// `σ(x, y) = xᵀJy`.
pub fn symplectic(x: &RVec, y: &RVec) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() || x.len() % 2 != 0 {
        return Err(invalid(format!("symplectic form needs equal even lengths, got {} and {}", x.len(), y.len())));
    }
    let d = x.len() / 2;
    Ok((0..d).map(|j| x[j] * y[j + d] - x[j + d] * y[j]).sum())
}

/// `AᵀJA`, the only way the group product depends on `A`.
pub fn symplectic_gram(a: &RMat) -> RMat {
    if a.is_empty() {
        return RMat::zeros(0, 0);
    }
    a.transpose() * j_matrix(a.nrows() / 2) * a
}

/// `(x1 + x2, t1 + t2 + σ(Ax1, Ax2))`.
pub fn group_mul(z1: &HPoint, z2: &HPoint, a: &RMat) -> Result<HPoint> {
    if z1.x.len() != z2.x.len() || a.nrows() != z1.x.len() || a.ncols() != z1.x.len() {
        return Err(invalid("group_mul dimension mismatch"));
    }
    let s = symplectic(&(a * &z1.x), &(a * &z2.x))?;
    Ok(HPoint { x: &z1.x + &z2.x, t: z1.t + z2.t + s })
}

/// `A_p^n = (∏ p_j^{1/(2p_j)} / p_j'^{1/(2p_j')})^n`.
pub fn optimal_constant(p: &ExponentTriple, n: usize) -> Result<f64> {
    p.require_admissible()?;
    if n == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let q = p.conj();
    let log_a: f64 = (0..3)
        .map(|j| p.p[j].ln() / (2.0 * p.p[j]) - q[j].ln() / (2.0 * q[j]))
        .sum();
    Ok((log_a * n as f64).exp())
}

/// `g_j(z) = exp(−γ_j |z|²)` on `ℝⁿ`.
pub fn standard_gaussians(p: &ExponentTriple, n: usize) -> Result<[GaussianPolynomial; 3]> {
    p.require_admissible()?;
    Ok(p.gamma().map(|g| GaussianPolynomial::isotropic(n, g)))
}

/// Spectral norm of `AᵀJA`.
pub fn symplectic_defect_norm(a: &RMat) -> Result<f64> {
    check_square(a, "A")?;
    if a.nrows() % 2 != 0 {
        return Err(invalid("A must have even size"));
    }
    Ok(spectral_norm(&symplectic_gram(a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gausspoly::{lp_norm_closed, trilinear_closed};

    fn pt(x: &[f64], t: f64) -> HPoint {
        HPoint::new(RVec::from_row_slice(x), t).unwrap()
    }

    #[test]
    fn symplectic_examples() {
        let e1 = RVec::from_vec(vec![1.0, 0.0]);
        let e2 = RVec::from_vec(vec![0.0, 1.0]);
        assert_eq!(symplectic(&e1, &e2).unwrap(), 1.0);
        let x = RVec::from_vec(vec![2.0, 3.0]);
        assert_eq!(symplectic(&x, &x).unwrap(), 0.0);
        assert_eq!(symplectic(&x, &RVec::from_vec(vec![5.0, 7.0])).unwrap(), -1.0);
        assert!(symplectic(&x, &RVec::zeros(4)).is_err());
    }

    #[test]
    fn group_mul_examples() {
        let z = group_mul(&pt(&[1.0, 0.0], 3.0), &pt(&[0.0, 1.0], 4.0), &RMat::zeros(2, 2)).unwrap();
        assert_eq!(z, pt(&[1.0, 1.0], 7.0));
        let z = group_mul(&pt(&[1.0, 0.0], 0.0), &pt(&[0.0, 1.0], 0.0), &RMat::identity(2, 2)).unwrap();
        assert_eq!(z, pt(&[1.0, 1.0], 1.0));
        let a = RMat::from_row_slice(2, 2, &[0.3, -1.2, 2.0, 0.7]);
        let z = pt(&[0.4, -2.5], 1.25);
        assert_eq!(group_mul(&z, &z.inverse(), &a).unwrap(), HPoint::identity(1));
    }

    #[test]
    fn optimal_constant_examples() {
        let p = ExponentTriple::symmetric();
        assert!((optimal_constant(&p, 1).unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((optimal_constant(&p, 3).unwrap() - 3.0 * 3f64.sqrt() / 8.0).abs() < 1e-15);
        let bad = ExponentTriple::new(1.5, 1.5, 1.6).unwrap();
        assert!(optimal_constant(&bad, 1).is_err());
    }

    #[test]
    fn optimal_constant_below_one_on_a_scan() {
        for i in 1..40 {
            for k in 1..40 {
                let p1 = 1.0 + i as f64 / 40.0;
                let p2 = 1.0 + k as f64 / 40.0;
                if let Ok(p) = ExponentTriple::complete(p1, p2) {
                    let a = optimal_constant(&p, 1).unwrap();
                    let q = p.conj();
                    let direct: f64 = (0..3)
                        .map(|j| p.p()[j].powf(1.0 / (2.0 * p.p()[j])) / q[j].powf(1.0 / (2.0 * q[j])))
                        .product();
                    assert!((a - direct).abs() < 1e-14);
                    assert!(a < 1.0);
                }
            }
        }
    }

    #[test]
    fn standard_gaussian_examples() {
        let p = ExponentTriple::symmetric();
        assert!(p.gamma().iter().all(|g| (g - 3.0 * PI).abs() < 1e-14));
        let g = standard_gaussians(&p, 1).unwrap();
        let norm = lp_norm_closed(&g[0], 1.5).unwrap();
        assert!((norm - (2f64.sqrt() / 3.0).powf(2.0 / 3.0)).abs() < 1e-14);
        let t = trilinear_closed(&g[0], &g[1], &g[2], &RMat::zeros(0, 0), 0.0, (0, 0)).unwrap();
        let phi = t.value.norm() / norm.powi(3);
        assert!((phi - optimal_constant(&p, 1).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn defect_norm_examples() {
        assert!((symplectic_defect_norm(&RMat::identity(2, 2)).unwrap() - 1.0).abs() < 1e-15);
        let eps = 0.3;
        assert!((symplectic_defect_norm(&(RMat::identity(4, 4) * eps)).unwrap() - eps * eps).abs() < 1e-15);
        assert_eq!(symplectic_defect_norm(&RMat::zeros(2, 2)).unwrap(), 0.0);
        assert!(symplectic_defect_norm(&RMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn exponent_bookkeeping() {
        let p = ExponentTriple::symmetric();
        assert!(p.is_admissible() && p.is_strict_interior());
        assert_eq!(p.conj(), [3.0; 3]);
        assert!(p.tau().iter().all(|t| (t - 2.25).abs() < 1e-15));
        assert!(ExponentTriple::new(1.0, 2.0, 2.0).is_err());
        let q = ExponentTriple::new(2.0, 2.0, 1.0 + 1e-9);
        assert!(q.is_ok());
    }
}
