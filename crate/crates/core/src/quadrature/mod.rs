//! Numerical evaluation of `T(f, A, b)`, `L^p` norms, `Φ` and the deficit for functions
//! outside the closed-form class.

mod function;
mod grid;

use serde::{Deserialize, Serialize};

pub(crate) use function::CompiledGp;
pub use function::{Envelope, EvaluableFunction, ENVELOPE_CHECKS};
pub use grid::NormGrid;
pub(crate) use grid::{integrate_single, PairPoint};

use crate::error::{invalid, Error, Result};
use crate::gausspoly::{lp_norm_closed, trilinear_closed, GaussianPolynomial};
use crate::group::{optimal_constant, AttachedParams, ExponentTriple};
use crate::linalg::{RMat, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeKind {
    GaussHermite,
    MonteCarlo,
}

/// How integrals over `ℝ^{2(2d+1)}` and `ℝ^{2d+1}` are discretized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureScheme {
    pub kind: SchemeKind,
    pub nodes_per_axis: usize,
    pub samples: usize,
    pub seed: u64,
    /// Evaluate chunks on the rayon pool; chunk sums are reduced in a fixed order.
    pub parallel: bool,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        Self { kind: SchemeKind::GaussHermite, nodes_per_axis: 40, samples: 1_000_000, seed: 1, parallel: true }
    }
}

impl QuadratureScheme {
    pub const MIN_NODES: usize = 10;
    pub const MAX_NODES: usize = 200;
    pub const MIN_SAMPLES: usize = 10_000;

    pub fn gauss_hermite(nodes_per_axis: usize) -> Result<Self> {
        let s = Self { kind: SchemeKind::GaussHermite, nodes_per_axis, ..Self::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Result<Self> {
        let s = Self { kind: SchemeKind::MonteCarlo, samples, seed, ..Self::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SchemeKind::GaussHermite if !(Self::MIN_NODES..=Self::MAX_NODES).contains(&self.nodes_per_axis) => {
                Err(invalid(format!("Gauss–Hermite nodes per axis must be in [10, 200], got {}", self.nodes_per_axis)))
            }
            SchemeKind::MonteCarlo if self.samples < Self::MIN_SAMPLES => {
                Err(invalid(format!("Monte Carlo needs at least 10^4 samples, got {}", self.samples)))
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn method(&self) -> Method {
        match self.kind {
            SchemeKind::GaussHermite => Method::GaussHermite { nodes: self.nodes_per_axis },
            SchemeKind::MonteCarlo => Method::MonteCarlo { samples: self.samples },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Method {
    ClosedForm,
    GaussHermite { nodes: usize },
    MonteCarlo { samples: usize },
}

/// A complex value with an error estimate: the half-node gap for Gauss–Hermite, the
/// standard error for Monte Carlo.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrilinearResult {
    pub value: C64,
    pub error: f64,
    pub method: Method,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhiEstimate {
    pub value: f64,
    pub error: f64,
    pub trilinear: TrilinearResult,
    pub norms: [NormEstimate; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeficitEstimate {
    pub deficit: f64,
    pub error: f64,
    pub phi: PhiEstimate,
    /// Set when the deficit is below `−3·error`, i.e. Young's inequality appears broken.
    pub young_violation: bool,
}

fn check_triple(f: [&EvaluableFunction; 3], params: &AttachedParams) -> Result<usize> {
    let n = f[0].dim();
    if f.iter().any(|g| g.dim() != n) {
        return Err(invalid("the three functions must share their dimension"));
    }
    if n % 2 == 0 || n < 3 {
        return Err(invalid(format!("functions must live on ℝ^(2d+1), got dimension {n}")));
    }
    let d = (n - 1) / 2;
    if params.a.nrows() != 2 * d {
        return Err(invalid(format!("A must be {0}x{0} for functions on ℝ^{n}", 2 * d)));
    }
    if d > 2 {
        return Err(Error::Unsupported(format!("quadrature supports d ≤ 2, got d = {d}")));
    }
    Ok(d)
}

/// Integrates `integrand` over pair space on the grid adapted to `f` and `A`.
pub(crate) fn pair_integrals<const K: usize, F>(
    f: [&EvaluableFunction; 3],
    params: &AttachedParams,
    scheme: &QuadratureScheme,
    integrand: F,
) -> Result<[(C64, f64); K]>
where
    F: Fn(&PairPoint) -> [C64; K] + Sync,
{
    scheme.validate()?;
    check_triple(f, params)?;
    let tr = grid::PairTransform::new([f[0].envelope(), f[1].envelope(), f[2].envelope()], &params.a)?;
    let est = grid::integrate_pairs(&tr, scheme, integrand)?;
    Ok(est.map(|e| (e.value, e.error)))
}

/// `T(f, A, b) = ∬ f1(z1) f2(z2) f3(−z1−z2−e·β) e^{ibβ}`, `β = σ(Ax1, Ax2)`.
pub fn eval_trilinear(
    f: [&EvaluableFunction; 3],
    params: &AttachedParams,
    scheme: &QuadratureScheme,
) -> Result<TrilinearResult> {
    check_triple(f, params)?;
    if f.iter().any(|g| g.envelope().amplitude == 0.0) {
        return Ok(TrilinearResult { value: C64::new(0.0, 0.0), error: 0.0, method: scheme.method() });
    }
    let b = params.b;
    let [(value, error)] = pair_integrals(f, params, scheme, |p| {
        let v = f[0].eval(p.z1) * f[1].eval(p.z2) * f[2].eval(p.z3);
        [if b != 0.0 { v * C64::from_polar(1.0, b * p.beta) } else { v }]
    })?;
    Ok(TrilinearResult { value, error, method: scheme.method() })
}

/// `(∫|f|^p)^{1/p}` by quadrature.
pub fn lp_norm(f: &EvaluableFunction, p: f64, scheme: &QuadratureScheme) -> Result<NormEstimate> {
    if !(p >= 1.0) {
        return Err(invalid(format!("L^p norm needs p ≥ 1, got {p}")));
    }
    scheme.validate()?;
    let env = f.envelope();
    if env.amplitude == 0.0 {
        return Ok(NormEstimate { value: 0.0, error: 0.0 });
    }
    let rate = &env.rate * p;
    let est = grid::integrate_single(&rate, &env.center, scheme, |z| f.eval(z).norm().powf(p))?;
    let integral = est.value.re.max(0.0);
    let value = integral.powf(1.0 / p);
    let error = if integral > 0.0 { value * est.error / (p * integral) } else { est.error.powf(1.0 / p) };
    Ok(NormEstimate { value, error })
}

/// Closed form for pure Gaussians, quadrature otherwise.
pub fn norm_estimate(f: &EvaluableFunction, p: f64, scheme: &QuadratureScheme) -> Result<NormEstimate> {
    if let Some(g) = f.closed_form() {
        if g.is_pure_gaussian() {
            return Ok(NormEstimate { value: lp_norm_closed(g, p)?, error: 0.0 });
        }
        if g.is_zero() {
            return Ok(NormEstimate { value: 0.0, error: 0.0 });
        }
    }
    lp_norm(f, p, scheme)
}

pub(crate) fn phi_from_parts(trilinear: TrilinearResult, norms: [NormEstimate; 3]) -> Result<PhiEstimate> {
    if norms.iter().any(|n| n.value <= 0.0) {
        return Err(invalid("Φ is undefined for a function of zero norm"));
    }
    let prod: f64 = norms.iter().map(|n| n.value).product();
    let value = trilinear.value.norm() / prod;
    let rel_t = if trilinear.value.norm() > 0.0 { trilinear.error / trilinear.value.norm() } else { 0.0 };
    let error = value * (rel_t + norms.iter().map(|n| n.error / n.value).sum::<f64>())
        + if trilinear.value.norm() == 0.0 { trilinear.error / prod } else { 0.0 };
    Ok(PhiEstimate { value, error, trilinear, norms })
}

/// `Φ = |T| / ∏‖f_j‖_{p_j}` with first-order error propagation.
pub fn phi(
    f: [&EvaluableFunction; 3],
    p: &ExponentTriple,
    params: &AttachedParams,
    scheme: &QuadratureScheme,
) -> Result<PhiEstimate> {
    let pp = p.p();
    let norms = [
        norm_estimate(f[0], pp[0], scheme)?,
        norm_estimate(f[1], pp[1], scheme)?,
        norm_estimate(f[2], pp[2], scheme)?,
    ];
    if norms.iter().any(|n| n.value <= 0.0) {
        return Err(invalid("Φ is undefined for a function of zero norm"));
    }
    phi_from_parts(eval_trilinear(f, params, scheme)?, norms)
}

pub(crate) fn deficit_from_phi(phi: PhiEstimate, p: &ExponentTriple, n: usize) -> Result<DeficitEstimate> {
    let ap = optimal_constant(p, n)?;
    let deficit = 1.0 - phi.value / ap;
    let error = phi.error / ap;
    Ok(DeficitEstimate { deficit, error, young_violation: deficit < -3.0 * error, phi })
}

/// `δ = 1 − Φ / A_p^{2d+1}`.
pub fn deficit(
    f: [&EvaluableFunction; 3],
    p: &ExponentTriple,
    params: &AttachedParams,
    scheme: &QuadratureScheme,
) -> Result<DeficitEstimate> {
    let est = phi(f, p, params, scheme)?;
    deficit_from_phi(est, p, f[0].dim())
}

/// True when `AᵀJA = 0`, so that `T` has neither shift nor twist.
pub fn is_euclidean(a: &RMat) -> bool {
    crate::group::symplectic_gram(a).iter().all(|v| *v == 0.0)
}

/// `Φ` for Gaussian-polynomial inputs: `T` in closed form when `AᵀJA = 0`, norms in closed
/// form for pure Gaussians, quadrature for everything else.
pub fn phi_gauss_poly(
    f: &[GaussianPolynomial; 3],
    p: &ExponentTriple,
    params: &AttachedParams,
    scheme: &QuadratureScheme,
) -> Result<PhiEstimate> {
    let pp = p.p();
    let ev = [
        EvaluableFunction::from_gauss_poly(&f[0])?,
        EvaluableFunction::from_gauss_poly(&f[1])?,
        EvaluableFunction::from_gauss_poly(&f[2])?,
    ];
    let norms = [
        norm_estimate(&ev[0], pp[0], scheme)?,
        norm_estimate(&ev[1], pp[1], scheme)?,
        norm_estimate(&ev[2], pp[2], scheme)?,
    ];
    if norms.iter().any(|n| n.value <= 0.0) {
        return Err(invalid("Φ is undefined for a function of zero norm"));
    }
    let trilinear = if is_euclidean(&params.a) {
        let t = trilinear_closed(&f[0], &f[1], &f[2], &params.a, 0.0, (0, 0))?;
        TrilinearResult { value: t.value, error: 1e-14 * t.value.norm(), method: Method::ClosedForm }
    } else {
        eval_trilinear([&ev[0], &ev[1], &ev[2]], params, scheme)?
    };
    phi_from_parts(trilinear, norms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::standard_gaussians;
    use crate::linalg::RVec;

    fn gaussians() -> [EvaluableFunction; 3] {
        let g = standard_gaussians(&ExponentTriple::symmetric(), 3).unwrap();
        [0, 1, 2].map(|j| EvaluableFunction::from_gauss_poly(&g[j]).unwrap())
    }

    #[test]
    fn scheme_ranges() {
        assert!(QuadratureScheme::gauss_hermite(9).is_err());
        assert!(QuadratureScheme::gauss_hermite(201).is_err());
        assert!(QuadratureScheme::monte_carlo(9_999, 0).is_err());
        assert!(QuadratureScheme::monte_carlo(10_000, 0).is_ok());
    }

    #[test]
    fn euclidean_gaussians_match_closed_form() {
        let f = gaussians();
        let g = standard_gaussians(&ExponentTriple::symmetric(), 3).unwrap();
        let exact = trilinear_closed(&g[0], &g[1], &g[2], &RMat::zeros(2, 2), 0.0, (0, 0)).unwrap().value;
        let scheme = QuadratureScheme::gauss_hermite(12).unwrap();
        let t = eval_trilinear([&f[0], &f[1], &f[2]], &AttachedParams::euclidean(1), &scheme).unwrap();
        assert!((t.value - exact).norm() <= 3.0 * t.error, "{} vs {exact} ± {}", t.value, t.error);
    }

    #[test]
    fn heisenberg_gaussians_fall_strictly_below_euclidean() {
        let f = gaussians();
        let g = standard_gaussians(&ExponentTriple::symmetric(), 3).unwrap();
        let exact = trilinear_closed(&g[0], &g[1], &g[2], &RMat::zeros(2, 2), 0.0, (0, 0)).unwrap().value;
        let scheme = QuadratureScheme::gauss_hermite(16).unwrap();
        let t = eval_trilinear([&f[0], &f[1], &f[2]], &AttachedParams::heisenberg(1), &scheme).unwrap();
        assert!(t.value.norm() + 3.0 * t.error < exact.norm());
    }

    #[test]
    fn zero_third_function_gives_zero() {
        let f = gaussians();
        let z = EvaluableFunction::zero(3);
        let t = eval_trilinear([&f[0], &f[1], &z], &AttachedParams::heisenberg(1), &QuadratureScheme::default()).unwrap();
        assert_eq!(t.value, C64::new(0.0, 0.0));
    }

    #[test]
    fn quadrature_norm_matches_closed_form() {
        let g = GaussianPolynomial::isotropic(3, 2.0).modulate(&RVec::from_vec(vec![0.5, 0.0, 1.0])).unwrap();
        let f = EvaluableFunction::from_gauss_poly(&g).unwrap();
        let q = lp_norm(&f, 1.5, &QuadratureScheme::gauss_hermite(20).unwrap()).unwrap();
        let c = lp_norm_closed(&g, 1.5).unwrap();
        assert!((q.value - c).abs() < 1e-6 * c);
        let mc = lp_norm(&f, 1.5, &QuadratureScheme::monte_carlo(20_000, 3).unwrap()).unwrap();
        assert!((mc.value - c).abs() <= 4.0 * mc.error + 1e-12);
    }

    #[test]
    fn dimension_guard() {
        let g = GaussianPolynomial::isotropic(7, 1.0);
        let f = EvaluableFunction::from_gauss_poly(&g).unwrap();
        let r = eval_trilinear([&f, &f, &f], &AttachedParams::heisenberg(3), &QuadratureScheme::default());
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let f = gaussians();
        let params = AttachedParams { a: RMat::identity(2, 2), b: 0.7 };
        let s = QuadratureScheme::gauss_hermite(12).unwrap();
        let a = eval_trilinear([&f[0], &f[1], &f[2]], &params, &s).unwrap();
        let b = eval_trilinear([&f[0], &f[1], &f[2]], &params, &s.sequential()).unwrap();
        assert_eq!(a.value, b.value);
        let m = QuadratureScheme::monte_carlo(20_000, 5).unwrap();
        let a = eval_trilinear([&f[0], &f[1], &f[2]], &params, &m).unwrap();
        let b = eval_trilinear([&f[0], &f[1], &f[2]], &params, &m.sequential()).unwrap();
        assert_eq!(a.value, b.value);
    }
}
