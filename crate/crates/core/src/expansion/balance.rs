//! Moves a near-extremal triple along its orbit until the orthogonality conditions hold.

use serde::Serialize;

use super::hermite::{orthogonality_residuals, OrthogonalityResidual};
use crate::error::{Error, Result};
use crate::gausspoly::GaussianPolynomial;
use crate::group::{standard_gaussians, AttachedParams, ExponentTriple, HPoint};
use crate::linalg::{n_upper, sym_from_upper, RMat, RVec, C64};
use crate::optim::{gauss_newton, GaussNewtonConfig};
use crate::quadrature::{lp_norm, EvaluableFunction, QuadratureScheme};
use crate::symmetry::{apply, normalize_entry, SymmetryGen, SymmetryWord, Triple};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BalanceConfig {
    pub max_iterations: usize,
    pub tol: f64,
    pub fd_step: f64,
    /// Largest `max_j ‖f_j − g_j‖_{p_j}` accepted after normalization.
    pub regime: f64,
    /// Gauss–Hermite nodes per axis for the regime norms.
    pub norm_nodes: usize,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self { max_iterations: 100, tol: 1e-6, fd_step: 1e-5, regime: 0.05, norm_nodes: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BalanceDiagnostics {
    pub iterations: usize,
    pub initial_residual: f64,
    pub residual_inf: f64,
    pub converged: bool,
    /// Numerical rank of the last Jacobian and its singular values.
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub input_distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BalanceOutcome {
    pub triple: Triple,
    pub params: AttachedParams,
    pub word: SymmetryWord,
    /// `(b_j, ζ, α, u_j, K, s, φ)` in that order.
    pub parameters: Vec<f64>,
    pub residuals: OrthogonalityResidual,
    pub diagnostics: BalanceDiagnostics,
}

struct Layout {
    d: usize,
}

impl Layout {
    fn n(&self) -> usize {
        2 * self.d + 1
    }
    fn len(&self) -> usize {
        let d2 = 2 * self.d;
        6 + d2 + 1 + 3 * self.n() + n_upper(d2) + 1 + d2
    }

    /// `TranslateMod → Shear → Dilate → GlAction → ModulateX → ModulateFull → Scale`.
    fn word(&self, x: &[f64]) -> SymmetryWord {
        let d2 = 2 * self.d;
        let n = self.n();
        let mut at = 0;
        let mut take = |k: usize| {
            let s = &x[at..at + k];
            at += k;
            s
        };
        let b = take(6).to_vec();
        let zeta = RVec::from_row_slice(take(d2));
        let alpha = take(1)[0];
        let u: Vec<HPoint> = (0..3)
            .map(|_| {
                let v = take(n);
                HPoint { x: RVec::from_row_slice(&v[..d2]), t: v[d2] }
            })
            .collect();
        let k = sym_from_upper(d2, take(n_upper(d2)));
        let s = take(1)[0];
        let phi = RVec::from_row_slice(take(d2));
        let mut mt = RVec::zeros(n);
        mt[n - 1] = alpha;
        SymmetryWord::new(vec![
            SymmetryGen::TranslateMod([u[0].clone(), u[1].clone(), u[2].clone()]),
            SymmetryGen::Shear(phi),
            SymmetryGen::Dilate(s.exp()),
            SymmetryGen::GlAction(RMat::identity(d2, d2) + k),
            SymmetryGen::ModulateX(zeta),
            SymmetryGen::ModulateFull(mt),
            SymmetryGen::Scale([0, 1, 2].map(|j| C64::new(1.0 + b[2 * j], b[2 * j + 1]))),
        ])
    }
}

fn differences(h: &Triple, g: &Triple) -> Result<Triple> {
    Ok([h[0].sub(&g[0])?, h[1].sub(&g[1])?, h[2].sub(&g[2])?])
}

/// `max_j ‖f_j‖_{p_j}` by quadrature.
pub fn max_norm(f: &Triple, p: &ExponentTriple, nodes: usize) -> Result<f64> {
    let scheme = QuadratureScheme::gauss_hermite(nodes)?;
    let pp = p.p();
    let mut m: f64 = 0.0;
    for j in 0..3 {
        if f[j].is_zero() {
            continue;
        }
        let e = EvaluableFunction::from_gauss_poly(&f[j])?;
        m = m.max(lp_norm(&e, pp[j], &scheme)?.value);
    }
    Ok(m)
}

/// Gauss–Newton on `(b_j, ζ, α, u_j, K, s, φ) ↦ orthogonality residuals of h − g`, starting
/// from zero parameters in the normalized chart of `(f, A, b)`.
pub fn balance(f: &Triple, p: &ExponentTriple, params: &AttachedParams, cfg: &BalanceConfig) -> Result<BalanceOutcome> {
    let d = params.d();
    let n = 2 * d + 1;
    let entry = normalize_entry(f, params)?;
    let g: Triple = standard_gaussians(p, n)?;
    let input_distance = max_norm(&differences(&entry.triple, &g)?, p, cfg.norm_nodes)?;
    if !(input_distance <= cfg.regime) {
        return Err(Error::BalanceFailed {
            iterations: 0,
            residual: f64::NAN,
            reason: format!("input is {input_distance:.3e} from g, outside the regime {:.3e}", cfg.regime),
        });
    }
    let layout = Layout { d };
    let chart = entry.params.clone();
    let image = |x: &[f64]| -> Result<(Triple, AttachedParams)> { apply(&layout.word(x), &entry.triple, &chart) };
    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let (h, _) = image(x)?;
        Ok(orthogonality_residuals(&differences(&h, &g)?, p)?.values())
    };
    let x0 = vec![0.0; layout.len()];
    let initial_residual = residual(&x0)?.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let gn = GaussNewtonConfig { max_iterations: cfg.max_iterations, tol: cfg.tol, fd_step: cfg.fd_step, ..Default::default() };
    let out = gauss_newton(residual, &x0, &gn)?;
    if !out.converged {
        return Err(Error::BalanceFailed {
            iterations: out.iterations,
            residual: out.residual_inf,
            reason: format!("Jacobian rank {} of {} conditions", out.rank, super::hermite::index_set(n).len()),
        });
    }
    let word = layout.word(&out.x);
    let (triple, new_params) = image(&out.x)?;
    let residuals = orthogonality_residuals(&differences(&triple, &g)?, p)?;
    Ok(BalanceOutcome {
        triple,
        params: new_params,
        word,
        parameters: out.x,
        residuals,
        diagnostics: BalanceDiagnostics {
            iterations: out.iterations,
            initial_residual,
            residual_inf: out.residual_inf,
            converged: true,
            rank: out.rank,
            singular_values: out.singular_values,
            input_distance,
        },
    })
}

/// `g_j + mode` helper used by experiments: `g + ε·P_α g` for every `j`.
pub fn perturbed_gaussians(p: &ExponentTriple, n: usize, eps: f64, alpha: &[u32]) -> Result<Triple> {
    let g = standard_gaussians(p, n)?;
    let mut out: Vec<GaussianPolynomial> = Vec::with_capacity(3);
    for (j, gj) in g.iter().enumerate() {
        out.push(gj.add(&super::hermite::mode(p, j, alpha)?.scale(C64::new(eps, 0.0)))?);
    }
    Ok([out[0].clone(), out[1].clone(), out[2].clone()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gausspoly::Poly;
    use rand::{Rng, SeedableRng};

    #[test]
    fn gaussians_are_already_balanced() {
        let p = ExponentTriple::symmetric();
        let g = standard_gaussians(&p, 3).unwrap();
        let out = balance(&g, &p, &AttachedParams::heisenberg(1), &BalanceConfig::default()).unwrap();
        assert_eq!(out.diagnostics.iterations, 0);
        assert!(out.parameters.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_tilt_is_absorbed() {
        let p = ExponentTriple::symmetric();
        let g = standard_gaussians(&p, 3).unwrap();
        let tilt = Poly::linear(&[0.01, 0.0, 0.0], 1.0);
        let f = g.clone().map(|gj| gj.mul_poly(&tilt).unwrap());
        let out = balance(&f, &p, &AttachedParams::heisenberg(1), &BalanceConfig::default()).unwrap();
        assert!(out.diagnostics.initial_residual > 1e-4);
        assert!(out.residuals.inf_norm() <= 1e-6, "{:?}", out.diagnostics);
    }

    #[test]
    fn high_modes_need_no_balancing() {
        let p = ExponentTriple::symmetric();
        let f = perturbed_gaussians(&p, 3, 0.01, &[2, 1, 0]).unwrap();
        let out = balance(&f, &p, &AttachedParams::heisenberg(1), &BalanceConfig::default()).unwrap();
        assert!(out.parameters.iter().all(|v| v.abs() <= 1e-4));
    }

    #[test]
    fn far_inputs_are_rejected() {
        let p = ExponentTriple::symmetric();
        let g = standard_gaussians(&p, 3).unwrap();
        let f = g.clone().map(|gj| gj.scale(C64::new(1.5, 0.0)));
        assert!(matches!(
            balance(&f, &p, &AttachedParams::heisenberg(1), &BalanceConfig::default()),
            Err(Error::BalanceFailed { .. })
        ));
    }

    #[test]
    fn random_small_perturbations_converge_without_blow_up() {
        let p = ExponentTriple::symmetric();
        let g = standard_gaussians(&p, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let f: Triple = g.clone().map(|gj| {
                let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let q = Poly::linear(&c, rng.gen_range(-1.0..1.0))
                    .add(&Poly::monomial(3, vec![0, 1, 1], C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
                let pert = gj.mul_poly(&q).unwrap();
                let norm = crate::gausspoly::lp_norm_closed(&gj, 1.5).unwrap();
                let scale = 0.01 / max_norm(&[pert.clone(), GaussianPolynomial::zero(3), GaussianPolynomial::zero(3)], &p, 16).unwrap().max(1e-12);
                let _ = norm;
                gj.add(&pert.scale(C64::new(scale, 0.0))).unwrap()
            });
            let out = balance(&f, &p, &AttachedParams::heisenberg(1), &BalanceConfig::default()).unwrap();
            assert!(out.diagnostics.iterations <= 30, "{:?}", out.diagnostics);
            let after = max_norm(&differences(&out.triple, &g).unwrap(), &p, 16).unwrap();
            assert!(after <= 2.0 * out.diagnostics.input_distance, "{after} vs {}", out.diagnostics.input_distance);
        }
    }
}
