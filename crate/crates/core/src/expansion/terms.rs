//! The sharp/flat split and the group-shift and twist difference terms.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::gausspoly::{trilinear_closed, GaussianPolynomial, Poly};
use crate::group::{symplectic_gram, AttachedParams, ExponentTriple};
use crate::linalg::{spectral_norm, RMat, RVec, C64};
use crate::quadrature::{is_euclidean, pair_integrals, CompiledGp, EvaluableFunction, Method, QuadratureScheme};

pub const DEFAULT_ETA: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct SharpFlatSplit {
    pub sharp: EvaluableFunction,
    pub flat: EvaluableFunction,
    pub eta: f64,
}

/// `f♯ = f` where `|f| ≤ η·g`, else 0; `f♭ = f − f♯`.
pub fn sharp_flat_split(f: &EvaluableFunction, g: &GaussianPolynomial, eta: f64) -> Result<SharpFlatSplit> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid(format!("η must be positive, got {eta}")));
    }
    if g.dim() != f.dim() {
        return Err(invalid("f and g must share their dimension"));
    }
    let gc = std::sync::Arc::new(CompiledGp::new(g));
    let keep = {
        let gc = gc.clone();
        move |v: C64, z: &[f64]| v.norm() <= eta * gc.eval(z).norm()
    };
    let (fs, ks) = (f.clone(), keep.clone());
    let sharp = EvaluableFunction::new(
        f.dim(),
        move |z| {
            let v = fs.eval(z);
            if ks(v, z) { v } else { C64::new(0.0, 0.0) }
        },
        f.envelope().clone(),
    )?;
    let ff = f.clone();
    let flat = EvaluableFunction::new(
        f.dim(),
        move |z| {
            let v = ff.eval(z);
            if keep(v, z) { C64::new(0.0, 0.0) } else { v }
        },
        f.envelope().clone(),
    )?;
    Ok(SharpFlatSplit { sharp, flat, eta })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Engine {
    /// Taylor series in the group shift with exact Gaussian integrals per order.
    ClosedForm { max_order: usize },
    Quadrature(QuadratureScheme),
}

impl Default for Engine {
    fn default() -> Self {
        Engine::ClosedForm { max_order: 24 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DifferenceValue {
    pub value: C64,
    pub error: f64,
    pub method: Method,
    /// Series orders summed by the closed-form engine.
    pub orders: usize,
}

impl DifferenceValue {
    fn zero(method: Method) -> Self {
        Self { value: C64::new(0.0, 0.0), error: 0.0, method, orders: 0 }
    }
}

fn closed_inputs<'a>(h: [&'a EvaluableFunction; 3]) -> Result<[&'a GaussianPolynomial; 3]> {
    let get = |f: &'a EvaluableFunction| {
        f.closed_form()
            .ok_or_else(|| Error::Unsupported("the closed-form engine needs Gaussian-polynomial inputs".into()))
    };
    Ok([get(h[0])?, get(h[1])?, get(h[2])?])
}

/// `Σ_k (−1)^k/k! ∬ h1 h2 (∂_t^k h3)(−z1−z2) β^k`, weighted by `e^{ibβ} − 1` when
/// `twist_only` is set.
fn shift_series(h: [&GaussianPolynomial; 3], a: &RMat, b: f64, twist_only: bool, max_order: usize) -> Result<DifferenceValue> {
    let n = h[0].dim();
    let mut d3 = h[2].clone();
    let mut sum = C64::new(0.0, 0.0);
    let mut fact = 1.0;
    let mut small = 0;
    let mut last = 0.0;
    let mut orders = 0;
    for k in 0..=max_order {
        if k > 0 {
            d3 = d3.derivative(n - 1)?;
            fact *= k as f64;
        }
        let pw = (0, k as u32);
        let term = if twist_only {
            let tw = trilinear_closed(h[0], h[1], &d3, a, b, pw)?.value;
            let un = trilinear_closed(h[0], h[1], &d3, a, 0.0, pw)?.value;
            tw - un
        } else if k == 0 {
            C64::new(0.0, 0.0)
        } else {
            trilinear_closed(h[0], h[1], &d3, a, 0.0, pw)?.value
        };
        let term = term * if k % 2 == 1 { -1.0 / fact } else { 1.0 / fact };
        sum += term;
        orders = k + 1;
        last = term.norm();
        if k >= 2 && last <= 1e-16 * sum.norm() {
            small += 1;
            if small == 2 {
                break;
            }
        } else {
            small = 0;
        }
    }
    Ok(DifferenceValue { value: sum, error: last + 1e-14 * sum.norm(), method: Method::ClosedForm, orders })
}

/// `T′ = ∬ h1 h2 [h3(−z1−z2−e·β) − h3(−z1−z2)]`.
pub fn tprime(h: [&EvaluableFunction; 3], a: &RMat, engine: &Engine) -> Result<DifferenceValue> {
    let params = AttachedParams::new(a.clone(), 0.0)?;
    let method = match engine {
        Engine::ClosedForm { .. } => Method::ClosedForm,
        Engine::Quadrature(s) => s.method(),
    };
    if h[0].dim() % 2 == 0 || h.iter().any(|f| f.dim() != h[0].dim()) || a.nrows() + 1 != h[0].dim() {
        return Err(invalid("functions must share dimension 2d+1 matching A"));
    }
    if is_euclidean(a) {
        return Ok(DifferenceValue::zero(method));
    }
    match engine {
        Engine::ClosedForm { max_order } => shift_series(closed_inputs(h)?, a, 0.0, false, *max_order),
        Engine::Quadrature(scheme) => {
            let [(value, error)] = pair_integrals(h, &params, scheme, |p| {
                [h[0].eval(p.z1) * h[1].eval(p.z2) * (h[2].eval(p.z3) - h[2].eval(p.z3_flat))]
            })?;
            Ok(DifferenceValue { value, error, method, orders: 0 })
        }
    }
}

/// `T″ = ∬ h1 h2 h3(−z1−z2−e·β) (e^{ibβ} − 1)`.
pub fn tdoubleprime(h: [&EvaluableFunction; 3], a: &RMat, b: f64, engine: &Engine) -> Result<DifferenceValue> {
    let params = AttachedParams::new(a.clone(), b)?;
    let method = match engine {
        Engine::ClosedForm { .. } => Method::ClosedForm,
        Engine::Quadrature(s) => s.method(),
    };
    if h[0].dim() % 2 == 0 || h.iter().any(|f| f.dim() != h[0].dim()) || a.nrows() + 1 != h[0].dim() {
        return Err(invalid("functions must share dimension 2d+1 matching A"));
    }
    if b == 0.0 || is_euclidean(a) {
        return Ok(DifferenceValue::zero(method));
    }
    match engine {
        Engine::ClosedForm { max_order } => shift_series(closed_inputs(h)?, a, b, true, *max_order),
        Engine::Quadrature(scheme) => {
            let [(value, error)] = pair_integrals(h, &params, scheme, |p| {
                let tw = C64::from_polar(1.0, b * p.beta) - 1.0;
                [h[0].eval(p.z1) * h[1].eval(p.z2) * h[2].eval(p.z3) * tw]
            })?;
            Ok(DifferenceValue { value, error, method, orders: 0 })
        }
    }
}

/// Second-order data of `T′(g1, g2, g3)` in `‖AᵀJA‖`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftExpansion {
    /// `T′(g) ≈ c2·‖AᵀJA‖²`.
    pub c2: f64,
    /// `(γ1γ3 + γ2γ3)/(γ1γ2 + γ1γ3 + γ2γ3) − 1`, from the `t` integrals.
    pub t_factor: f64,
    /// `∬ g1(x1) g2(x2) g3(x1+x2) σ(Ax1, Ax2)² / ‖AᵀJA‖²`.
    pub x_factor: f64,
    /// `∬ g1(t1) g2(t2) g3(t1+t2)`.
    pub t_mass: f64,
    pub defect: f64,
}

/// Second-order data of `T″(g1, g2, g3)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TwistExpansion {
    /// `T″(g) ≈ c2·b²·‖AᵀJA‖²`.
    pub c2: f64,
    /// `∬ g1 g2 g3(−z1−z2) β`, the coefficient of `ib`.
    pub first_order: C64,
    pub defect: f64,
}

fn gaussians(p: &ExponentTriple, a: &RMat) -> Result<([GaussianPolynomial; 3], f64)> {
    p.require_admissible()?;
    if a.nrows() != a.ncols() || a.nrows() % 2 != 0 || a.nrows() == 0 {
        return Err(invalid("A must be a nonempty 2d×2d matrix"));
    }
    let defect = spectral_norm(&symplectic_gram(a));
    if defect == 0.0 {
        return Err(Error::Domain("AᵀJA = 0: the expansion coefficient is undefined".into()));
    }
    Ok((crate::group::standard_gaussians(p, a.nrows() + 1)?, defect))
}

/// `e^{−γ|Mw|²}` on the pair space of `ℝᵐ`, with `M` picking `w1`, `w2` or `w1 + w2`.
fn pair_gauss(m: usize, gamma: f64, which: usize) -> Result<GaussianPolynomial> {
    let mut sel = RMat::zeros(m, 2 * m);
    for k in 0..m {
        if which != 1 {
            sel[(k, k)] = 1.0;
        }
        if which != 0 {
            sel[(k, m + k)] = 1.0;
        }
    }
    GaussianPolynomial::isotropic(m, gamma).pull_back(&sel, &RVec::zeros(m))
}

fn pair_product(m: usize, gamma: [f64; 3]) -> Result<GaussianPolynomial> {
    pair_gauss(m, gamma[0], 0)?.product(&pair_gauss(m, gamma[1], 1)?)?.product(&pair_gauss(m, gamma[2], 2)?)
}

pub fn tprime_gaussian_expansion(p: &ExponentTriple, a: &RMat) -> Result<ShiftExpansion> {
    let (g, defect) = gaussians(p, a)?;
    let gamma = p.gamma();
    let g3 = gamma[2];
    let t22 = trilinear_closed(&g[0], &g[1], &g[2], a, 0.0, (2, 2))?.value.re;
    let t02 = trilinear_closed(&g[0], &g[1], &g[2], a, 0.0, (0, 2))?.value.re;
    let c2 = g3 * (2.0 * g3 * t22 - t02) / (defect * defect);

    let d2 = a.nrows();
    let bm = symplectic_gram(a);
    let mut sigma = Poly::zero(2 * d2);
    for i in 0..d2 {
        for j in 0..d2 {
            if bm[(i, j)] != 0.0 {
                let mut pw = vec![0; 2 * d2];
                pw[i] += 1;
                pw[d2 + j] += 1;
                sigma = sigma.add(&Poly::monomial(2 * d2, pw, C64::new(bm[(i, j)], 0.0)));
            }
        }
    }
    let x_factor = pair_product(d2, gamma)?.mul_poly(&sigma.pow(2))?.integrate()?.value.re / (defect * defect);
    let tg = pair_product(1, gamma)?;
    let t_mass = tg.integrate()?.value.re;
    let alpha = Poly::linear(&[1.0, 1.0], 0.0);
    let weight = alpha.pow(2).scale(C64::new(2.0 * g3, 0.0)).add(&Poly::constant(2, C64::new(-1.0, 0.0)));
    let t_factor = tg.mul_poly(&weight)?.integrate()?.value.re / t_mass;
    Ok(ShiftExpansion { c2, t_factor, x_factor, t_mass, defect })
}

pub fn tdoubleprime_gaussian_expansion(p: &ExponentTriple, a: &RMat) -> Result<TwistExpansion> {
    let (g, defect) = gaussians(p, a)?;
    let t02 = trilinear_closed(&g[0], &g[1], &g[2], a, 0.0, (0, 2))?.value.re;
    let first_order = trilinear_closed(&g[0], &g[1], &g[2], a, 0.0, (0, 1))?.value;
    Ok(TwistExpansion { c2: -0.5 * t02 / (defect * defect), first_order, defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::standard_gaussians;
    use rand::{Rng, SeedableRng};

    fn ev(f: &GaussianPolynomial) -> EvaluableFunction {
        EvaluableFunction::from_gauss_poly(f).unwrap()
    }

    fn g_ev(p: &ExponentTriple) -> [EvaluableFunction; 3] {
        let g = standard_gaussians(p, 3).unwrap();
        [0, 1, 2].map(|j| ev(&g[j]))
    }

    fn random_p(rng: &mut impl Rng) -> ExponentTriple {
        loop {
            let p1 = rng.gen_range(1.05..1.95);
            let p2 = rng.gen_range(1.05..1.95);
            if let Ok(p) = ExponentTriple::complete(p1, p2) {
                if p.p()[2] > 1.0 && p.p()[2] < 2.0 {
                    return p;
                }
            }
        }
    }

    #[test]
    fn split_thresholds() {
        let p = ExponentTriple::symmetric();
        let g = standard_gaussians(&p, 3).unwrap();
        let eta = 0.1;
        let z = [0.2, -0.1, 0.3];
        let below = sharp_flat_split(&ev(&g[0].scale(C64::new(eta / 2.0, 0.0))), &g[0], eta).unwrap();
        assert_eq!(below.sharp.eval(&z), g[0].eval(&z) * (eta / 2.0));
        assert_eq!(below.flat.eval(&z), C64::new(0.0, 0.0));
        let above = sharp_flat_split(&ev(&g[0].scale(C64::new(2.0 * eta, 0.0))), &g[0], eta).unwrap();
        assert_eq!(above.sharp.eval(&z), C64::new(0.0, 0.0));
        assert!(sharp_flat_split(&ev(&g[0]), &g[0], 0.0).is_err());
    }

    #[test]
    fn split_of_a_bump_with_a_spike() {
        let p = ExponentTriple::symmetric();
        let g = standard_gaussians(&p, 3).unwrap();
        let eta = 0.1;
        let gj = g[1].clone();
        let gc = gj.clone();
        let f_of = move |z: &[f64]| {
            let base = gc.eval(z) * (eta * (1.0 + z[0].cos()) / 2.0);
            let r2 = (z[0] - 0.3).powi(2) + z[1].powi(2) + z[2].powi(2);
            base + C64::new(0.5 * (-40.0 * r2).exp(), 0.0)
        };
        let env = crate::quadrature::Envelope::new(RMat::identity(3, 3) * 3.0, RVec::zeros(3), 2.0).unwrap();
        let f = EvaluableFunction::new(3, f_of.clone(), env).unwrap();
        let s = sharp_flat_split(&f, &gj, eta).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (mut n_sharp, mut n_flat) = (0, 0);
        for _ in 0..1000 {
            let z: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0) * 0.6).collect();
            let v = f_of(&z);
            let bound = eta * gj.eval(&z).norm();
            let (sv, fv) = (s.sharp.eval(&z), s.flat.eval(&z));
            assert_eq!(sv + fv, v);
            assert!(sv.norm() <= bound);
            if v.norm() <= bound {
                assert_eq!(sv, v);
                n_sharp += 1;
            } else {
                assert_eq!(sv, C64::new(0.0, 0.0));
                n_flat += 1;
            }
        }
        assert!(n_sharp > 0 && n_flat > 0);
    }

    #[test]
    fn euclidean_and_untwisted_cases_vanish() {
        let p = ExponentTriple::symmetric();
        let h = g_ev(&p);
        let h = [&h[0], &h[1], &h[2]];
        let zero = RMat::zeros(2, 2);
        assert_eq!(tprime(h, &zero, &Engine::default()).unwrap().value, C64::new(0.0, 0.0));
        assert_eq!(tdoubleprime(h, &RMat::identity(2, 2), 0.0, &Engine::default()).unwrap().value, C64::new(0.0, 0.0));
    }

    #[test]
    fn symmetric_t_factor() {
        let e = tprime_gaussian_expansion(&ExponentTriple::symmetric(), &RMat::identity(2, 2)).unwrap();
        assert!((e.t_factor + 1.0 / 3.0).abs() < 1e-12, "{}", e.t_factor);
    }

    #[test]
    fn expansion_factorizes_and_is_negative() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = random_p(&mut rng);
            let a = RMat::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
            let e = tprime_gaussian_expansion(&p, &a).unwrap();
            let g = p.gamma();
            let rational = (g[0] * g[2] + g[1] * g[2]) / (g[0] * g[1] + g[0] * g[2] + g[1] * g[2]) - 1.0;
            assert!((e.t_factor - rational).abs() < 1e-12);
            assert!(e.t_factor < 0.0 && e.x_factor > 0.0 && e.c2 < 0.0);
            let factored = g[2] * e.x_factor * e.t_factor * e.t_mass;
            assert!((factored - e.c2).abs() < 1e-10 * e.c2.abs(), "{factored} vs {}", e.c2);
        }
    }

    #[test]
    fn second_sigma_moment_is_a_constant_times_the_defect() {
        let p = ExponentTriple::symmetric();
        let g = standard_gaussians(&p, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut cs = Vec::new();
        for _ in 0..20 {
            let a = RMat::from_fn(2, 2, |_, _| rng.gen_range(-2.0..2.0));
            let d = spectral_norm(&symplectic_gram(&a));
            let v = trilinear_closed(&g[0], &g[1], &g[2], &a, 0.0, (0, 2)).unwrap().value.re;
            cs.push(v / (d * d));
        }
        let (lo, hi) = cs.iter().fold((f64::MAX, f64::MIN), |(l, h), &c| (l.min(c), h.max(c)));
        assert!(lo > 0.0 && (hi - lo) / lo <= 1e-8);
    }

    #[test]
    fn first_sigma_moment_vanishes() {
        let p = ExponentTriple::symmetric();
        let g = standard_gaussians(&p, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let a = RMat::from_fn(2, 2, |_, _| rng.gen_range(-2.0..2.0));
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f1 = g[0].mul_poly(&Poly::linear(&c, rng.gen_range(-1.0..1.0))).unwrap().modulate(&RVec::from_vec(c.clone())).unwrap();
            let scale = trilinear_closed(&f1, &g[1], &g[2], &a, 0.0, (0, 0)).unwrap().value.norm().max(1e-3);
            let v = trilinear_closed(&f1, &g[1], &g[2], &a, 0.0, (0, 1)).unwrap().value;
            assert!(v.norm() <= 1e-10 * scale, "{v}");
        }
    }

    #[test]
    fn closed_series_matches_quadrature() {
        let p = ExponentTriple::symmetric();
        let h = g_ev(&p);
        let h = [&h[0], &h[1], &h[2]];
        let a = RMat::from_row_slice(2, 2, &[0.6, 0.1, -0.2, 0.5]);
        let scheme = Engine::Quadrature(QuadratureScheme::gauss_hermite(20).unwrap());
        let c = tprime(h, &a, &Engine::default()).unwrap();
        let q = tprime(h, &a, &scheme).unwrap();
        assert!((c.value - q.value).norm() <= 1e-8 * c.value.norm() + 3.0 * q.error, "{c:?} {q:?}");
        let c = tdoubleprime(h, &a, 0.8, &Engine::default()).unwrap();
        let q = tdoubleprime(h, &a, 0.8, &scheme).unwrap();
        assert!((c.value - q.value).norm() <= 1e-8 * c.value.norm() + 3.0 * q.error, "{c:?} {q:?}");
    }

    #[test]
    fn shift_term_scales_like_the_squared_defect() {
        let p = ExponentTriple::symmetric();
        let h = g_ev(&p);
        let h = [&h[0], &h[1], &h[2]];
        let id = RMat::identity(2, 2);
        let c2 = tprime_gaussian_expansion(&p, &id).unwrap().c2;
        let scheme = Engine::Quadrature(QuadratureScheme::gauss_hermite(20).unwrap());
        let ratio = |eps: f64| {
            let v = tprime(h, &(&id * eps), &scheme).unwrap();
            assert!(v.value.re < 0.0);
            v.value.re / eps.powi(4)
        };
        let (r1, r2, r3) = (ratio(0.2), ratio(0.1), ratio(0.05));
        // Richardson on an expansion in ε²
        let rich = (16.0 * r3 - r2) / 15.0;
        assert!((rich - c2).abs() <= 0.01 * c2.abs(), "{rich} vs {c2}");
        assert!((r3 - c2).abs() <= 0.03 * c2.abs());
        assert!((r2 - r3).abs() < (r1 - r2).abs());
    }

    #[test]
    fn twist_term_is_quadratic_in_b() {
        let p = ExponentTriple::symmetric();
        let h = g_ev(&p);
        let h = [&h[0], &h[1], &h[2]];
        let id = RMat::identity(2, 2);
        let e = tdoubleprime_gaussian_expansion(&p, &id).unwrap();
        assert!(e.c2 < 0.0);
        assert!(e.first_order.norm() <= 1e-10 * e.c2.abs());
        let eps = 0.1;
        let a = &id * eps;
        for b in [0.5, 1.0, 2.0] {
            let v = tdoubleprime(h, &a, b, &Engine::default()).unwrap().value;
            let coef = v.re / (b * b * eps.powi(4));
            assert!((coef - e.c2).abs() <= 0.02 * e.c2.abs(), "b = {b}: {coef} vs {}", e.c2);
        }
        let ratio = |eps: f64| tdoubleprime(h, &(&id * eps), 1.0, &Engine::default()).unwrap().value.re / eps.powi(4);
        let rs: Vec<f64> = [0.2, 0.1, 0.05, 0.025].into_iter().map(ratio).collect();
        assert!(rs.iter().all(|r| *r < 0.0));
        assert!((rs[3] - rs[2]).abs() <= 1e-4 * e.c2.abs(), "{rs:?}");
        assert!((rs[3] - e.c2).abs() <= 1e-4 * e.c2.abs(), "{rs:?} vs {}", e.c2);
    }

    #[test]
    fn trivial_bound_is_stable_over_a_corpus() {
        let p = ExponentTriple::symmetric();
        let g = standard_gaussians(&p, 3).unwrap();
        let pp = p.p();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut sample = || {
            let mut f = || {
                let shift: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let xi: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                GaussianPolynomial::isotropic(3, rng.gen_range(1.0..6.0))
                    .mul_poly(&Poly::linear(&c, 1.0))
                    .unwrap()
                    .pull_back(&RMat::identity(3, 3), &RVec::from_vec(shift))
                    .unwrap()
                    .modulate(&RVec::from_vec(xi))
                    .unwrap()
            };
            let (h1, h2) = (f(), f());
            let a = RMat::from_fn(2, 2, |_, _| rng.gen_range(-0.5..0.5));
            let v = tprime([&ev(&h1), &ev(&h2), &ev(&g[2])], &a, &Engine::default()).unwrap().value.norm();
            let n1 = crate::quadrature::lp_norm(&ev(&h1), pp[0], &QuadratureScheme::gauss_hermite(16).unwrap()).unwrap().value;
            let n2 = crate::quadrature::lp_norm(&ev(&h2), pp[1], &QuadratureScheme::gauss_hermite(16).unwrap()).unwrap().value;
            v / (n1 * n2)
        };
        let first: Vec<f64> = (0..12).map(|_| sample()).collect();
        let c = first.iter().cloned().fold(0.0, f64::max);
        let more = (0..12).map(|_| sample()).fold(c, f64::max);
        assert!(c > 0.0 && more <= 2.0 * c, "{c} -> {more}");
    }
}
