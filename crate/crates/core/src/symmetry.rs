//! Symmetries of `T(f, A, b)`, their exact action on Gaussian polynomials, the normalized
//! orbit and an optimization-based upper bound on the projective distance to `(g, 0, 0)`.
//!
//! Every generator acts on each function as `f ↦ c·e^{iξ·z}·f(Mz + v)`; such maps compose
//! in closed form, so a whole word is applied with a single substitution per function.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::gausspoly::GaussianPolynomial;
use crate::group::{standard_gaussians, symplectic_defect_norm, symplectic_gram, AttachedParams, ExponentTriple, HPoint};
use crate::linalg::{j_matrix, n_upper, re, spectral_norm, sym_from_upper, RMat, RVec, C64};
use crate::optim::{nelder_mead, NelderMeadConfig};
use crate::quadrature::{phi_gauss_poly, CompiledGp, NormGrid, PhiEstimate, QuadratureScheme};

pub type Triple = [GaussianPolynomial; 3];

/// The two symmetry classes: `G0` changes the attached parameters, `G1` acts in the
/// normalized chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GenClass {
    G0,
    G1,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SymmetryGen {
    Scale([C64; 3]),
    /// `f(x, t) ↦ f(rx, r²t)`, `b ↦ r²b`.
    Dilate(f64),
    /// `f_j ↦ f_j(u_j · z · w_j)` with `w1 = u2⁻¹, w2 = u3⁻¹, w3 = u1⁻¹`, plus the
    /// compensating `x`-modulations on `f1` and `f2` when `b ≠ 0`.
    TranslateMod([HPoint; 3]),
    /// `f ↦ f∘L` on the `x` variables, `A ↦ AL`.
    GlAction(RMat),
    /// `f ↦ f∘S` with `(A, b)` fixed; a symmetry whenever `SᵀAᵀJAS = AᵀJA`, which holds for
    /// every symplectic `S` when `d = 1` or `A = Id`.
    SpAction(RMat),
    /// `t ↦ t + φ·x`.
    Shear(RVec),
    ModulateX(RVec),
    /// `f ↦ e^{iξ·z} f`, `b ↦ b + ξ_t`.
    ModulateFull(RVec),
}

impl SymmetryGen {
    pub fn class(&self) -> GenClass {
        match self {
            SymmetryGen::GlAction(_) => GenClass::G0,
            SymmetryGen::ModulateFull(xi) if xi.rows(0, xi.len() - 1).iter().all(|v| *v == 0.0) => GenClass::G0,
            _ => GenClass::G1,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let d2 = 2 * d;
        let square = |m: &RMat, what: &str| {
            if m.nrows() != d2 || m.ncols() != d2 {
                Err(invalid(format!("{what} must be {d2}x{d2}")))
            } else {
                Ok(())
            }
        };
        match self {
            SymmetryGen::Scale(a) => {
                if a.iter().any(|c| c.norm() == 0.0 || !c.re.is_finite() || !c.im.is_finite()) {
                    return Err(invalid("scale factors must be finite and nonzero"));
                }
            }
            SymmetryGen::Dilate(r) => {
                if !(*r > 0.0 && r.is_finite()) {
                    return Err(invalid(format!("dilation factor must be positive, got {r}")));
                }
            }
            SymmetryGen::TranslateMod(u) => {
                if u.iter().any(|p| p.x.len() != d2) {
                    return Err(invalid("translation points have the wrong dimension"));
                }
            }
            SymmetryGen::GlAction(l) => {
                square(l, "L")?;
                if l.determinant().abs() <= 1e-12 {
                    return Err(invalid("GlAction needs |det L| > 1e-12"));
                }
            }
            SymmetryGen::SpAction(s) => {
                square(s, "S")?;
                let j = j_matrix(d);
                if spectral_norm(&(s.transpose() * &j * s - &j)) > 1e-10 {
                    return Err(invalid("SpAction matrix is not symplectic"));
                }
            }
            SymmetryGen::Shear(v) | SymmetryGen::ModulateX(v) => {
                if v.len() != d2 {
                    return Err(invalid(format!("expected a vector of length {d2}")));
                }
            }
            SymmetryGen::ModulateFull(v) => {
                if v.len() != d2 + 1 {
                    return Err(invalid(format!("expected a vector of length {}", d2 + 1)));
                }
            }
        }
        Ok(())
    }
}

/// Ordered generators, applied left to right.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SymmetryWord {
    pub gens: Vec<SymmetryGen>,
}

impl SymmetryWord {
    pub fn new(gens: Vec<SymmetryGen>) -> Self {
        Self { gens }
    }

    pub fn classes(&self) -> Vec<GenClass> {
        self.gens.iter().map(SymmetryGen::class).collect()
    }
}

/// `f ↦ c·e^{iξ·z}·f(Mz + v)`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct AffineAction {
    c: C64,
    xi: RVec,
    m: RMat,
    v: RVec,
}

impl AffineAction {
    fn identity(n: usize) -> Self {
        Self { c: C64::new(1.0, 0.0), xi: RVec::zeros(n), m: RMat::identity(n, n), v: RVec::zeros(n) }
    }

    /// `other ∘ self`: apply `self` first.
    fn then(&self, other: &AffineAction) -> AffineAction {
        let phase = self.xi.dot(&other.v);
        AffineAction {
            c: self.c * other.c * C64::from_polar(1.0, phase),
            xi: &other.xi + other.m.transpose() * &self.xi,
            m: &self.m * &other.m,
            v: &self.m * &other.v + &self.v,
        }
    }

    fn apply(&self, f: &GaussianPolynomial) -> Result<GaussianPolynomial> {
        Ok(f.pull_back(&self.m, &self.v)?.modulate(&self.xi)?.scale(self.c))
    }
}

fn block_x(n: usize, l: &RMat) -> RMat {
    let mut m = RMat::identity(n, n);
    m.view_mut((0, 0), (n - 1, n - 1)).copy_from(l);
    m
}

/// Per-function actions of one generator and the updated attached parameters.
fn gen_actions(gen: &SymmetryGen, params: &AttachedParams) -> Result<([AffineAction; 3], AttachedParams)> {
    let d = params.d();
    gen.validate(d)?;
    let n = 2 * d + 1;
    let id = AffineAction::identity(n);
    let same = |a: AffineAction| [a.clone(), a.clone(), a];
    let mut next = params.clone();
    let acts = match gen {
        SymmetryGen::Scale(a) => [0, 1, 2].map(|j| AffineAction { c: a[j], ..id.clone() }),
        SymmetryGen::Dilate(r) => {
            let mut m = RMat::identity(n, n) * *r;
            m[(n - 1, n - 1)] = r * r;
            next.b = params.b * r * r;
            same(AffineAction { m, ..id.clone() })
        }
        SymmetryGen::TranslateMod(u) => {
            let b = symplectic_gram(&params.a);
            let w = [u[1].inverse(), u[2].inverse(), u[0].inverse()];
            let mut acts = [0, 1, 2].map(|j| {
                let (uu, ww) = (&u[j], &w[j]);
                let mut m = RMat::identity(n, n);
                let row = (&uu.x - &ww.x).transpose() * &b;
                for k in 0..n - 1 {
                    m[(n - 1, k)] = row[(0, k)];
                }
                let mut v = RVec::zeros(n);
                v.rows_mut(0, n - 1).copy_from(&(&uu.x + &ww.x));
                v[n - 1] = uu.t + ww.t + (uu.x.transpose() * &b * &ww.x)[(0, 0)];
                AffineAction { m, v, ..id.clone() }
            });
            if params.b != 0.0 {
                let xi1 = (&b * (&u[1].x - &u[2].x)) * params.b;
                let xi2 = -(&b * (&u[0].x - &u[1].x)) * params.b;
                for (j, xi) in [(0, xi1), (1, xi2)] {
                    let mut full = RVec::zeros(n);
                    full.rows_mut(0, n - 1).copy_from(&xi);
                    acts[j] = acts[j].then(&AffineAction { xi: full, ..id.clone() });
                }
            }
            acts
        }
        SymmetryGen::GlAction(l) => {
            next.a = &params.a * l;
            same(AffineAction { m: block_x(n, l), ..id.clone() })
        }
        SymmetryGen::SpAction(s) => same(AffineAction { m: block_x(n, s), ..id.clone() }),
        SymmetryGen::Shear(phi) => {
            let mut m = RMat::identity(n, n);
            for k in 0..n - 1 {
                m[(n - 1, k)] = phi[k];
            }
            same(AffineAction { m, ..id.clone() })
        }
        SymmetryGen::ModulateX(xi) => {
            let mut full = RVec::zeros(n);
            full.rows_mut(0, n - 1).copy_from(xi);
            same(AffineAction { xi: full, ..id.clone() })
        }
        SymmetryGen::ModulateFull(xi) => {
            next.b = params.b + xi[n - 1];
            same(AffineAction { xi: xi.clone(), ..id.clone() })
        }
    };
    Ok((acts, next))
}

fn check_triple(f: &Triple, params: &AttachedParams) -> Result<()> {
    let n = 2 * params.d() + 1;
    if f.iter().any(|g| g.dim() != n) {
        return Err(invalid(format!("functions must live on ℝ^{n} to match A")));
    }
    Ok(())
}

/// Composite per-function actions of a word and the final attached parameters.
pub(crate) fn word_actions(word: &SymmetryWord, params: &AttachedParams) -> Result<([AffineAction; 3], AttachedParams)> {
    let n = 2 * params.d() + 1;
    let mut acc = [AffineAction::identity(n), AffineAction::identity(n), AffineAction::identity(n)];
    let mut cur = params.clone();
    for gen in &word.gens {
        let (acts, next) = gen_actions(gen, &cur)?;
        for j in 0..3 {
            acc[j] = acc[j].then(&acts[j]);
        }
        cur = next;
    }
    Ok((acc, cur))
}

/// Applies `word` to `(f, A, b)`.
pub fn apply(word: &SymmetryWord, f: &Triple, params: &AttachedParams) -> Result<(Triple, AttachedParams)> {
    check_triple(f, params)?;
    let (acts, next) = word_actions(word, params)?;
    Ok(([acts[0].apply(&f[0])?, acts[1].apply(&f[1])?, acts[2].apply(&f[2])?], next))
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceResidual {
    pub residual: f64,
    /// Combined error estimate of the two `Φ` evaluations.
    pub error: f64,
    pub before: PhiEstimate,
    pub after: PhiEstimate,
}

/// `|Φ(apply(word, f, A, b)) − Φ(f, A, b)|`.
pub fn invariance_residual(
    word: &SymmetryWord,
    f: &Triple,
    p: &ExponentTriple,
    params: &AttachedParams,
    scheme: &QuadratureScheme,
) -> Result<InvarianceResidual> {
    let (g, next) = apply(word, f, params)?;
    let before = phi_gauss_poly(f, p, params, scheme)?;
    let after = phi_gauss_poly(&g, p, &next, scheme)?;
    Ok(InvarianceResidual {
        residual: (after.value - before.value).abs(),
        error: after.error + before.error,
        before,
        after,
    })
}

/// `((e^{−ibt} f) ∘ A⁻¹, Id, 0)` together with the entry parameters `(A, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedEntry {
    pub triple: Triple,
    pub params: AttachedParams,
    pub entry: AttachedParams,
}

pub fn normalize_entry(f: &Triple, params: &AttachedParams) -> Result<NormalizedEntry> {
    check_triple(f, params)?;
    let d = params.d();
    let n = 2 * d + 1;
    let inv = params
        .a
        .clone()
        .try_inverse()
        .filter(|_| params.a.determinant().abs() > 1e-12)
        .ok_or_else(|| invalid("normalization needs an invertible A; perturb it first"))?;
    let mut xi = RVec::zeros(n);
    xi[n - 1] = -params.b;
    let act = AffineAction { xi, ..AffineAction::identity(n) }.then(&AffineAction {
        m: block_x(n, &inv),
        ..AffineAction::identity(n)
    });
    Ok(NormalizedEntry {
        triple: [act.apply(&f[0])?, act.apply(&f[1])?, act.apply(&f[2])?],
        params: AttachedParams::heisenberg(d),
        entry: params.clone(),
    })
}

/// `exp(J·Q)` for symmetric `Q` given by its upper triangle: a symplectic matrix.
pub fn symplectic_exp(d: usize, upper: &[f64]) -> RMat {
    let q = sym_from_upper(2 * d, upper);
    (j_matrix(d) * q).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_evals: usize,
    pub initial_step: f64,
    /// Log-sum-exp sharpness for the smoothed maximum.
    pub sharpness: f64,
    /// Gauss–Hermite nodes per axis for norms inside the objective.
    pub search_nodes: usize,
    /// Gauss–Hermite nodes per axis for the final re-evaluation.
    pub final_nodes: usize,
    /// Shift applied to a singular `A` before normalizing.
    pub singular_shift: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            restarts: 5,
            seed: 7,
            max_evals: 3000,
            initial_step: 0.02,
            sharpness: 50.0,
            search_nodes: 12,
            final_nodes: 24,
            singular_shift: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceBreakdown {
    pub norm_sq: [f64; 3],
    pub max_norm_sq: f64,
    pub defect_sq: f64,
    pub twist_defect_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceReport {
    pub upper_bound: f64,
    pub params: Vec<f64>,
    pub l: Vec<Vec<f64>>,
    pub beta: f64,
    pub breakdown: DistanceBreakdown,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub best_restart: usize,
    /// Upper bound found by each restart.
    pub restart_values: Vec<f64>,
    /// Whether `A` had to be shifted to become invertible.
    pub shifted_entry: bool,
}

/// Coordinates of the finite orbit parametrization.
struct Layout {
    d: usize,
}

impl Layout {
    fn n(&self) -> usize {
        2 * self.d + 1
    }
    fn log_r(&self) -> usize {
        6
    }
    fn trans(&self) -> usize {
        7
    }
    fn shear(&self) -> usize {
        self.trans() + 3 * self.n()
    }
    fn modx(&self) -> usize {
        self.shear() + 2 * self.d
    }
    fn sp(&self) -> usize {
        self.modx() + 2 * self.d
    }
    fn gl(&self) -> usize {
        self.sp() + n_upper(2 * self.d)
    }
    fn beta(&self) -> usize {
        self.gl() + 4 * self.d * self.d
    }
    fn len(&self) -> usize {
        self.beta() + 1
    }

    /// `Ψ0 Ψ1` for parameter vector `x`, relative to the entry `(A_e, b_e)`.
    fn word(&self, x: &[f64], entry: &AttachedParams) -> SymmetryWord {
        let d = self.d;
        let d2 = 2 * d;
        let n = self.n();
        let scale = [0, 1, 2].map(|j| C64::from_polar(x[2 * j].exp(), x[2 * j + 1]));
        let u = [0, 1, 2].map(|j| {
            let o = self.trans() + j * n;
            HPoint { x: RVec::from_row_slice(&x[o..o + d2]), t: x[o + d2] }
        });
        let k = RMat::from_row_slice(d2, d2, &x[self.gl()..self.gl() + d2 * d2]);
        let l = &entry.a * (RMat::identity(d2, d2) + k);
        let mut xi_t = RVec::zeros(n);
        xi_t[n - 1] = entry.b + x[self.beta()];
        SymmetryWord::new(vec![
            SymmetryGen::SpAction(symplectic_exp(d, &x[self.sp()..self.gl()])),
            SymmetryGen::TranslateMod(u),
            SymmetryGen::Shear(RVec::from_row_slice(&x[self.shear()..self.modx()])),
            SymmetryGen::ModulateX(RVec::from_row_slice(&x[self.modx()..self.sp()])),
            SymmetryGen::Dilate(x[self.log_r()].exp()),
            SymmetryGen::Scale(scale),
            SymmetryGen::GlAction(l),
            SymmetryGen::ModulateFull(xi_t),
        ])
    }
}

/// `max_j ‖h_j − g_j‖²` and `‖LᵀJL‖²` terms of the distance objective.
struct Objective<'a> {
    layout: Layout,
    start: &'a NormalizedEntry,
    g: &'a Triple,
    p: [f64; 3],
}

impl Objective<'_> {
    fn build(&self, x: &[f64]) -> Result<(Triple, AttachedParams)> {
        let word = self.layout.word(x, &self.start.entry);
        // Ψ1 generators act in the (Id, 0) chart and leave it fixed
        let (acts, params) = word_actions(&word, &self.start.params)?;
        let h = [
            acts[0].apply(&self.start.triple[0])?,
            acts[1].apply(&self.start.triple[1])?,
            acts[2].apply(&self.start.triple[2])?,
        ];
        Ok((h, params))
    }

    fn defect(params: &AttachedParams) -> (f64, f64) {
        let s = spectral_norm(&symplectic_gram(&params.a)).powi(2);
        (s, params.b * params.b * s)
    }

    /// Fast smoothed objective for the simplex search.
    fn smooth(&self, x: &[f64], nodes: usize, sharpness: f64) -> f64 {
        let Ok((h, params)) = self.build(x) else { return f64::INFINITY };
        let mut sq = [0.0; 3];
        for j in 0..3 {
            match search_norm(&h[j], &self.g[j], self.p[j], nodes, false) {
                Some(v) => sq[j] = v * v,
                None => return f64::INFINITY,
            }
        }
        let m = sq.iter().cloned().fold(0.0, f64::max);
        let smax = if m > 0.0 {
            m * (1.0 + (sq.iter().map(|v| (sharpness * (v / m - 1.0)).exp()).sum::<f64>()).ln() / sharpness)
        } else {
            0.0
        };
        let (a, b) = Self::defect(&params);
        smax + a + b
    }

    fn exact(&self, x: &[f64], nodes: usize) -> Result<(f64, DistanceBreakdown, AttachedParams)> {
        let (h, params) = self.build(x)?;
        let mut norm_sq = [0.0; 3];
        for j in 0..3 {
            let v = search_norm(&h[j], &self.g[j], self.p[j], nodes, true).unwrap_or(f64::INFINITY);
            norm_sq[j] = v * v;
        }
        let max_norm_sq = norm_sq.iter().cloned().fold(0.0, f64::max);
        let (defect_sq, twist_defect_sq) = Self::defect(&params);
        let total = max_norm_sq + defect_sq + twist_defect_sq;
        Ok((total, DistanceBreakdown { norm_sq, max_norm_sq, defect_sq, twist_defect_sq }, params))
    }
}

/// `‖h − g‖_p` split by a partition of unity between a grid on `g` and a grid on `h`, so
/// that far-apart shapes are both seen.
fn search_norm(h: &GaussianPolynomial, g: &GaussianPolynomial, p: f64, nodes: usize, always_split: bool) -> Option<f64> {
    let (rg, cg) = dominant_shape(g)?;
    let (rh, ch) = dominant_shape(h).unwrap_or((rg.clone(), cg.clone()));
    let hc = CompiledGp::new(h);
    let gc = CompiledGp::new(g);
    if !always_split && overlapping(&rg, &cg, &rh, &ch) {
        let cov = (rg.clone().try_inverse()? + rh.try_inverse()?) * 0.5;
        let grid = NormGrid::new(&(cov.try_inverse()? * 0.35), &((&cg + &ch) * 0.5), p, nodes).ok()?;
        let v = grid.norm(|z| hc.eval(z) - gc.eval(z));
        return v.is_finite().then_some(v);
    }
    let n = cg.len();
    let log_env = |r: &RMat, c: &RVec, z: &[f64]| {
        let mut q = 0.0;
        for a in 0..n {
            for b in 0..n {
                q += (z[a] - c[a]) * r[(a, b)] * (z[b] - c[b]);
            }
        }
        -q
    };
    let mut total = 0.0;
    for (own, (r, c)) in [(&rg, &cg), (&rh, &ch)].into_iter().enumerate() {
        let grid = NormGrid::new(&(r * 0.35), c, p, nodes).ok()?;
        total += grid.integrate(|z| {
            let (lg, lh) = (log_env(&rg, &cg, z), log_env(&rh, &ch, z));
            let other = if own == 0 { lh - lg } else { lg - lh };
            let w = 1.0 / (1.0 + (p * other).exp());
            (hc.eval(z) - gc.eval(z)).norm().powf(p) * w
        });
    }
    let v = total.max(0.0).powf(1.0 / p);
    v.is_finite().then_some(v)
}

/// Centres within one unit of either shape's width and widths within a factor 3.
fn overlapping(rg: &RMat, cg: &RVec, rh: &RMat, ch: &RVec) -> bool {
    let sep = ch - cg;
    let far = |r: &RMat| (sep.transpose() * r * &sep)[(0, 0)] > 1.0;
    if far(rg) || far(rh) {
        return false;
    }
    let Some((w, _)) = crate::linalg::whitening(rg).ok() else { return false };
    let rel = crate::linalg::symmetrize(&(w.transpose() * rh * &w)).symmetric_eigen().eigenvalues;
    rel.iter().all(|v| (1.0 / 3.0..=3.0).contains(v))
}

/// Real part of the dominant block's quadratic form and its centre.
fn dominant_shape(f: &GaussianPolynomial) -> Option<(RMat, RVec)> {
    let (r, c, ..) = f
        .block_moduli()
        .into_iter()
        .max_by(|a, b| a.2.total_cmp(&b.2))?;
    (crate::linalg::min_eigenvalue(&r) > 0.0).then_some((r, c))
}

/// Parameters mapping the normalized triple's dominant Gaussian shape onto `g`.
fn moment_start(layout: &Layout, start: &NormalizedEntry, gamma: [f64; 3]) -> Vec<f64> {
    let d = layout.d;
    let n = layout.n();
    let d2 = 2 * d;
    let mut x = vec![0.0; layout.len()];
    let mut shape = RMat::zeros(n, n);
    let mut lin_im = RVec::zeros(n);
    for j in 0..3 {
        let Some((g, _)) = start.triple[j].blocks().max_by(|a, b| {
            let sa: f64 = a.1.iter().map(|(_, c)| c.norm()).sum();
            let sb: f64 = b.1.iter().map(|(_, c)| c.norm()).sum();
            sa.total_cmp(&sb)
        }) else {
            return x;
        };
        shape += re(&g.q) / (3.0 * gamma[j]);
        lin_im += g.l.map(|c| c.im) / 3.0;
    }
    let ptt = shape[(n - 1, n - 1)];
    if !(ptt > 0.0) {
        return x;
    }
    let pxt = shape.view((0, n - 1), (d2, 1)).into_owned();
    let phi = -&pxt / ptt;
    let pxx = shape.view((0, 0), (d2, d2)).into_owned() - &pxt * pxt.transpose() / ptt;
    let r = ptt.powf(-0.25);
    let eig = crate::linalg::symmetrize(&pxx).symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| *v <= 0.0) {
        return x;
    }
    let inv_sqrt = &eig.eigenvectors
        * RMat::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    let l = inv_sqrt / r;
    let omega_t = lin_im[n - 1];
    x[layout.log_r()] = r.ln();
    for k in 0..d2 {
        x[layout.shear() + k] = phi[k];
        x[layout.modx() + k] = -(lin_im[k] + omega_t * phi[k]);
    }
    if let Some(ainv) = start.entry.a.clone().try_inverse() {
        let k = ainv * l - RMat::identity(d2, d2);
        for (i, v) in k.transpose().iter().enumerate() {
            // row-major layout
            x[layout.gl() + i] = *v;
        }
    }
    x[layout.beta()] = -omega_t * r * r - start.entry.b;
    x
}

/// `a_j = ∫ g_j h̄_j / ∫|h_j|²` folded into the scale coordinates.
fn project_scales(obj: &Objective, x: &mut [f64]) {
    let Ok((h, _)) = obj.build(x) else { return };
    for j in 0..3 {
        let num = obj.g[j].product(&h[j].conj()).and_then(|v| v.integrate());
        let den = h[j].product(&h[j].conj()).and_then(|v| v.integrate());
        if let (Ok(num), Ok(den)) = (num, den) {
            if den.value.re > 0.0 && num.value.norm() > 0.0 {
                let a = num.value / den.value.re;
                x[2 * j] += a.norm().ln();
                x[2 * j + 1] += a.arg();
            }
        }
    }
}

/// Upper bound on the projective distance from the orbit of `(f, A, b)` to `(g, 0, 0)`.
pub fn orbit_distance_upper(
    f: &Triple,
    p: &ExponentTriple,
    params: &AttachedParams,
    cfg: &OrbitConfig,
) -> Result<DistanceReport> {
    check_triple(f, params)?;
    let d = params.d();
    let mut entry = params.clone();
    let shifted = entry.a.determinant().abs() <= 1e-12;
    if shifted {
        entry.a += RMat::identity(2 * d, 2 * d) * cfg.singular_shift;
    }
    let start = normalize_entry(f, &entry)?;
    let g = standard_gaussians(p, 2 * d + 1)?;
    let layout = Layout { d };
    let dim = layout.len();
    let obj = Objective { layout, start: &start, g: &g, p: p.p() };
    let mut moment = moment_start(&obj.layout, &start, p.gamma());
    project_scales(&obj, &mut moment);
    let starts: Vec<Vec<f64>> = (0..cfg.restarts.max(1))
        .map(|i| match i {
            0 => vec![0.0; dim],
            1 => moment.clone(),
            _ => {
                use rand::SeedableRng;
                use rand_distr::{Distribution, Normal};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
                let noise = Normal::new(0.0, 0.05).expect("valid");
                moment.iter().map(|v| v + noise.sample(&mut rng)).collect()
            }
        })
        .collect();
    let nm = NelderMeadConfig { max_evals: cfg.max_evals, f_tol: 1e-9, x_tol: 1e-8, initial_step: cfg.initial_step };
    let runs: Vec<Result<(f64, Vec<f64>, DistanceBreakdown, AttachedParams, usize, usize, bool)>> = starts
        .par_iter()
        .map(|x0| {
            let res = nelder_mead(|x| obj.smooth(x, cfg.search_nodes, cfg.sharpness), x0, &nm);
            let (v0, b0, p0) = obj.exact(x0, cfg.final_nodes)?;
            let (v1, b1, p1) = obj.exact(&res.x, cfg.final_nodes)?;
            Ok(if v1 <= v0 {
                (v1, res.x, b1, p1, res.iterations, res.evaluations, res.converged)
            } else {
                (v0, x0.clone(), b0, p0, res.iterations, res.evaluations, res.converged)
            })
        })
        .collect();
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let restart_values: Vec<f64> = runs.iter().map(|r| r.0.max(0.0).sqrt()).collect();
    let best = (0..runs.len()).min_by(|&a, &b| runs[a].0.total_cmp(&runs[b].0)).unwrap_or(0);
    let evaluations = runs.iter().map(|r| r.5).sum();
    let (value, x, breakdown, fin, iterations, _, converged) = runs.swap_remove(best);
    Ok(DistanceReport {
        upper_bound: value.max(0.0).sqrt(),
        params: x,
        l: fin.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
        beta: fin.b,
        breakdown,
        iterations,
        evaluations,
        converged,
        best_restart: best,
        restart_values,
        shifted_entry: shifted,
    })
}

/// `min_S ‖S⁻¹A‖²` over `S = exp(JQ)`, which is bounded below by `‖AᵀJA‖`.
pub fn min_symplectic_conjugate_norm(a: &RMat, cfg: &NelderMeadConfig) -> Result<(f64, RMat)> {
    symplectic_defect_norm(a)?;
    let d = a.nrows() / 2;
    let k = n_upper(2 * d);
    let f = |q: &[f64]| {
        let s = symplectic_exp(d, q);
        match s.try_inverse() {
            Some(si) => spectral_norm(&(si * a)).powi(2),
            None => f64::INFINITY,
        }
    };
    let mut best = nelder_mead(f, &vec![0.0; k], cfg);
    for _ in 0..3 {
        let again = nelder_mead(f, &best.x, cfg);
        if again.value >= best.value - 1e-15 {
            break;
        }
        best = again;
    }
    Ok((best.value, symplectic_exp(d, &best.x)))
}
