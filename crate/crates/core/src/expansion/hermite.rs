//! Hermite-type orthonormal systems, the associated modes and orthogonality residuals.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::gausspoly::{GaussianPolynomial, Poly};
use crate::group::ExponentTriple;
use crate::linalg::{RMat, C64};
use crate::quadrature::{EvaluableFunction, QuadratureScheme};

pub const MAX_DEGREE: usize = 8;

/// `P_0..P_nmax` with `∫ P_m P_n e^{−2tπx²} dx = δ_mn`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HermiteSystem {
    pub t: f64,
    /// Ascending coefficients of each `P_n`.
    pub polys: Vec<Vec<f64>>,
    pub gram: RMat,
}

/// `∫ x^m e^{−2tπx²} dx`.
fn moment(t: f64, m: usize) -> f64 {
    if m % 2 == 1 {
        return 0.0;
    }
    let mut v = 1.0 / (2.0 * t).sqrt();
    for k in (0..m).step_by(2) {
        v *= (k + 1) as f64 / (4.0 * PI * t);
    }
    v
}

fn pair(t: f64, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            s += x * y * moment(t, i + j);
        }
    }
    s
}

pub fn hermite_system(t: f64, nmax: usize) -> Result<HermiteSystem> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("weight rate must be positive, got {t}")));
    }
    if nmax > MAX_DEGREE {
        return Err(invalid(format!("degree at most {MAX_DEGREE}, got {nmax}")));
    }
    let mut polys: Vec<Vec<f64>> = Vec::with_capacity(nmax + 1);
    for n in 0..=nmax {
        let mut v = vec![0.0; n + 1];
        v[n] = 1.0;
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for q in &polys {
                let c = pair(t, &v, q);
                for (k, qk) in q.iter().enumerate() {
                    v[k] -= c * qk;
                }
            }
        }
        let norm = pair(t, &v, &v).sqrt();
        v.iter_mut().for_each(|c| *c /= norm);
        polys.push(v);
    }
    let gram = RMat::from_fn(nmax + 1, nmax + 1, |i, j| pair(t, &polys[i], &polys[j]));
    Ok(HermiteSystem { t, polys, gram })
}

impl HermiteSystem {
    pub fn nmax(&self) -> usize {
        self.polys.len() - 1
    }

    pub fn eval(&self, n: usize, x: f64) -> f64 {
        self.polys[n].iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// `P_α(z) = ∏_k P_{α_k}(z_k)` as a polynomial on `ℝⁿ`.
    pub fn product_poly(&self, alpha: &[u32]) -> Result<Poly> {
        let n = alpha.len();
        let mut out = Poly::one(n);
        for (k, &a) in alpha.iter().enumerate() {
            let a = a as usize;
            if a > self.nmax() {
                return Err(invalid(format!("degree {a} exceeds the system's {}", self.nmax())));
            }
            let mut factor = Poly::zero(n);
            for (c, &coef) in self.polys[a].iter().enumerate() {
                if coef != 0.0 {
                    let mut pw = vec![0; n];
                    pw[k] = c as u32;
                    factor = factor.add(&Poly::monomial(n, pw, C64::new(coef, 0.0)));
                }
            }
            out = out.mul(&factor);
        }
        Ok(out)
    }
}

/// `P_α^{(τ_j)}·g_j`, orthonormal against `P_β^{(τ_j)} g_j^{p_j−1}`.
pub fn mode(p: &ExponentTriple, j: usize, alpha: &[u32]) -> Result<GaussianPolynomial> {
    p.require_admissible()?;
    if j > 2 {
        return Err(invalid("function index must be 0, 1 or 2"));
    }
    let deg = alpha.iter().copied().max().unwrap_or(0) as usize;
    let sys = hermite_system(p.tau()[j], deg)?;
    GaussianPolynomial::isotropic(alpha.len(), p.gamma()[j]).mul_poly(&sys.product_poly(alpha)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Part {
    Re,
    Im,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualEntry {
    pub part: Part,
    pub j: usize,
    pub alpha: Vec<u32>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrthogonalityResidual {
    pub entries: Vec<ResidualEntry>,
    /// Number of conditions, `|J|`.
    pub count: usize,
}

impl OrthogonalityResidual {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn inf_norm(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.value.abs()))
    }
}

/// The index set: `Re` for `α = 0` (all j), `|α| = 1` (j = 1, 2), `|α| = 2` (j = 3);
/// `Im` for `α = 0` (all j) and `|α| = 1` (j = 3).
pub fn index_set(n: usize) -> Vec<(Part, usize, Vec<u32>)> {
    let unit = |k: usize| {
        let mut a = vec![0; n];
        a[k] = 1;
        a
    };
    let mut out = Vec::new();
    for j in 0..3 {
        out.push((Part::Re, j, vec![0; n]));
    }
    for j in 0..2 {
        for k in 0..n {
            out.push((Part::Re, j, unit(k)));
        }
    }
    for k in 0..n {
        for l in k..n {
            let mut a = vec![0; n];
            a[k] += 1;
            a[l] += 1;
            out.push((Part::Re, 2, a));
        }
    }
    for j in 0..3 {
        out.push((Part::Im, j, vec![0; n]));
    }
    for k in 0..n {
        out.push((Part::Im, 2, unit(k)));
    }
    out
}

/// `P_α^{(τ_j)} g_j^{p_j−1}` for every index in `J`, grouped by `j`.
fn weights(p: &ExponentTriple, n: usize) -> Result<Vec<(Part, usize, Vec<u32>, GaussianPolynomial)>> {
    p.require_admissible()?;
    let systems = p.tau().map(|t| hermite_system(t, 2));
    let pp = p.p();
    let gamma = p.gamma();
    index_set(n)
        .into_iter()
        .map(|(part, j, alpha)| {
            let sys = systems[j].as_ref().map_err(|e| invalid(e.to_string()))?;
            let w = GaussianPolynomial::isotropic(n, (pp[j] - 1.0) * gamma[j]).mul_poly(&sys.product_poly(&alpha)?)?;
            Ok((part, j, alpha, w))
        })
        .collect()
}

fn check_dims(n: usize) -> Result<()> {
    if n % 2 == 0 {
        return Err(invalid(format!("functions must live on ℝ^(2d+1), got dimension {n}")));
    }
    Ok(())
}

/// `⟨Re f_j, P_α g_j^{p_j−1}⟩` and `⟨Im f_j, …⟩` over `J`, exactly.
pub fn orthogonality_residuals(f: &[GaussianPolynomial; 3], p: &ExponentTriple) -> Result<OrthogonalityResidual> {
    let n = f[0].dim();
    if f.iter().any(|g| g.dim() != n) {
        return Err(invalid("the three functions must share their dimension"));
    }
    check_dims(n)?;
    let mut entries = Vec::new();
    for (part, j, alpha, w) in weights(p, n)? {
        let v = if f[j].is_zero() { C64::new(0.0, 0.0) } else { f[j].product(&w)?.integrate()?.value };
        let value = match part {
            Part::Re => v.re,
            Part::Im => v.im,
        };
        entries.push(ResidualEntry { part, j, alpha, value });
    }
    let count = entries.len();
    Ok(OrthogonalityResidual { entries, count })
}

/// The same inner products by quadrature for general functions.
pub fn orthogonality_residuals_quadrature(
    f: [&EvaluableFunction; 3],
    p: &ExponentTriple,
    scheme: &QuadratureScheme,
) -> Result<OrthogonalityResidual> {
    let n = f[0].dim();
    if f.iter().any(|g| g.dim() != n) {
        return Err(invalid("the three functions must share their dimension"));
    }
    check_dims(n)?;
    let pp = p.p();
    let gamma = p.gamma();
    let mut entries = Vec::new();
    for (part, j, alpha, w) in weights(p, n)? {
        let env = f[j].envelope();
        let value = if env.amplitude == 0.0 {
            0.0
        } else {
            let wr = (pp[j] - 1.0) * gamma[j];
            let rate = &env.rate + RMat::identity(n, n) * wr;
            let center = rate.clone().try_inverse().ok_or_else(|| invalid("singular envelope"))? * (&env.rate * &env.center);
            let fj = f[j];
            let est = crate::quadrature::integrate_single(&rate, &center, scheme, |z| {
                let v = fj.eval(z) * w.eval(z);
                match part {
                    Part::Re => v.re,
                    Part::Im => v.im,
                }
            })?;
            est.value.re
        };
        entries.push(ResidualEntry { part, j, alpha, value });
    }
    let count = entries.len();
    Ok(OrthogonalityResidual { entries, count })
}
