//! Exact algebra and integration for finite sums of `monomial × complex Gaussian`.
//!
//! A [`GaussianPolynomial`] on `ℝⁿ` is stored as blocks `exp(s − zᵀQz + lᵀz) · P(z)` where
//! `Q` is complex symmetric with positive definite real part, `l` is a complex vector,
//! `s` a complex log-scale and `P` a sparse polynomial. The class is closed under products,
//! affine substitutions, modulations and differentiation, and its integrals are exact:
//!
//! `∫ z^α exp(−zᵀQz + lᵀz) dz = π^{n/2} det(Q)^{−1/2} exp(¼ lᵀQ⁻¹l) · E[z^α]`
//!
//! where the formal moments `E[z^α]` of mean `μ = ½Q⁻¹l` and covariance `Σ = ½Q⁻¹` follow
//! from differentiating the generating function in `l`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::linalg::{
    condition_number_c, det_inv_sqrt_continuous, inverse_c, min_eigenvalue, re, symmetrize_c,
    to_complex, CMat, CVec, RMat, RVec, C64,
};

/// Condition number above which integrals carry a conditioning warning.
pub const CONDITION_WARNING: f64 = 1e12;

pub type Monomial = Vec<u32>;

/// Sparse complex polynomial in `n` real variables.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    n: usize,
    coeffs: BTreeMap<Monomial, C64>,
}

impl Poly {
    pub fn zero(n: usize) -> Self {
        Self { n, coeffs: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: C64) -> Self {
        let mut p = Self::zero(n);
        if c != C64::new(0.0, 0.0) {
            p.coeffs.insert(vec![0; n], c);
        }
        p
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, C64::new(1.0, 0.0))
    }

    pub fn monomial(n: usize, powers: Monomial, c: C64) -> Self {
        assert_eq!(powers.len(), n);
        let mut p = Self::zero(n);
        p.coeffs.insert(powers, c);
        p
    }

    pub fn var(n: usize, i: usize) -> Self {
        let mut pw = vec![0; n];
        pw[i] = 1;
        Self::monomial(n, pw, C64::new(1.0, 0.0))
    }

    /// `Σ_k a_k z_k + c`.
    pub fn linear(a: &[f64], c: f64) -> Self {
        let n = a.len();
        let mut p = Self::constant(n, C64::new(c, 0.0));
        for (k, &ak) in a.iter().enumerate() {
            if ak != 0.0 {
                let mut pw = vec![0; n];
                pw[k] = 1;
                p.coeffs.insert(pw, C64::new(ak, 0.0));
            }
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.keys().all(|m| m.iter().all(|&e| e == 0))
    }

    pub fn degree(&self) -> u32 {
        self.coeffs.keys().map(|m| m.iter().sum::<u32>()).max().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.coeffs.iter()
    }

    fn add_term(&mut self, m: Monomial, c: C64) {
        let e = self.coeffs.entry(m).or_insert(C64::new(0.0, 0.0));
        *e += c;
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.n, other.n);
        let mut out = self.clone();
        for (m, c) in &other.coeffs {
            out.add_term(m.clone(), *c);
        }
        out.coeffs.retain(|_, c| *c != C64::new(0.0, 0.0));
        out
    }

    pub fn scale(&self, c: C64) -> Poly {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v *= c;
        }
        out.coeffs.retain(|_, c| *c != C64::new(0.0, 0.0));
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        assert_eq!(self.n, other.n);
        let mut out = Poly::zero(self.n);
        for (ma, ca) in &self.coeffs {
            for (mb, cb) in &other.coeffs {
                let m: Monomial = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                out.add_term(m, ca * cb);
            }
        }
        out.coeffs.retain(|_, c| *c != C64::new(0.0, 0.0));
        out
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut out = Poly::one(self.n);
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn conj(&self) -> Poly {
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = v.conj();
        }
        out
    }

    /// Partial derivative in variable `i`.
    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.n);
        for (m, c) in &self.coeffs {
            if m[i] > 0 {
                let mut m2 = m.clone();
                m2[i] -= 1;
                out.add_term(m2, c * m[i] as f64);
            }
        }
        out
    }

    pub fn eval(&self, z: &[f64]) -> C64 {
        self.coeffs
            .iter()
            .map(|(m, c)| {
                let mut v = *c;
                for (zi, &e) in z.iter().zip(m) {
                    if e > 0 {
                        v *= zi.powi(e as i32);
                    }
                }
                v
            })
            .sum()
    }

    /// `P(Mz + v)` for `M` of shape `n × k`, as a polynomial in `k` variables.
    pub fn compose_affine(&self, m: &RMat, v: &RVec) -> Poly {
        let k = m.ncols();
        let linears: Vec<Poly> = (0..self.n)
            .map(|i| {
                let row: Vec<f64> = (0..k).map(|c| m[(i, c)]).collect();
                Poly::linear(&row, v[i])
            })
            .collect();
        let mut cache: Vec<Vec<Poly>> = linears.iter().map(|l| vec![Poly::one(k), l.clone()]).collect();
        let mut out = Poly::zero(k);
        for (mono, c) in &self.coeffs {
            let mut term = Poly::constant(k, *c);
            for (i, &e) in mono.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while cache[i].len() <= e as usize {
                    let next = cache[i].last().unwrap().mul(&linears[i]);
                    cache[i].push(next);
                }
                term = term.mul(&cache[i][e as usize]);
            }
            out = out.add(&term);
        }
        out
    }
}

/// `exp(−zᵀQz + lᵀz)` with `Q` complex symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub q: CMat,
    pub l: CVec,
}

impl Gaussian {
    pub fn new(q: CMat, l: CVec) -> Self {
        Self { q: symmetrize_c(&q), l }
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }
}

/// One `coeff · z^powers · exp(−zᵀQz + lᵀz)` term.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussTerm {
    pub coeff: C64,
    pub powers: Vec<u32>,
    pub q: CMat,
    pub l: CVec,
}

impl GaussTerm {
    pub fn new(coeff: C64, powers: Vec<u32>, q: CMat, l: CVec) -> Result<Self> {
        let n = l.len();
        if q.nrows() != n || q.ncols() != n || powers.len() != n {
            return Err(invalid(format!(
                "term dimensions disagree: Q {}x{}, l {}, powers {}",
                q.nrows(),
                q.ncols(),
                n,
                powers.len()
            )));
        }
        let q = symmetrize_c(&q);
        if min_eigenvalue(&re(&q)) <= 0.0 {
            return Err(Error::Domain("Re(Q) is not positive definite".into()));
        }
        Ok(Self { coeff, powers, q, l })
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Block {
    gauss: Gaussian,
    log_scale: C64,
    poly: Poly,
}

impl Block {
    fn coefficient_scale(&self) -> C64 {
        self.log_scale.exp()
    }
}

/// Non-fatal diagnostics attached to closed-form results.
#[derive(Clone, Debug, PartialEq)]
pub enum Warning {
    IllConditioned { condition: f64 },
    SingularSubstitution { det: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Integral {
    pub value: C64,
    pub warnings: Vec<Warning>,
}

/// Finite sum of monomial × complex-Gaussian terms on `ℝⁿ`; the empty sum is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPolynomial {
    n: usize,
    blocks: Vec<Block>,
}

impl GaussianPolynomial {
    pub fn zero(n: usize) -> Self {
        Self { n, blocks: Vec::new() }
    }

    /// `coeff · exp(−zᵀQz + lᵀz)`.
    pub fn gaussian(coeff: C64, q: CMat, l: CVec) -> Result<Self> {
        let n = l.len();
        let term = GaussTerm::new(coeff, vec![0; n], q, l)?;
        Self::from_terms(n, vec![term])
    }

    /// `exp(−rate·|z|²)`.
    pub fn isotropic(n: usize, rate: f64) -> Self {
        let q = to_complex(&(RMat::identity(n, n) * rate));
        Self::from_gaussian(Gaussian::new(q, CVec::zeros(n)), Poly::one(n))
    }

    pub fn from_gaussian(gauss: Gaussian, poly: Poly) -> Self {
        let n = gauss.dim();
        assert_eq!(poly.dim(), n);
        let mut out = Self::zero(n);
        if !poly.is_zero() {
            out.blocks.push(Block { gauss, log_scale: C64::new(0.0, 0.0), poly });
        }
        out
    }

    pub fn from_terms(n: usize, terms: Vec<GaussTerm>) -> Result<Self> {
        let mut out = Self::zero(n);
        for t in terms {
            if t.l.len() != n {
                return Err(invalid(format!("term of dimension {} in a sum of dimension {n}", t.l.len())));
            }
            let poly = Poly::monomial(n, t.powers, t.coeff);
            out.push_block(Block {
                gauss: Gaussian::new(t.q, t.l),
                log_scale: C64::new(0.0, 0.0),
                poly,
            });
        }
        Ok(out)
    }

    /// Expanded term list.
    pub fn terms(&self) -> Vec<GaussTerm> {
        let mut out = Vec::new();
        for b in &self.blocks {
            let s = b.coefficient_scale();
            for (m, c) in b.poly.iter() {
                out.push(GaussTerm { coeff: c * s, powers: m.clone(), q: b.gauss.q.clone(), l: b.gauss.l.clone() });
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.blocks.iter().map(|b| b.poly.iter().count()).sum()
    }

    /// Gaussian factors with their (scaled) polynomial prefactors.
    pub fn blocks(&self) -> impl Iterator<Item = (&Gaussian, Poly)> + '_ {
        self.blocks.iter().map(|b| (&b.gauss, b.poly.scale(b.coefficient_scale())))
    }

    /// Blocks with the scale kept in log form, for evaluators far from the origin.
    pub(crate) fn log_blocks(&self) -> impl Iterator<Item = (&Gaussian, C64, &Poly)> + '_ {
        self.blocks.iter().map(|b| (&b.gauss, b.log_scale, &b.poly))
    }

    /// Single block with a constant polynomial.
    pub fn is_pure_gaussian(&self) -> bool {
        self.blocks.len() == 1 && self.blocks[0].poly.is_constant()
    }

    fn push_block(&mut self, block: Block) {
        if block.poly.is_zero() {
            return;
        }
        if let Some(existing) = self.blocks.iter_mut().find(|b| b.gauss == block.gauss) {
            let rel = (block.log_scale - existing.log_scale).exp();
            existing.poly = existing.poly.add(&block.poly.scale(rel));
        } else {
            self.blocks.push(block);
        }
        self.blocks.retain(|b| !b.poly.is_zero());
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(invalid(format!("dimension mismatch: {} vs {}", self.n, other.n)));
        }
        Ok(())
    }

    pub fn scale(&self, c: C64) -> Self {
        if c == C64::new(0.0, 0.0) {
            return Self::zero(self.n);
        }
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.poly = b.poly.scale(c);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = self.clone();
        for b in &other.blocks {
            out.push_block(b.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn mul_poly(&self, p: &Poly) -> Result<Self> {
        if p.dim() != self.n {
            return Err(invalid("polynomial dimension mismatch"));
        }
        let mut out = Self::zero(self.n);
        for b in &self.blocks {
            out.push_block(Block { gauss: b.gauss.clone(), log_scale: b.log_scale, poly: b.poly.mul(p) });
        }
        Ok(out)
    }

    /// Multiplies by a Gaussian factor `exp(−zᵀQz + lᵀz)` (no positivity requirement).
    pub fn mul_gaussian(&self, g: &Gaussian) -> Result<Self> {
        if g.dim() != self.n {
            return Err(invalid("gaussian dimension mismatch"));
        }
        let mut out = Self::zero(self.n);
        for b in &self.blocks {
            out.push_block(Block {
                gauss: Gaussian::new(&b.gauss.q + &g.q, &b.gauss.l + &g.l),
                log_scale: b.log_scale,
                poly: b.poly.clone(),
            });
        }
        Ok(out)
    }

    /// Termwise product: coefficients multiply, quadratic and linear parts add, powers add.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let mut out = Self::zero(self.n);
        for a in &self.blocks {
            for b in &other.blocks {
                out.push_block(Block {
                    gauss: Gaussian::new(&a.gauss.q + &b.gauss.q, &a.gauss.l + &b.gauss.l),
                    log_scale: a.log_scale + b.log_scale,
                    poly: a.poly.mul(&b.poly),
                });
            }
        }
        Ok(out)
    }

    /// Multiplication by `e^{iξ·z}`.
    pub fn modulate(&self, xi: &RVec) -> Result<Self> {
        if xi.len() != self.n {
            return Err(invalid("modulation frequency dimension mismatch"));
        }
        let shift: CVec = xi.map(|v| C64::new(0.0, v));
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.gauss.l += &shift;
        }
        Ok(out)
    }

    pub fn conj(&self) -> Self {
        let mut out = Self::zero(self.n);
        for b in &self.blocks {
            out.push_block(Block {
                gauss: Gaussian::new(b.gauss.q.map(|v| v.conj()), b.gauss.l.map(|v| v.conj())),
                log_scale: b.log_scale.conj(),
                poly: b.poly.conj(),
            });
        }
        out
    }

    /// `z ↦ f(Mz + v)` for `M` of shape `n × k`; the result lives on `ℝᵏ`.
    ///
    /// The real part of the new quadratic form may be only semidefinite when `k > n` or
    /// `M` is singular; positivity is checked when integrating.
    pub fn pull_back(&self, m: &RMat, v: &RVec) -> Result<Self> {
        if m.nrows() != self.n || v.len() != self.n {
            return Err(invalid(format!(
                "substitution maps into ℝ^{} but the function lives on ℝ^{}",
                m.nrows(),
                self.n
            )));
        }
        let k = m.ncols();
        let mc = to_complex(m);
        let vc: CVec = v.map(|x| C64::new(x, 0.0));
        let mut out = Self::zero(k);
        for b in &self.blocks {
            let q = &b.gauss.q;
            let qv = q * &vc;
            let new_q = mc.transpose() * q * &mc;
            let new_l = mc.transpose() * (&b.gauss.l - &qv * C64::new(2.0, 0.0));
            let shift = -(vc.transpose() * &qv)[(0, 0)] + (b.gauss.l.transpose() * &vc)[(0, 0)];
            out.push_block(Block {
                gauss: Gaussian::new(new_q, new_l),
                log_scale: b.log_scale + shift,
                poly: b.poly.compose_affine(m, v),
            });
        }
        Ok(out)
    }

    /// `f ∘ (z ↦ Mz + v)` for square `M`, with a warning when `|det M| < 1e−12`.
    pub fn substitute_affine(&self, m: &RMat, v: &RVec) -> Result<(Self, Vec<Warning>)> {
        if m.nrows() != m.ncols() || m.nrows() != self.n || v.len() != self.n {
            return Err(invalid(format!(
                "substitution must be {n}x{n} with a length-{n} shift",
                n = self.n
            )));
        }
        let det = m.determinant();
        let mut warnings = Vec::new();
        if det.abs() < 1e-12 {
            warnings.push(Warning::SingularSubstitution { det });
        }
        Ok((self.pull_back(m, v)?, warnings))
    }

    /// Partial derivative in coordinate `i`.
    pub fn derivative(&self, i: usize) -> Result<Self> {
        if i >= self.n {
            return Err(invalid("derivative index out of range"));
        }
        let mut out = Self::zero(self.n);
        for b in &self.blocks {
            // d/dz_i exp(−zᵀQz + lᵀz) = (l_i − 2 (Qz)_i) exp(...)
            let mut lin = Poly::constant(self.n, b.gauss.l[i]);
            for k in 0..self.n {
                let c = b.gauss.q[(i, k)] * -2.0;
                if c != C64::new(0.0, 0.0) {
                    lin = lin.add(&Poly::var(self.n, k).scale(c));
                }
            }
            let poly = b.poly.derivative(i).add(&b.poly.mul(&lin));
            out.push_block(Block { gauss: b.gauss.clone(), log_scale: b.log_scale, poly });
        }
        Ok(out)
    }

    pub fn eval(&self, z: &[f64]) -> C64 {
        let mut total = C64::new(0.0, 0.0);
        for b in &self.blocks {
            let mut e = b.log_scale;
            for i in 0..self.n {
                let mut row = C64::new(0.0, 0.0);
                for k in 0..self.n {
                    row += b.gauss.q[(i, k)] * z[k];
                }
                e += z[i] * (b.gauss.l[i] - row);
            }
            total += e.exp() * b.poly.eval(z);
        }
        total
    }

    /// Exact integral over `ℝⁿ`.
    pub fn integrate(&self) -> Result<Integral> {
        let mut value = C64::new(0.0, 0.0);
        let mut warnings = Vec::new();
        for b in &self.blocks {
            let q = &b.gauss.q;
            if min_eigenvalue(&re(q)) <= 0.0 {
                return Err(Error::Domain("Re(Q) is not positive definite".into()));
            }
            let cond = condition_number_c(q);
            if cond > CONDITION_WARNING {
                warnings.push(Warning::IllConditioned { condition: cond });
            }
            let qinv = inverse_c(q)?;
            let sigma = &qinv * C64::new(0.5, 0.0);
            let mu = &sigma * &b.gauss.l;
            let quad = (b.gauss.l.transpose() * &mu)[(0, 0)] * 0.5;
            let base = det_inv_sqrt_continuous(q)?
                * (b.log_scale + quad).exp()
                * PI.powf(self.n as f64 / 2.0);
            let mut moments = Moments::new(mu, sigma);
            let mut acc = C64::new(0.0, 0.0);
            for (m, c) in b.poly.iter() {
                acc += c * moments.get(m);
            }
            value += base * acc;
        }
        Ok(Integral { value, warnings })
    }

    /// Log-sum-exp style magnitude bound helper: `(Re Q, center, log-amplitude)` per block.
    pub(crate) fn block_moduli(&self) -> Vec<(RMat, RVec, f64, &Poly)> {
        self.blocks
            .iter()
            .map(|b| {
                let r = re(&b.gauss.q);
                let lr = b.gauss.l.map(|v| v.re);
                let rinv = r.clone().try_inverse().unwrap_or_else(|| RMat::identity(self.n, self.n));
                let center = &rinv * &lr * 0.5;
                let log_amp = b.log_scale.re + 0.25 * (lr.transpose() * &rinv * &lr)[(0, 0)];
                (r, center, log_amp, &b.poly)
            })
            .collect()
    }
}

/// Formal Gaussian moments `E[z^α]` for mean `μ` and covariance `Σ`, memoized per multi-index.
struct Moments {
    mu: CVec,
    sigma: CMat,
    memo: HashMap<Monomial, C64>,
}

impl Moments {
    fn new(mu: CVec, sigma: CMat) -> Self {
        Self { mu, sigma, memo: HashMap::new() }
    }

    fn get(&mut self, alpha: &[u32]) -> C64 {
        let Some(i) = alpha.iter().position(|&a| a > 0) else {
            return C64::new(1.0, 0.0);
        };
        if let Some(v) = self.memo.get(alpha) {
            return *v;
        }
        // E[z_i z^β] = μ_i E[z^β] + Σ_k Σ_ik β_k E[z^{β − e_k}],  β = α − e_i
        let mut beta = alpha.to_vec();
        beta[i] -= 1;
        let mut v = self.mu[i] * self.get(&beta);
        for k in 0..beta.len() {
            if beta[k] > 0 {
                let s = self.sigma[(i, k)];
                if s != C64::new(0.0, 0.0) {
                    let mut gamma = beta.clone();
                    gamma[k] -= 1;
                    v += s * beta[k] as f64 * self.get(&gamma);
                }
            }
        }
        self.memo.insert(alpha.to_vec(), v);
        v
    }
}

/// `(∫|f|^p)^{1/p}` for a single pure Gaussian term.
pub fn lp_norm_closed(f: &GaussianPolynomial, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(invalid(format!("L^p norm needs p ≥ 1, got {p}")));
    }
    if !f.is_pure_gaussian() {
        return Err(Error::Unsupported(
            "closed-form L^p norm needs a single pure Gaussian term; use quadrature".into(),
        ));
    }
    let b = &f.blocks[0];
    let c = b.poly.iter().next().map(|(_, c)| *c).unwrap_or_default();
    let n = f.n as f64;
    let r = re(&b.gauss.q);
    let lr = b.gauss.l.map(|v| v.re);
    let chol = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("Re(Q) is not positive definite".into()))?;
    let log_det_r: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let rinv_l = chol.solve(&lr);
    let log_abs_c = c.norm().ln() + b.log_scale.re;
    // ∫ exp(−p zᵀRz + p Re(l)ᵀz) = π^{n/2} p^{−n/2} det(R)^{−1/2} exp(p/4 · Re(l)ᵀR⁻¹Re(l))
    let log_int = p * log_abs_c + 0.5 * n * (PI.ln() - p.ln()) - 0.5 * log_det_r
        + 0.25 * p * lr.dot(&rinv_l);
    Ok((log_int / p).exp())
}

/// Pulls `f` on `ℝⁿ` back to the pair space `ℝ²ⁿ` along `(z1, z2) ↦ which(z1, z2)`.
fn pair_pullbacks(n: usize) -> [RMat; 3] {
    let mut p1 = RMat::zeros(n, 2 * n);
    let mut p2 = RMat::zeros(n, 2 * n);
    let mut p3 = RMat::zeros(n, 2 * n);
    for i in 0..n {
        p1[(i, i)] = 1.0;
        p2[(i, n + i)] = 1.0;
        p3[(i, i)] = -1.0;
        p3[(i, n + i)] = -1.0;
    }
    [p1, p2, p3]
}

/// The pair-space integrand `f1(z1) f2(z2) f3(−z1−z2) e^{ibβ} α^m β^k` with
/// `α = t1 + t2` and `β = σ(Ax1, Ax2)`, where points are ordered `z = (x, t)`.
pub fn trilinear_integrand(
    f: [&GaussianPolynomial; 3],
    a: &RMat,
    b: f64,
    sigma_powers: (u32, u32),
) -> Result<GaussianPolynomial> {
    let n = f[0].dim();
    if f[1].dim() != n || f[2].dim() != n {
        return Err(invalid("trilinear inputs must share their dimension"));
    }
    if n % 2 == 0 {
        return Err(invalid(format!("dimension must be 2d+1, got {n}")));
    }
    let d2 = n - 1;
    if a.nrows() != d2 || a.ncols() != d2 {
        return Err(invalid(format!("attached matrix must be {d2}x{d2}")));
    }
    let [p1, p2, p3] = pair_pullbacks(n);
    let zero = RVec::zeros(n);
    let mut integrand = f[0]
        .pull_back(&p1, &zero)?
        .product(&f[1].pull_back(&p2, &zero)?)?
        .product(&f[2].pull_back(&p3, &zero)?)?;
    let bmat = crate::group::symplectic_gram(a);
    let dim = 2 * n;
    let (m, k) = sigma_powers;
    if b != 0.0 && d2 > 0 {
        // e^{ibβ} = exp(−uᵀQu) with Q_{x1_a, x2_c} = Q_{x2_c, x1_a} = −(ib/2) B_ac
        let mut q = CMat::zeros(dim, dim);
        for ai in 0..d2 {
            for ci in 0..d2 {
                let v = C64::new(0.0, -0.5 * b * bmat[(ai, ci)]);
                q[(ai, n + ci)] += v;
                q[(n + ci, ai)] += v;
            }
        }
        integrand = integrand.mul_gaussian(&Gaussian::new(q, CVec::zeros(dim)))?;
    }
    if m > 0 || k > 0 {
        let mut alpha = Poly::var(dim, n - 1).add(&Poly::var(dim, 2 * n - 1));
        alpha = alpha.pow(m);
        let mut beta = Poly::zero(dim);
        for ai in 0..d2 {
            for ci in 0..d2 {
                let c = bmat[(ai, ci)];
                if c != 0.0 {
                    beta = beta.add(&Poly::var(dim, ai).mul(&Poly::var(dim, n + ci)).scale(C64::new(c, 0.0)));
                }
            }
        }
        let weight = alpha.mul(&beta.pow(k));
        integrand = integrand.mul_poly(&weight)?;
    }
    Ok(integrand)
}

/// `∬ f1(z1) f2(z2) f3(−z1−z2) e^{ibβ} α^m β^k dz1 dz2`, exactly.
///
/// The group shift inside `f3` is absent here; this is the Euclidean pairing weighted by
/// powers of `α = t1 + t2` and `β = σ(Ax1, Ax2)` and by the twist `e^{ibβ}` (itself a
/// Gaussian factor with purely imaginary quadratic form).
pub fn trilinear_closed(
    f1: &GaussianPolynomial,
    f2: &GaussianPolynomial,
    f3: &GaussianPolynomial,
    a: &RMat,
    b: f64,
    sigma_powers: (u32, u32),
) -> Result<Integral> {
    trilinear_integrand([f1, f2, f3], a, b, sigma_powers)?.integrate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn gauss1(rate: f64) -> GaussianPolynomial {
        GaussianPolynomial::isotropic(1, rate)
    }

    #[test]
    fn one_dimensional_basics() {
        let f = gauss1(1.0);
        assert!((f.integrate().unwrap().value - c(PI.sqrt(), 0.0)).norm() < 1e-14);
        let x = f.mul_poly(&Poly::var(1, 0)).unwrap();
        assert!(x.integrate().unwrap().value.norm() < 1e-15);
    }

    #[test]
    fn second_moment_matches_simpson_oracle() {
        let gamma = 3.0 * PI;
        // composite Simpson on [-3, 3] as an independent oracle
        let oracle = {
            let n = 20000;
            let h = 6.0 / n as f64;
            let g = |x: f64| x * x * (-gamma * x * x).exp();
            let mut s = g(-3.0) + g(3.0);
            for i in 1..n {
                let x = -3.0 + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(x);
            }
            s * h / 3.0
        };
        let f = gauss1(gamma).mul_poly(&Poly::monomial(1, vec![2], c(1.0, 0.0))).unwrap();
        let got = f.integrate().unwrap().value;
        assert!((got.re - oracle).abs() < 1e-12 * oracle, "{got} vs {oracle}");
        assert!((got.re - PI.sqrt() * gamma.powf(-1.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn complex_quadratic_form_matches_tensor_trapezoid() {
        let q = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.25), c(0.0, 0.25), c(1.0, 0.0)]);
        let f = GaussianPolynomial::gaussian(c(1.0, 0.0), q.clone(), CVec::zeros(2)).unwrap();
        let got = f.integrate().unwrap().value;
        // trapezoid on a wide uniform grid is spectrally accurate for this integrand
        let h = 0.05;
        let m = 240;
        let mut s = c(0.0, 0.0);
        for i in -m..=m {
            for j in -m..=m {
                let z = [i as f64 * h, j as f64 * h];
                s += f.eval(&z);
            }
        }
        s *= h * h;
        assert!((got - s).norm() < 1e-12, "{got} vs {s}");
        let expected = PI / q.determinant().sqrt();
        assert!((got - expected).norm() < 1e-14);
    }

    #[test]
    fn product_rules() {
        let g = gauss1(1.0);
        let one = GaussianPolynomial::from_gaussian(
            Gaussian::new(CMat::zeros(1, 1), CVec::zeros(1)),
            Poly::one(1),
        );
        let gi = g.product(&one).unwrap();
        assert_eq!(gi, g);
        let gg = g.product(&g).unwrap();
        assert_eq!(gg, gauss1(2.0));
        let xg = g.mul_poly(&Poly::var(1, 0)).unwrap();
        let xxg = xg.product(&xg).unwrap();
        let expected = gauss1(2.0).mul_poly(&Poly::monomial(1, vec![2], c(1.0, 0.0))).unwrap();
        assert_eq!(xxg, expected);
    }

    #[test]
    fn substitution_rules() {
        let g = gauss1(1.0);
        let (same, w) = g.substitute_affine(&RMat::identity(1, 1), &RVec::zeros(1)).unwrap();
        assert!(w.is_empty());
        assert_eq!(same, g);
        let (scaled, _) = g.substitute_affine(&RMat::from_element(1, 1, 2.0), &RVec::zeros(1)).unwrap();
        assert_eq!(scaled, gauss1(4.0));
        let (_, w) = g.substitute_affine(&RMat::zeros(1, 1), &RVec::zeros(1)).unwrap();
        assert!(matches!(w[0], Warning::SingularSubstitution { .. }));
    }

    #[test]
    fn translated_polynomial_evaluates_consistently() {
        let q = CMat::from_row_slice(2, 2, &[c(1.5, 0.1), c(0.2, 0.0), c(0.2, 0.0), c(0.8, -0.3)]);
        let l = CVec::from_vec(vec![c(0.3, 0.2), c(-0.1, 0.5)]);
        let f = GaussianPolynomial::gaussian(c(0.7, -0.2), q, l)
            .unwrap()
            .mul_poly(&Poly::monomial(2, vec![2, 1], c(1.0, 0.5)).add(&Poly::var(2, 0)))
            .unwrap();
        let m = RMat::from_row_slice(2, 2, &[1.2, 0.3, -0.4, 0.9]);
        let v = RVec::from_vec(vec![0.25, -0.7]);
        let (g, _) = f.substitute_affine(&m, &v).unwrap();
        for z in [[0.1, 0.2], [-1.0, 0.5], [0.7, -0.3]] {
            let y = &m * RVec::from_row_slice(&z) + &v;
            assert!((g.eval(&z) - f.eval(y.as_slice())).norm() < 1e-13);
        }
        let d = f.derivative(1).unwrap();
        let h = 1e-6;
        let z = [0.3, -0.2];
        let fd = (f.eval(&[z[0], z[1] + h]) - f.eval(&[z[0], z[1] - h])) / (2.0 * h);
        assert!((d.eval(&z) - fd).norm() < 1e-8);
        // integral transforms with |det M|^{-1}
        let lhs = g.integrate().unwrap().value;
        let rhs = f.integrate().unwrap().value / m.determinant().abs();
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
    }

    #[test]
    fn closed_norm_examples() {
        let g = gauss1(3.0 * PI);
        let got = lp_norm_closed(&g, 1.5).unwrap();
        let expected = (2.0_f64.sqrt() / 3.0).powf(2.0 / 3.0);
        assert!((got - expected).abs() < 1e-14);
        let modulated = g.modulate(&RVec::from_vec(vec![2.5])).unwrap();
        assert!((lp_norm_closed(&modulated, 1.5).unwrap() - expected).abs() < 1e-14);
        let scaled = g.scale(c(0.0, -3.0));
        assert!((lp_norm_closed(&scaled, 1.5).unwrap() - 3.0 * expected).abs() < 1e-13);
        let poly = g.mul_poly(&Poly::var(1, 0)).unwrap();
        assert!(matches!(lp_norm_closed(&poly, 1.5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn non_positive_real_part_is_a_domain_error() {
        let q = CMat::from_element(1, 1, c(-1.0, 0.0));
        assert!(matches!(
            GaussianPolynomial::gaussian(c(1.0, 0.0), q, CVec::zeros(1)),
            Err(Error::Domain(_))
        ));
        let flat = GaussianPolynomial::from_gaussian(
            Gaussian::new(CMat::zeros(1, 1), CVec::zeros(1)),
            Poly::one(1),
        );
        assert!(matches!(flat.integrate(), Err(Error::Domain(_))));
    }

    #[test]
    fn trilinear_euclidean_value_for_symmetric_exponents() {
        let g = gauss1(3.0 * PI);
        let a = RMat::zeros(0, 0);
        let v = trilinear_closed(&g, &g, &g, &a, 0.0, (0, 0)).unwrap().value;
        assert!((v.re - 27f64.powf(-0.5)).abs() < 1e-15);
        assert!(v.im.abs() < 1e-16);
    }

    #[test]
    fn trilinear_single_alpha_vanishes() {
        let g = GaussianPolynomial::isotropic(3, 3.0 * PI);
        let a = RMat::identity(2, 2);
        let v = trilinear_closed(&g, &g, &g, &a, 0.0, (1, 0)).unwrap().value;
        assert!(v.norm() < 1e-16);
    }
}
