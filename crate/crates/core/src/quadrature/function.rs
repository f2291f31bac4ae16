use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::gausspoly::GaussianPolynomial;
use crate::linalg::{min_eigenvalue, symmetrize, whitening, RMat, RVec, C64};

/// Number of random points used to validate a declared envelope.
pub const ENVELOPE_CHECKS: usize = 1000;
const ENVELOPE_SEED: u64 = 0x5eed_e17e;
/// Decay given up when an envelope has to dominate polynomial factors.
const ENVELOPE_THETA: f64 = 0.8;
const AMPLITUDE_SAFETY: f64 = 1.25;

/// Gaussian bound `|f(z)| ≤ amplitude · exp(−(z−c)ᵀR(z−c))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub rate: RMat,
    pub center: RVec,
    pub amplitude: f64,
}

impl Envelope {
    pub fn new(rate: RMat, center: RVec, amplitude: f64) -> Result<Self> {
        let n = center.len();
        if rate.nrows() != n || rate.ncols() != n {
            return Err(invalid("envelope rate and center dimensions disagree"));
        }
        let rate = symmetrize(&rate);
        if min_eigenvalue(&rate) <= 0.0 {
            return Err(Error::Envelope("envelope rate is not positive definite".into()));
        }
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::Envelope(format!("bad envelope amplitude {amplitude}")));
        }
        Ok(Self { rate, center, amplitude })
    }

    /// `exp(−rate·|z|²)` centred at the origin with unit amplitude.
    pub fn isotropic(n: usize, rate: f64) -> Self {
        Self { rate: RMat::identity(n, n) * rate, center: RVec::zeros(n), amplitude: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn bound(&self, z: &[f64]) -> f64 {
        let d = RVec::from_iterator(z.len(), z.iter().zip(self.center.iter()).map(|(a, b)| a - b));
        self.amplitude * (-(d.transpose() * &self.rate * &d)[(0, 0)]).exp()
    }
}

type Evaluator = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;

/// A pointwise-evaluable complex function on `ℝⁿ` with a Gaussian envelope.
#[derive(Clone)]
pub struct EvaluableFunction {
    n: usize,
    eval: Evaluator,
    envelope: Envelope,
    source: Option<GaussianPolynomial>,
}

impl fmt::Debug for EvaluableFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EvaluableFunction")
            .field("n", &self.n)
            .field("envelope", &self.envelope)
            .field("closed_form", &self.source.is_some())
            .finish()
    }
}

impl EvaluableFunction {
    /// Wraps `f` with a caller-declared envelope, rejected if it fails on random samples.
    pub fn new<F>(n: usize, f: F, envelope: Envelope) -> Result<Self>
    where
        F: Fn(&[f64]) -> C64 + Send + Sync + 'static,
    {
        if envelope.dim() != n {
            return Err(invalid("envelope dimension mismatch"));
        }
        let out = Self { n, eval: Arc::new(f), envelope, source: None };
        out.check_envelope()?;
        Ok(out)
    }

    pub fn from_gauss_poly(f: &GaussianPolynomial) -> Result<Self> {
        let n = f.dim();
        let compiled = Arc::new(CompiledGp::new(f));
        let envelope = auto_envelope(f, &compiled)?;
        let eval = {
            let c = compiled.clone();
            Arc::new(move |z: &[f64]| c.eval(z)) as Evaluator
        };
        let out = Self { n, eval, envelope, source: Some(f.clone()) };
        out.check_envelope()?;
        Ok(out)
    }

    pub fn zero(n: usize) -> Self {
        Self {
            n,
            eval: Arc::new(|_| C64::new(0.0, 0.0)),
            envelope: Envelope { amplitude: 0.0, ..Envelope::isotropic(n, 1.0) },
            source: Some(GaussianPolynomial::zero(n)),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn eval(&self, z: &[f64]) -> C64 {
        (self.eval)(z)
    }

    pub fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    /// The Gaussian-polynomial this function was built from, if any.
    pub fn closed_form(&self) -> Option<&GaussianPolynomial> {
        self.source.as_ref()
    }

    pub fn scaled(&self, c: C64) -> Self {
        let inner = self.eval.clone();
        Self {
            n: self.n,
            eval: Arc::new(move |z| c * inner(z)),
            envelope: Envelope { amplitude: self.envelope.amplitude * c.norm(), ..self.envelope.clone() },
            source: self.source.as_ref().map(|s| s.scale(c)),
        }
    }

    fn check_envelope(&self) -> Result<()> {
        if self.envelope.amplitude == 0.0 {
            return Ok(());
        }
        let (w, _) = whitening(&self.envelope.rate)?;
        let mut rng = ChaCha8Rng::seed_from_u64(ENVELOPE_SEED);
        let mut z = vec![0.0; self.n];
        for i in 0..ENVELOPE_CHECKS {
            let radius = 0.5 + 2.5 * (i % 8) as f64 / 7.0;
            let y = RVec::from_iterator(self.n, (0..self.n).map(|_| { let g: f64 = StandardNormal.sample(&mut rng); radius * g / (self.n as f64).sqrt() }));
            let zz = &self.envelope.center + &w * y;
            z.copy_from_slice(zz.as_slice());
            let v = self.eval(&z).norm();
            let bound = self.envelope.bound(&z);
            if v > bound * (1.0 + 1e-9) + f64::MIN_POSITIVE {
                return Err(Error::Envelope(format!(
                    "|f| = {v:.3e} exceeds the declared envelope {bound:.3e} at {z:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Flattened Gaussian-polynomial evaluator for hot loops.
pub(crate) struct CompiledGp {
    n: usize,
    blocks: Vec<CompiledBlock>,
}

struct CompiledBlock {
    q: Vec<C64>,
    l: Vec<C64>,
    log_scale: C64,
    terms: Vec<(C64, Vec<u32>)>,
    constant: Option<C64>,
}

impl CompiledGp {
    pub(crate) fn new(f: &GaussianPolynomial) -> Self {
        let n = f.dim();
        let blocks = f
            .log_blocks()
            .map(|(g, log_scale, poly)| {
                let terms: Vec<(C64, Vec<u32>)> = poly.iter().map(|(m, c)| (*c, m.clone())).collect();
                let constant = if poly.is_constant() { terms.first().map(|t| t.0) } else { None };
                CompiledBlock {
                    q: g.q.transpose().iter().copied().collect(),
                    l: g.l.iter().copied().collect(),
                    log_scale,
                    terms,
                    constant,
                }
            })
            .collect();
        Self { n, blocks }
    }

    #[inline]
    pub(crate) fn eval(&self, z: &[f64]) -> C64 {
        let n = self.n;
        let mut total = C64::new(0.0, 0.0);
        for b in &self.blocks {
            let mut e = b.log_scale;
            for i in 0..n {
                let row = &b.q[i * n..(i + 1) * n];
                let mut acc = b.l[i];
                acc -= row[i] * z[i];
                for k in (i + 1)..n {
                    acc -= row[k] * (2.0 * z[k]);
                }
                e += acc * z[i];
            }
            let g = e.exp();
            match b.constant {
                Some(c) => total += c * g,
                None => {
                    let mut p = C64::new(0.0, 0.0);
                    for (c, m) in &b.terms {
                        let mut v = *c;
                        for (zi, &k) in z.iter().zip(m) {
                            if k > 0 {
                                v *= zi.powi(k as i32);
                            }
                        }
                        p += v;
                    }
                    total += p * g;
                }
            }
        }
        total
    }
}

fn auto_envelope(f: &GaussianPolynomial, compiled: &CompiledGp) -> Result<Envelope> {
    let n = f.dim();
    if f.is_zero() {
        return Ok(Envelope { amplitude: 0.0, ..Envelope::isotropic(n, 1.0) });
    }
    let moduli = f.block_moduli();
    for (r, ..) in &moduli {
        if min_eigenvalue(r) <= 0.0 {
            return Err(Error::Envelope("a term has no Gaussian decay".into()));
        }
    }
    if f.is_pure_gaussian() {
        let (r, c, log_amp, poly) = &moduli[0];
        let coeff = poly.iter().next().map(|(_, c)| c.norm()).unwrap_or(0.0);
        return Envelope::new(r.clone(), c.clone(), coeff * log_amp.exp() * (1.0 + 1e-12));
    }
    let dominant = moduli
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .2.total_cmp(&b.1 .2))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let r0 = &moduli[dominant].0;
    let (w0, _) = whitening(r0)?;
    let mut s: f64 = 1.0;
    for (r, ..) in &moduli {
        s = s.min(min_eigenvalue(&(w0.transpose() * r * &w0)));
    }
    let rate = r0 * (ENVELOPE_THETA * s);
    let center = moduli[dominant].1.clone();
    // widen until every non-negligible block centre is within reach
    let top = moduli[dominant].2;
    let reach = moduli
        .iter()
        .filter(|m| m.2 >= top - 50.0)
        .map(|m| {
            let d = &m.1 - &center;
            (d.transpose() * &rate * &d)[(0, 0)]
        })
        .fold(0.0, f64::max);
    let rate = if reach > 4.0 { rate * (4.0 / reach) } else { rate };
    let (w, _) = whitening(&rate)?;
    let mut amp: f64 = 0.0;
    let mut probe = |y: RVec| {
        let z = &center + &w * &y;
        let v = compiled.eval(z.as_slice()).norm() * y.norm_squared().exp();
        if v.is_finite() {
            amp = amp.max(v);
        }
    };
    let lt = crate::linalg::cholesky_lower(&rate)?.transpose();
    for (_, c, ..) in &moduli {
        probe(&lt * (c - &center));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ENVELOPE_SEED ^ 0xa11);
    for i in 0..4000 {
        let radius = 0.25 + 5.75 * (i % 24) as f64 / 23.0;
        let y = RVec::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let norm = y.norm().max(1e-300);
        probe(y * (radius / norm));
    }
    Envelope::new(rate, center, amp * AMPLITUDE_SAFETY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gausspoly::Poly;

    #[test]
    fn compiled_matches_reference_evaluation() {
        let f = GaussianPolynomial::isotropic(3, 2.0)
            .mul_poly(&Poly::monomial(3, vec![1, 0, 2], C64::new(0.5, -1.0)).add(&Poly::one(3)))
            .unwrap()
            .modulate(&RVec::from_vec(vec![0.3, -0.2, 1.0]))
            .unwrap();
        let e = EvaluableFunction::from_gauss_poly(&f).unwrap();
        for z in [[0.1, 0.2, 0.3], [-1.0, 0.4, 0.9]] {
            assert!((e.eval(&z) - f.eval(&z)).norm() < 1e-14);
        }
    }

    #[test]
    fn pure_gaussian_envelope_is_exact() {
        let f = GaussianPolynomial::isotropic(1, 3.0).modulate(&RVec::from_vec(vec![2.0])).unwrap();
        let e = EvaluableFunction::from_gauss_poly(&f).unwrap();
        assert!((e.envelope().rate[(0, 0)] - 3.0).abs() < 1e-15);
        assert!((e.envelope().amplitude - 1.0).abs() < 1e-9);
    }

    #[test]
    fn violated_envelope_is_rejected() {
        let env = Envelope::isotropic(2, 2.0);
        let r = EvaluableFunction::new(2, |z: &[f64]| C64::new((-(z[0] * z[0] + z[1] * z[1])).exp(), 0.0), env);
        assert!(matches!(r, Err(Error::Envelope(_))));
        let ok = EvaluableFunction::new(
            2,
            |z: &[f64]| C64::new((-3.0 * (z[0] * z[0] + z[1] * z[1])).exp(), 0.0),
            Envelope::isotropic(2, 2.0),
        );
        assert!(ok.is_ok());
    }
}
