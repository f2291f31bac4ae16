//! Whitened Gauss–Hermite grids and Gaussian importance sampling.
//!
//! Every integral is first mapped to `∫ H(y) e^{−|y|²} dy` by an affine change of variables
//! that whitens a Gaussian envelope of the integrand. Gauss–Hermite then sums `ω·H` over a
//! tensor grid pruned to weight products above [`PRUNE_REL`] of the largest one, and Monte
//! Carlo averages `π^{k/2}·H` over antithetic pairs drawn from `N(0, I/2)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::hermite::GaussHermite;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::function::Envelope;
use super::{QuadratureScheme, SchemeKind};
use crate::error::{invalid, Error, Result};
use crate::group::symplectic_gram;
use crate::linalg::{whitening, RMat, RVec, C64};

pub(crate) const PRUNE_REL: f64 = 1e-15;
/// Largest number of pruned nodes a single trilinear evaluation may visit.
pub(crate) const NODE_BUDGET: u64 = 1_500_000_000;
/// Relative roundoff floor added to every error estimate.
pub(crate) const ROUNDOFF_FLOOR: f64 = 1e-12;
const OUTER_CHUNK: usize = 512;
const MC_CHUNK: usize = 4096;

struct Rule {
    nodes: Vec<f64>,
    log_weights: Vec<f64>,
    /// `ω e^{x²}`, the weight against the whitened integrand `H`.
    scaled: Vec<f64>,
}

fn rule(n: usize) -> Rule {
    let gh = GaussHermite::new(NonZeroUsize::new(n.max(1)).expect("positive"));
    let pairs = gh.as_node_weight_pairs();
    let m = pairs.len();
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        // symmetrize the eigen-solver output
        let j = m - 1 - i;
        nodes.push(0.5 * (pairs[i].0 - pairs[j].0));
        weights.push(0.5 * (pairs[i].1 + pairs[j].1));
    }
    let log_weights: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let scaled = nodes.iter().zip(&log_weights).map(|(x, lw)| (lw + x * x).exp()).collect();
    Rule { nodes, log_weights, scaled }
}

/// The pruned `dim`-dimensional tensor of the `nodes`-point rule, built once per process.
fn shared_tensor(nodes: usize, dim: usize) -> Result<Arc<Tensor>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Tensor>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().expect("tensor cache poisoned").get(&(nodes, dim)) {
        return Ok(t.clone());
    }
    let r = rule(nodes);
    let t = Arc::new(Tensor::build(&r, dim, dim as f64 * max_log_weight(&r) + PRUNE_REL.ln(), NODE_BUDGET)?);
    cache.lock().expect("tensor cache poisoned").insert((nodes, dim), t.clone());
    Ok(t)
}

/// Pruned tensor grid, nodes sorted by decreasing log-weight.
struct Tensor {
    dim: usize,
    points: Vec<f64>,
    scaled: Vec<f64>,
    log_weights: Vec<f64>,
}

impl Tensor {
    fn build(rule: &Rule, dim: usize, log_cut: f64, cap: u64) -> Result<Self> {
        let max_lw = rule.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out = Tensor { dim, points: Vec::new(), scaled: Vec::new(), log_weights: Vec::new() };
        let mut idx = vec![0usize; dim];
        fn rec(
            rule: &Rule,
            depth: usize,
            lw: f64,
            max_lw: f64,
            log_cut: f64,
            idx: &mut Vec<usize>,
            out: &mut Tensor,
            cap: u64,
        ) -> Result<()> {
            let dim = idx.len();
            if depth == dim {
                if out.log_weights.len() as u64 >= cap {
                    return Err(Error::Unsupported("quadrature grid exceeds the node budget".into()));
                }
                let mut s = 1.0;
                for &i in idx.iter() {
                    out.points.push(rule.nodes[i]);
                    s *= rule.scaled[i];
                }
                out.scaled.push(s);
                out.log_weights.push(lw);
                return Ok(());
            }
            let remaining = (dim - depth - 1) as f64 * max_lw;
            for i in 0..rule.nodes.len() {
                let next = lw + rule.log_weights[i];
                if next + remaining < log_cut {
                    continue;
                }
                idx[depth] = i;
                rec(rule, depth + 1, next, max_lw, log_cut, idx, out, cap)?;
            }
            Ok(())
        }
        if dim == 0 {
            out.scaled.push(1.0);
            out.log_weights.push(0.0);
            return Ok(out);
        }
        rec(rule, 0, 0.0, max_lw, log_cut, &mut idx, &mut out, cap)?;
        out.sort();
        Ok(out)
    }

    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.log_weights.len()).collect();
        order.sort_by(|&a, &b| self.log_weights[b].total_cmp(&self.log_weights[a]));
        let d = self.dim;
        let mut points = Vec::with_capacity(self.points.len());
        for &i in &order {
            points.extend_from_slice(&self.points[i * d..(i + 1) * d]);
        }
        self.scaled = order.iter().map(|&i| self.scaled[i]).collect();
        self.log_weights = order.iter().map(|&i| self.log_weights[i]).collect();
        self.points = points;
    }

    fn len(&self) -> usize {
        self.log_weights.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Number of nodes with log-weight at least `cut`.
    fn count_above(&self, cut: f64) -> usize {
        self.log_weights.partition_point(|&lw| lw >= cut)
    }
}

fn max_log_weight(rule: &Rule) -> f64 {
    rule.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Estimated integral with its error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Estimate {
    pub value: C64,
    pub error: f64,
}

fn with_floor(value: C64, err: f64) -> Estimate {
    Estimate { value, error: err + ROUNDOFF_FLOOR * value.norm() }
}

/// A point of the pair space handed to trilinear integrands.
pub(crate) struct PairPoint<'a> {
    pub z1: &'a [f64],
    pub z2: &'a [f64],
    /// `(−x1−x2, −t1−t2−β)`.
    pub z3: &'a [f64],
    /// `(−x1−x2, −t1−t2)`.
    pub z3_flat: &'a [f64],
    pub beta: f64,
}

/// The whitening map from `y ∈ ℝ^{4d+2}` to pair space built from three envelopes.
///
/// Variables are `u = (X, T, s)` with `X = (x1, x2)`, `T = (t1, t2)` and `s` standing for
/// `β = σ(Ax1, Ax2)` inside the third argument. The `T` integral is whitened around its
/// envelope optimum for the actual `β(X)`; the outer `X` grid uses the envelope minimized
/// over `s`, which dominates the true `X`-marginal.
pub(crate) struct PairTransform {
    d: usize,
    b: RMat,
    x_star: RVec,
    w_outer: RMat,
    t0: RVec,
    t_gain: RMat,
    w_inner: RMat,
    jacobian: f64,
}

impl PairTransform {
    pub fn new(env: [&Envelope; 3], a: &RMat) -> Result<Self> {
        let n = env[0].dim();
        if env[1].dim() != n || env[2].dim() != n || n % 2 == 0 || n < 3 {
            return Err(invalid("pair transform needs three envelopes on ℝ^{2d+1}"));
        }
        let d = (n - 1) / 2;
        let nx = 4 * d;
        let dim = nx + 3;
        let (it1, it2, is) = (nx, nx + 1, nx + 2);
        // E_j: u ↦ argument of f_j
        let mut e = [RMat::zeros(n, dim), RMat::zeros(n, dim), RMat::zeros(n, dim)];
        for k in 0..2 * d {
            e[0][(k, k)] = 1.0;
            e[1][(k, 2 * d + k)] = 1.0;
            e[2][(k, k)] = -1.0;
            e[2][(k, 2 * d + k)] = -1.0;
        }
        e[0][(2 * d, it1)] = 1.0;
        e[1][(2 * d, it2)] = 1.0;
        e[2][(2 * d, it1)] = -1.0;
        e[2][(2 * d, it2)] = -1.0;
        e[2][(2 * d, is)] = -1.0;
        let mut k = RMat::zeros(dim, dim);
        let mut h = RVec::zeros(dim);
        for j in 0..3 {
            let er = e[j].transpose() * &env[j].rate;
            k += &er * &e[j];
            h += &er * &env[j].center;
        }
        let t_idx = [it1, it2];
        let v_idx: Vec<usize> = (0..nx).chain(std::iter::once(is)).collect();
        let pick = |rows: &[usize], cols: &[usize]| RMat::from_fn(rows.len(), cols.len(), |r, c| k[(rows[r], cols[c])]);
        let k_tt = pick(&t_idx, &t_idx);
        let k_tv = pick(&t_idx, &v_idx);
        let k_vv = pick(&v_idx, &v_idx);
        let h_t = RVec::from_fn(2, |r, _| h[t_idx[r]]);
        let h_v = RVec::from_fn(v_idx.len(), |r, _| h[v_idx[r]]);
        let k_tt_inv = k_tt
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Envelope("degenerate envelope in t".into()))?;
        let (w_inner, det_li) = whitening(&k_tt)?;
        let t0 = &k_tt_inv * &h_t;
        let t_gain = -(&k_tt_inv * &k_tv);
        let kp = &k_vv - k_tv.transpose() * &k_tt_inv * &k_tv;
        let hp = &h_v - k_tv.transpose() * &t0;
        let kss = kp[(nx, nx)];
        let kxx = kp.view((0, 0), (nx, nx)).into_owned();
        let kxs = kp.view((0, nx), (nx, 1)).into_owned();
        let hx = hp.rows(0, nx).into_owned();
        let (kpp, hpp) = if kss > 1e-14 * kxx.diagonal().amax() {
            (&kxx - &kxs * kxs.transpose() / kss, &hx - &kxs * (hp[nx] / kss))
        } else {
            (kxx, hx)
        };
        let (w_outer, det_lo) = whitening(&kpp)?;
        let x_star = kpp
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Envelope("degenerate envelope in x".into()))?
            * hpp;
        Ok(Self {
            d,
            b: symplectic_gram(a),
            x_star,
            w_outer,
            t0,
            t_gain,
            w_inner,
            jacobian: 1.0 / (det_lo * det_li),
        })
    }

    fn outer_dim(&self) -> usize {
        4 * self.d
    }
}

struct Scratch {
    x: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
    z3: Vec<f64>,
    z3_flat: Vec<f64>,
    v: RVec,
}

impl PairTransform {
    fn scratch(&self) -> Scratch {
        let n = 2 * self.d + 1;
        Scratch {
            x: vec![0.0; 4 * self.d],
            z1: vec![0.0; n],
            z2: vec![0.0; n],
            z3: vec![0.0; n],
            z3_flat: vec![0.0; n],
            v: RVec::zeros(4 * self.d + 1),
        }
    }

    /// Maps an outer node, returning `β` and the whitened `t` centre.
    fn place_outer(&self, y: &[f64], s: &mut Scratch) -> (f64, [f64; 2]) {
        let nx = 4 * self.d;
        let d2 = 2 * self.d;
        for r in 0..nx {
            let mut v = self.x_star[r];
            for c in 0..nx {
                v += self.w_outer[(r, c)] * y[c];
            }
            s.x[r] = v;
        }
        let mut beta = 0.0;
        for a in 0..d2 {
            for c in 0..d2 {
                beta += s.x[a] * self.b[(a, c)] * s.x[d2 + c];
            }
        }
        for r in 0..nx {
            s.v[r] = s.x[r];
        }
        s.v[nx] = beta;
        let mut tc = [self.t0[0], self.t0[1]];
        for (r, t) in tc.iter_mut().enumerate() {
            for c in 0..=nx {
                *t += self.t_gain[(r, c)] * s.v[c];
            }
        }
        for k in 0..d2 {
            s.z1[k] = s.x[k];
            s.z2[k] = s.x[d2 + k];
            s.z3[k] = -s.x[k] - s.x[d2 + k];
            s.z3_flat[k] = s.z3[k];
        }
        (beta, tc)
    }

    fn place_inner(&self, y: &[f64], beta: f64, tc: [f64; 2], s: &mut Scratch) {
        let d2 = 2 * self.d;
        let t1 = tc[0] + self.w_inner[(0, 0)] * y[0] + self.w_inner[(0, 1)] * y[1];
        let t2 = tc[1] + self.w_inner[(1, 0)] * y[0] + self.w_inner[(1, 1)] * y[1];
        s.z1[d2] = t1;
        s.z2[d2] = t2;
        s.z3_flat[d2] = -t1 - t2;
        s.z3[d2] = -t1 - t2 - beta;
    }
}

fn gh_pairs<const K: usize, F>(tr: &PairTransform, nodes: usize, parallel: bool, f: &F) -> Result<[C64; K]>
where
    F: Fn(&PairPoint) -> [C64; K] + Sync,
{
    let r = rule(nodes);
    let max_lw = max_log_weight(&r);
    let nx = tr.outer_dim();
    let log_cut = (nx + 2) as f64 * max_lw + PRUNE_REL.ln();
    let inner = Tensor::build(&r, 2, 2.0 * max_lw + PRUNE_REL.ln(), u64::MAX)?;
    let outer = Tensor::build(&r, nx, nx as f64 * max_lw + PRUNE_REL.ln(), NODE_BUDGET)?;
    let total: u64 = (0..outer.len()).map(|i| inner.count_above(log_cut - outer.log_weights[i]) as u64).sum();
    if total > NODE_BUDGET {
        return Err(Error::Unsupported(format!(
            "{total} quadrature nodes exceed the budget of {NODE_BUDGET}; lower the node count"
        )));
    }
    let chunk_sum = |range: std::ops::Range<usize>| -> [C64; K] {
        let mut s = tr.scratch();
        let mut acc = [C64::new(0.0, 0.0); K];
        for o in range {
            let (beta, tc) = tr.place_outer(outer.point(o), &mut s);
            let wo = outer.scaled[o];
            let m = inner.count_above(log_cut - outer.log_weights[o]);
            let mut inner_acc = [C64::new(0.0, 0.0); K];
            for i in 0..m {
                tr.place_inner(inner.point(i), beta, tc, &mut s);
                let v = f(&PairPoint { z1: &s.z1, z2: &s.z2, z3: &s.z3, z3_flat: &s.z3_flat, beta });
                let wi = inner.scaled[i];
                for k in 0..K {
                    inner_acc[k] += v[k] * wi;
                }
            }
            for k in 0..K {
                acc[k] += inner_acc[k] * wo;
            }
        }
        acc
    };
    let ranges: Vec<std::ops::Range<usize>> =
        (0..outer.len()).step_by(OUTER_CHUNK).map(|s| s..(s + OUTER_CHUNK).min(outer.len())).collect();
    let parts: Vec<[C64; K]> = if parallel {
        ranges.into_par_iter().map(chunk_sum).collect()
    } else {
        ranges.into_iter().map(chunk_sum).collect()
    };
    let mut total = [C64::new(0.0, 0.0); K];
    for p in parts {
        for k in 0..K {
            total[k] += p[k];
        }
    }
    Ok(total.map(|v| v * tr.jacobian))
}

fn normal_half(rng: &mut ChaCha8Rng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    z * std::f64::consts::FRAC_1_SQRT_2
}

/// Mean and standard error of antithetic pair averages, split into seeded chunks.
fn mc_chunks<const K: usize, G>(samples: usize, seed: u64, parallel: bool, dim: usize, g: G) -> [(C64, f64); K]
where
    G: Fn(&[f64], &mut Scratch2) -> [C64; K] + Sync,
{
    let pairs = (samples / 2).max(1);
    let chunks: Vec<(usize, usize)> = (0..pairs)
        .step_by(MC_CHUNK)
        .enumerate()
        .map(|(c, s)| (c, (s + MC_CHUNK).min(pairs) - s))
        .collect();
    let run = |(c, len): (usize, usize)| -> ([C64; K], [f64; K]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let mut y = vec![0.0; dim];
        let mut ym = vec![0.0; dim];
        let mut scratch = Scratch2::default();
        let mut sum = [C64::new(0.0, 0.0); K];
        let mut sq = [0.0; K];
        for _ in 0..len {
            for k in 0..dim {
                y[k] = normal_half(&mut rng);
                ym[k] = -y[k];
            }
            let a = g(&y, &mut scratch);
            let b = g(&ym, &mut scratch);
            for k in 0..K {
                let m = (a[k] + b[k]) * 0.5;
                sum[k] += m;
                sq[k] += m.norm_sqr();
            }
        }
        (sum, sq)
    };
    let parts: Vec<([C64; K], [f64; K])> = if parallel {
        chunks.into_par_iter().map(run).collect()
    } else {
        chunks.into_iter().map(run).collect()
    };
    let mut sum = [C64::new(0.0, 0.0); K];
    let mut sq = [0.0; K];
    for (s, q) in parts {
        for k in 0..K {
            sum[k] += s[k];
            sq[k] += q[k];
        }
    }
    let np = pairs as f64;
    let scale = PI.powf(dim as f64 / 2.0);
    let mut out = [(C64::new(0.0, 0.0), 0.0); K];
    for k in 0..K {
        let mean = sum[k] / np;
        let var = ((sq[k] / np - mean.norm_sqr()) * np / (np - 1.0).max(1.0)).max(0.0);
        out[k] = (mean * scale, scale * (var / np).sqrt());
    }
    out
}

#[derive(Default)]
struct Scratch2 {
    pair: Option<Scratch>,
    z: Vec<f64>,
}

/// `∬` of a pair-space integrand on the whitened grid of `tr`.
pub(crate) fn integrate_pairs<const K: usize, F>(tr: &PairTransform, scheme: &QuadratureScheme, f: F) -> Result<[Estimate; K]>
where
    F: Fn(&PairPoint) -> [C64; K] + Sync,
{
    match scheme.kind {
        SchemeKind::GaussHermite => {
            let n = scheme.nodes_per_axis;
            let fine = gh_pairs(tr, n, scheme.parallel, &f)?;
            let coarse = gh_pairs(tr, (n / 2).max(1), scheme.parallel, &f)?;
            let mut out = [Estimate { value: C64::new(0.0, 0.0), error: 0.0 }; K];
            for k in 0..K {
                out[k] = with_floor(fine[k], (fine[k] - coarse[k]).norm());
            }
            Ok(out)
        }
        SchemeKind::MonteCarlo => {
            let nx = tr.outer_dim();
            let res = mc_chunks(scheme.samples, scheme.seed, scheme.parallel, nx + 2, |y, sc| {
                let s = sc.pair.get_or_insert_with(|| tr.scratch());
                let (beta, tc) = tr.place_outer(&y[..nx], s);
                tr.place_inner(&y[nx..], beta, tc, s);
                let y2: f64 = y.iter().map(|v| v * v).sum();
                let v = f(&PairPoint { z1: &s.z1, z2: &s.z2, z3: &s.z3, z3_flat: &s.z3_flat, beta });
                let w = y2.exp() * tr.jacobian;
                v.map(|x| x * w)
            });
            Ok(res.map(|(v, e)| with_floor(v, e)))
        }
    }
}

/// `∫_{ℝⁿ} f` for a real integrand decaying like `exp(−(z−c)ᵀR(z−c))`.
pub(crate) fn integrate_single<F>(rate: &RMat, center: &RVec, scheme: &QuadratureScheme, f: F) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = center.len();
    let (w, det_l) = whitening(rate)?;
    let jac = 1.0 / det_l;
    let map = |y: &[f64], z: &mut [f64]| {
        for r in 0..n {
            let mut v = center[r];
            for c in 0..n {
                v += w[(r, c)] * y[c];
            }
            z[r] = v;
        }
    };
    match scheme.kind {
        SchemeKind::GaussHermite => {
            let gh = |nodes: usize| -> Result<f64> {
                let t = shared_tensor(nodes, n)?;
                let mut z = vec![0.0; n];
                let mut acc = 0.0;
                for i in 0..t.len() {
                    map(t.point(i), &mut z);
                    acc += t.scaled[i] * f(&z);
                }
                Ok(acc * jac)
            };
            let fine = gh(scheme.nodes_per_axis)?;
            let coarse = gh((scheme.nodes_per_axis / 2).max(1))?;
            Ok(with_floor(C64::new(fine, 0.0), (fine - coarse).abs()))
        }
        SchemeKind::MonteCarlo => {
            let [(v, e)] = mc_chunks(scheme.samples, scheme.seed, scheme.parallel, n, |y, sc| {
                if sc.z.len() != n {
                    sc.z = vec![0.0; n];
                }
                let mut z = std::mem::take(&mut sc.z);
                map(y, &mut z);
                let y2: f64 = y.iter().map(|v| v * v).sum();
                let v = f(&z) * y2.exp() * jac;
                sc.z = z;
                [C64::new(v, 0.0)]
            });
            Ok(with_floor(v, e))
        }
    }
}

/// A fixed whitened grid for repeated `L^p` norms of functions of similar shape.
pub struct NormGrid {
    n: usize,
    p: f64,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl NormGrid {
    /// Grid adapted to `exp(−p (z−c)ᵀR(z−c))`.
    pub fn new(rate: &RMat, center: &RVec, p: f64, nodes: usize) -> Result<Self> {
        let n = center.len();
        let (w, det_l) = whitening(&(rate * p))?;
        let t = shared_tensor(nodes, n)?;
        let mut points = Vec::with_capacity(t.len() * n);
        for i in 0..t.len() {
            let y = t.point(i);
            for r in 0..n {
                let mut v = center[r];
                for c in 0..n {
                    v += w[(r, c)] * y[c];
                }
                points.push(v);
            }
        }
        let weights = t.scaled.iter().map(|s| s / det_l).collect();
        Ok(Self { n, p, points, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `∫ f` for a real integrand, using the same nodes and weights.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w * f(&self.points[i * self.n..(i + 1) * self.n]);
        }
        acc
    }

    /// `(∫|f|^p)^{1/p}`.
    pub fn norm<F: Fn(&[f64]) -> C64>(&self, f: F) -> f64 {
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w * f(&self.points[i * self.n..(i + 1) * self.n]).norm().powf(self.p);
        }
        acc.max(0.0).powf(1.0 / self.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrized_rule_integrates_moments() {
        let r = rule(12);
        let m0: f64 = r.log_weights.iter().map(|l| l.exp()).sum();
        let m2: f64 = r.nodes.iter().zip(&r.log_weights).map(|(x, l)| x * x * l.exp()).sum();
        assert!((m0 - PI.sqrt()).abs() < 1e-13);
        assert!((m2 - PI.sqrt() / 2.0).abs() < 1e-13);
        assert!(r.nodes.iter().zip(r.nodes.iter().rev()).all(|(a, b)| a == &-b));
    }

    #[test]
    fn pruned_tensor_keeps_heavy_nodes_sorted() {
        let r = rule(20);
        let t = Tensor::build(&r, 3, 3.0 * max_log_weight(&r) + PRUNE_REL.ln(), u64::MAX).unwrap();
        assert!(t.len() < 8000);
        assert!(t.log_weights.windows(2).all(|w| w[0] >= w[1]));
        let mass: f64 = t.log_weights.iter().map(|l| l.exp()).sum();
        assert!((mass - PI.powf(1.5)).abs() < 1e-12);
    }
}
