//! Derivative-free simplex minimization and damped Gauss–Newton least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NelderMeadConfig {
    pub max_evals: usize,
    /// Stop when the simplex's value spread falls below `f_tol · (|f_best| + f_tol)`.
    pub f_tol: f64,
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evals: 4000, f_tol: 1e-10, x_tol: 1e-9, initial_step: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead with dimension-adaptive coefficients (Gao & Han).
pub fn nelder_mead<F>(mut f: F, x0: &[f64], cfg: &NelderMeadConfig) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return NelderMeadResult { x: vec![], value: v, iterations: 0, evaluations: evals, converged: true };
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1.0 { cfg.initial_step * x[i].abs() } else { cfg.initial_step };
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while evals < cfg.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= cfg.f_tol * (values[0].abs() + cfg.f_tol) && diameter <= cfg.x_tol.max(1e-3 * cfg.initial_step) {
            converged = true;
            break;
        }
        if diameter <= cfg.x_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|x| x[k]).sum::<f64>() / nf).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (simplex[n][k] - centroid[k])).collect() };
        let xr = along(-alpha);
        let fr = eval(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(-alpha * gamma);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let x = along(-alpha * rho);
            let v = eval(&x, &mut evals);
            (x, v)
        } else {
            let x = along(rho);
            let v = eval(&x, &mut evals);
            (x, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            for k in 0..n {
                simplex[i][k] = simplex[0][k] + sigma * (simplex[i][k] - simplex[0][k]);
            }
            values[i] = eval(&simplex[i], &mut evals);
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    NelderMeadResult { x: simplex[best].clone(), value: values[best], iterations, evaluations: evals, converged }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussNewtonConfig {
    pub max_iterations: usize,
    /// Converged when the residual's ∞-norm is at most this.
    pub tol: f64,
    /// Absolute forward-difference step.
    pub fd_step: f64,
    /// Relative singular value cutoff for the minimum-norm step.
    pub rcond: f64,
}

impl Default for GaussNewtonConfig {
    fn default() -> Self {
        Self { max_iterations: 100, tol: 1e-6, fd_step: 1e-5, rcond: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussNewtonResult {
    pub x: Vec<f64>,
    pub residual_inf: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Numerical rank of the last Jacobian.
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Damped Gauss–Newton with a forward-difference Jacobian and minimum-norm SVD steps.
pub fn gauss_newton<F>(mut r: F, x0: &[f64], cfg: &GaussNewtonConfig) -> Result<GaussNewtonResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut res = DVector::from_vec(r(x.as_slice())?);
    let m = res.len();
    if m == 0 {
        return Err(invalid("empty residual"));
    }
    let mut rank = 0;
    let mut singular_values = Vec::new();
    for it in 0..=cfg.max_iterations {
        let rinf = inf_norm(&res);
        if rinf <= cfg.tol {
            return Ok(GaussNewtonResult { x: x.as_slice().to_vec(), residual_inf: rinf, iterations: it, converged: true, rank, singular_values });
        }
        if it == cfg.max_iterations {
            break;
        }
        let mut jac = DMatrix::zeros(m, n);
        for k in 0..n {
            let mut xp = x.clone();
            xp[k] += cfg.fd_step;
            let rp = DVector::from_vec(r(xp.as_slice())?);
            jac.set_column(k, &((rp - &res) / cfg.fd_step));
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let cutoff = cfg.rcond * smax;
        rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
        singular_values = svd.singular_values.iter().copied().collect();
        let step = svd
            .solve(&(-&res), cutoff)
            .map_err(|e| invalid(format!("least-squares step failed: {e}")))?;
        let base = res.norm_squared();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let xn = &x + &step * t;
            let rn = DVector::from_vec(r(xn.as_slice())?);
            if rn.norm_squared() < base {
                x = xn;
                res = rn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let rinf = inf_norm(&res);
    Ok(GaussNewtonResult {
        x: x.as_slice().to_vec(),
        residual_inf: rinf,
        iterations: cfg.max_iterations,
        converged: rinf <= cfg.tol,
        rank,
        singular_values,
    })
}
