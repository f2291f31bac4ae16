//! End-to-end acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use heislab::expansion::{tprime, tprime_gaussian_expansion, Engine};
use heislab::lab::{balance_corpus, exponent_fit_experiment, invariance_corpus, lambda_family_experiment, run_check, young_corpus, ExperimentConfig, MethodChoice};
use heislab::linalg::RMat;
use heislab::quadrature::{lp_norm, phi, phi_gauss_poly, EvaluableFunction, QuadratureScheme};
use heislab::{optimal_constant, standard_gaussians, AttachedParams, ExponentTriple, Result};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn check_by_name(name: &str) -> Result<Outcome> {
    let c = run_check(name, &ExperimentConfig::default())?;
    outcome(c.passed, format!("measured {:.3e}, tolerance {:.1e}; {}", c.measured, c.tolerance, c.detail))
}

fn ac1() -> Result<Outcome> {
    let p = ExponentTriple::symmetric();
    let want = optimal_constant(&p, 3)?;
    let g = standard_gaussians(&p, 3)?;
    let ev = [0, 1, 2].map(|j| EvaluableFunction::from_gauss_poly(&g[j]).unwrap());
    let params = AttachedParams::euclidean(1);

    let closed = phi_gauss_poly(&g, &p, &params, &QuadratureScheme::gauss_hermite(40)?)?.value;
    let closed_rel = (closed - want).abs() / want;

    let gh_scheme = QuadratureScheme::gauss_hermite(40)?;
    let gh = phi([&ev[0], &ev[1], &ev[2]], &p, &params, &gh_scheme)?;
    let gh_norm_rel = (0..3)
        .map(|j| {
            let q = lp_norm(&ev[j], p.p()[j], &gh_scheme).unwrap().value;
            (q - 2.0 / 9.0).abs() / (2.0 / 9.0)
        })
        .fold(0.0, f64::max);
    let gh_rel = (gh.value - want).abs() / want;

    let mc = phi([&ev[0], &ev[1], &ev[2]], &p, &params, &QuadratureScheme::monte_carlo(1_000_000, 1)?)?;
    let mc_se = (mc.value - want).abs() / mc.error;

    outcome(
        closed_rel <= 1e-10 && gh_rel <= 1e-6 && gh_norm_rel <= 1e-6 && mc_se <= 4.0,
        format!(
            "A_p^3 = {want:.15}; closed rel {closed_rel:.1e}; GH40 rel {gh_rel:.1e} (norms {gh_norm_rel:.1e}); MC 1e6 off by {mc_se:.2} SE"
        ),
    )
}

fn ac2() -> Result<Outcome> {
    let v = optimal_constant(&ExponentTriple::symmetric(), 3)?;
    let want = 3.0 * 3f64.sqrt() / 8.0;
    let err = (v - want).abs();
    outcome(err <= 1e-12, format!("{v:.17} vs 3√3/8, |diff| = {err:.1e}"))
}

fn ac5() -> Result<Outcome> {
    let c = run_check("lemma-3.3-tfactor", &ExperimentConfig::default())?;
    let p = ExponentTriple::symmetric();
    let id = RMat::identity(2, 2);
    let c2 = tprime_gaussian_expansion(&p, &id)?.c2;
    let g = standard_gaussians(&p, 3)?;
    let ev = [0, 1, 2].map(|j| EvaluableFunction::from_gauss_poly(&g[j]).unwrap());
    let a = &id * 0.05;
    let defect = 0.05f64.powi(2);
    let q = tprime([&ev[0], &ev[1], &ev[2]], &a, &Engine::Quadrature(QuadratureScheme::gauss_hermite(20)?))?;
    let ratio = q.value.re / (defect * defect);
    let rel = (ratio - c2).abs() / c2.abs();
    outcome(
        c.passed && rel <= 0.03,
        format!("{}; T′/‖AᵀJA‖² at A = 0.05·Id is {ratio:.6e} vs c2 = {c2:.6e} (rel {rel:.2e})", c.detail),
    )
}

fn ac7() -> Result<Outcome> {
    let cfg = ExperimentConfig::default();
    let corpus = young_corpus(&cfg, 200)?;
    let worst = corpus.iter().map(|s| s.violation).fold(f64::MIN, f64::max);
    let max_ratio = corpus.iter().map(|s| s.phi / s.bound).fold(0.0, f64::max);
    outcome(
        corpus.len() >= 200 && worst <= 0.0,
        format!("{} evaluations; max Φ/A_p^3 = {max_ratio:.9}; max (Φ − A_p^3 − 3·err) = {worst:.3e}", corpus.len()),
    )
}

fn ac8() -> Result<Outcome> {
    let samples = invariance_corpus(&ExperimentConfig::default())?;
    let bad: Vec<String> = samples.iter().filter(|s| !s.passed).map(|s| format!("{} ({:.2e})", s.generator, s.residual)).collect();
    let closed = samples.iter().filter(|s| s.closed_form).count();
    outcome(bad.is_empty(), format!("{} instances, {closed} closed-form; failing: {bad:?}", samples.len()))
}

fn ac10() -> Result<Outcome> {
    let cfg = ExperimentConfig::default();
    let samples = balance_corpus(&cfg, 20)?;
    let worst = samples.iter().map(|s| s.residual_inf).fold(0.0, f64::max);
    let iters = samples.iter().map(|s| s.iterations).max().unwrap_or(0);
    outcome(
        samples.len() == 20 && worst <= 1e-6 && iters <= 30,
        format!("20 perturbations of norm 0.01; max residual {worst:.2e}; max iterations {iters}"),
    )
}

fn ac11() -> Result<Outcome> {
    let mut cfg = ExperimentConfig::default();
    cfg.method = MethodChoice::Mc;
    cfg.mc_samples = 1_000_000;
    let r = lambda_family_experiment(&cfg)?;
    let at = |l: f64| r.points.iter().find(|q| q.lambda == l).expect("grid point");
    let (d1, d2, d50) = (at(1.0).deficit, at(2.0).deficit, at(50.0).deficit);
    let tail: Vec<f64> = r.points.iter().filter(|q| q.lambda >= 2.0).map(|q| q.dist_upper).collect();
    let dist_ok = tail.windows(2).all(|w| w[1] <= w[0]) && tail[tail.len() - 1] < tail[0];
    let deficits: Vec<String> = r.points.iter().map(|q| format!("{}:{:.3e}±{:.1e}", q.lambda, q.deficit, q.deficit_err)).collect();
    let dists: Vec<String> = r.points.iter().map(|q| format!("{}:{:.3e}", q.lambda, q.dist_upper)).collect();
    outcome(
        r.all_positive && d50 < d2 && d2 < d1 && dist_ok,
        format!("δ {deficits:?}; dist {dists:?}"),
    )
}

fn ac12() -> Result<Outcome> {
    let r = exponent_fit_experiment(&ExperimentConfig::default())?;
    let f = &r.fit;
    outcome(
        !f.degenerate && (1.8..=2.2).contains(&f.slope) && f.r_squared >= 0.99,
        format!("slope {:.4}, R² {:.6}, {} points; doubling ratios {:?}", f.slope, f.r_squared, f.pairs.len(), r.doubling_ratios),
    )
}

type Criterion = (&'static str, &'static str, Option<Duration>, fn() -> Result<Outcome>);

fn main() {
    let min = |m: u64| Some(Duration::from_secs(60 * m));
    let criteria: [Criterion; 12] = [
        ("AC1", "equality case three ways", min(2), ac1),
        ("AC2", "optimal constant", None, ac2),
        ("AC3", "σ-power-(0,1) integrals vanish", Some(Duration::from_secs(30)), || check_by_name("lemma-3.1")),
        ("AC4", "σ² integral proportional to ‖AᵀJA‖²", Some(Duration::from_secs(30)), || check_by_name("lemma-3.2")),
        ("AC5", "t-factor and shift coefficient", None, ac5),
        ("AC6", "twist term quadratic in b", None, || check_by_name("lemma-4.1")),
        ("AC7", "Young bound over random corpus", None, ac7),
        ("AC8", "symmetry invariance", None, ac8),
        ("AC9", "Hermite Gram matrices", None, || check_by_name("hermite-gram")),
        ("AC10", "balancing", min(5), ac10),
        ("AC11", "λ-family", min(10), ac11),
        ("AC12", "exponent sharpness", min(10), ac12),
    ];
    let mut failures = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (passed, detail) = match result {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = limit.map_or(true, |l| elapsed <= l);
        let passed = passed && in_time;
        let budget = limit.map_or(String::new(), |l| format!(" of {} s", l.as_secs()));
        println!(
            "{id} {} {name} [{:.1} s{budget}] {detail}",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        failures += usize::from(!passed);
    }
    println!("AC13 EXCLUDED universal constants and nonexistence results are not computable at this scale");
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
