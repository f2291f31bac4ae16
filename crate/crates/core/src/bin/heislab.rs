use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heislab::lab::{
    deficit_point, distance_point, emit, exponent_fit_experiment, fmt_f64, lambda_family_experiment, to_json,
    verify_suite, ExperimentConfig, Format, VerifyReport,
};
use heislab::Result;

/// Numerical experiments on the stability of Young's inequality on the Heisenberg group.
#[derive(Parser, Debug)]
#[command(name = "heislab", version)]
struct Cli {
    /// Plain-text `key = value` file with the same keys as the flags; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the named verification checks.
    Verify(Common),
    /// Deficit and distance along the λ-family.
    Lambda {
        #[command(flatten)]
        common: Common,
        /// λ values, e.g. `1,2,5,10,20,50`.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Fit log δ against log dist for `g + ε·mode`.
    ExponentFit {
        #[command(flatten)]
        common: Common,
        /// ε values, e.g. `0.005,0.01,0.02,0.03,0.04,0.05`.
        #[arg(long)]
        eps_grid: Option<String>,
        #[command(flatten)]
        mode: Mode,
    },
    /// Deficit of `g + eps·mode` at `(a·Id, b)`.
    Deficit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        point: Point,
        #[command(flatten)]
        mode: Mode,
    },
    /// Orbit-distance upper bound of `g + eps·mode` at `(a·Id, b)`.
    Distance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        point: Point,
        #[command(flatten)]
        mode: Mode,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Exponents `p1,p2,p3` with `Σ 1/p_j = 2`.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    gh_nodes: Option<String>,
    #[arg(long)]
    mc_samples: Option<String>,
    /// `gh` or `mc`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    /// `csv` or `json`.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// Gauss–Hermite nodes for the randomized verification corpora.
    #[arg(long)]
    verify_nodes: Option<String>,
    /// Size of the randomized Young-bound corpus.
    #[arg(long)]
    corpus: Option<String>,
}

#[derive(Args, Debug, Default)]
struct Mode {
    /// Hermite multi-index of the perturbation, e.g. `1,1,1`.
    #[arg(long)]
    mode_alpha: Option<String>,
}

#[derive(Args, Debug, Default)]
struct Point {
    #[arg(long)]
    eps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
}

fn set_all(cfg: &mut ExperimentConfig, pairs: &[(&str, &Option<String>)]) -> Result<()> {
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    Ok(())
}

fn apply_common(cfg: &mut ExperimentConfig, c: &Common) -> Result<()> {
    set_all(
        cfg,
        &[
            ("p", &c.p),
            ("d", &c.d),
            ("gh-nodes", &c.gh_nodes),
            ("mc-samples", &c.mc_samples),
            ("method", &c.method),
            ("seed", &c.seed),
            ("out", &c.out),
            ("format", &c.format),
            ("tol", &c.tol),
            ("verify-nodes", &c.verify_nodes),
            ("corpus", &c.corpus),
        ],
    )
}

fn apply_point(cfg: &mut ExperimentConfig, p: &Point, m: &Mode) -> Result<()> {
    set_all(cfg, &[("eps", &p.eps), ("a", &p.a), ("b", &p.b), ("mode-alpha", &m.mode_alpha)])
}

fn emit_verify(report: &VerifyReport, cfg: &ExperimentConfig) -> Result<()> {
    let text = match cfg.format {
        Format::Json => to_json(report)?,
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            w.write_record(["name", "passed", "measured", "tolerance", "detail"])?;
            for c in &report.checks {
                w.write_record([c.name.clone(), c.passed.to_string(), fmt_f64(c.measured), fmt_f64(c.tolerance), c.detail.clone()])?;
            }
            String::from_utf8(w.into_inner().map_err(|e| heislab::Error::Io(e.into_error()))?).expect("csv output is UTF-8")
        }
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<usize> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    match &cli.command {
        Command::Verify(common) => {
            apply_common(&mut cfg, common)?;
            let report = verify_suite(&cfg)?;
            for c in &report.checks {
                eprintln!("{} {} measured {:.3e} tolerance {:.3e}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.measured, c.tolerance);
            }
            emit_verify(&report, &cfg)?;
            Ok(report.failures())
        }
        Command::Lambda { common, grid } => {
            apply_common(&mut cfg, common)?;
            set_all(&mut cfg, &[("grid", grid)])?;
            let report = lambda_family_experiment(&cfg)?;
            emit(&report.records(), &report, cfg.format, cfg.out.as_deref())?;
            Ok(report.failures())
        }
        Command::ExponentFit { common, eps_grid, mode } => {
            apply_common(&mut cfg, common)?;
            set_all(&mut cfg, &[("eps-grid", eps_grid), ("mode-alpha", &mode.mode_alpha)])?;
            let report = exponent_fit_experiment(&cfg)?;
            eprintln!("slope {:.4} R² {:.5}", report.fit.slope, report.fit.r_squared);
            emit(&report.records(), &report, cfg.format, cfg.out.as_deref())?;
            Ok(report.failures())
        }
        Command::Deficit { common, point, mode } => {
            apply_common(&mut cfg, common)?;
            apply_point(&mut cfg, point, mode)?;
            let report = deficit_point(&cfg)?;
            emit(&report.records(), &report, cfg.format, cfg.out.as_deref())?;
            Ok(usize::from(report.young_violation))
        }
        Command::Distance { common, point, mode } => {
            apply_common(&mut cfg, common)?;
            apply_point(&mut cfg, point, mode)?;
            let report = distance_point(&cfg)?;
            emit(&report.records(), &report, cfg.format, cfg.out.as_deref())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(failures) => ExitCode::from(failures.min(255) as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
