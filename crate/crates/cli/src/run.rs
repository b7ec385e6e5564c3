//! Running one solver on one loaded instance.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use agmas::{accelerated_gradient, agmas_solve, conjugate_gradient, AgdParams, AgmasConfig, QuadraticGradient};
use convex_anpe::{anpe_solve, AnpeConfig};
use cubic_newton::{cubic_solve, CubicConfig};
use eigen_tools::estimate_norm;
use erm::{agd_baseline, erm_solve, ErmConfig};
use oracle_core::linalg::norm;
use oracle_core::{OptError, OracleLedger, QuadraticOracle, SecondOrderOracle, SolverReport};

use crate::instance::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SolverKind {
    Agmas,
    Agd,
    Cg,
    Anpe,
    Cubic,
    Erm,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Agmas => "agmas",
            SolverKind::Agd => "agd",
            SolverKind::Cg => "cg",
            SolverKind::Anpe => "anpe",
            SolverKind::Cubic => "cubic",
            SolverKind::Erm => "erm",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "agmas" => SolverKind::Agmas,
            "agd" => SolverKind::Agd,
            "cg" => SolverKind::Cg,
            "anpe" => SolverKind::Anpe,
            "cubic" => SolverKind::Cubic,
            "erm" => SolverKind::Erm,
            other => return Err(format!("unknown solver {other:?} (expected agmas, agd, cg, anpe, cubic or erm)")),
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub eps: f64,
    pub mu: Option<f64>,
    pub seed: u64,
    pub max_iters: Option<usize>,
}

/// Usage problems exit with 1, solver failures with 2.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Solver(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Solver(_) => 2,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl From<OptError> for RunError {
    fn from(e: OptError) -> Self {
        match e.root() {
            OptError::InvalidParameter(_) | OptError::DimensionMismatch { .. } | OptError::NotSymmetric(_) => RunError::Config(e.to_string()),
            _ => RunError::Solver(e.to_string()),
        }
    }
}

pub struct Outcome {
    pub report: SolverReport,
    /// Solver-specific summary fields.
    pub extra: Vec<(String, String)>,
    /// False when the solver stopped on its iteration cap.
    pub converged: bool,
}

fn config(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>, RunError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(config(format!("--{name} must be positive, got {x}"))),
        other => Ok(other),
    }
}

pub fn run_solver(instance: &Instance, solver: SolverKind, opts: &RunOptions) -> Result<Outcome, RunError> {
    if !(opts.eps > 0.0 && opts.eps.is_finite()) {
        return Err(config(format!("--eps must be positive, got {}", opts.eps)));
    }
    let user_mu = positive("mu", opts.mu)?;
    let ledger = OracleLedger::new();
    let plain = |report: SolverReport| Outcome {
        report,
        extra: Vec::new(),
        converged: true,
    };
    match (solver, instance) {
        (SolverKind::Agmas, Instance::Quadratic { problem, mu, .. }) => {
            let d = problem.dim();
            let cfg = match user_mu.or(*mu) {
                Some(m) => AgmasConfig::new(opts.eps, m, d),
                None => AgmasConfig::with_unknown_mu(opts.eps, d),
            };
            Ok(plain(agmas_solve(problem, &cfg, &ledger)?))
        }
        (SolverKind::Agd, Instance::Quadratic { problem, mu, l }) => {
            let mu = user_mu.or(*mu).ok_or_else(|| config("agd needs --mu on instances without a certificate"))?;
            let l = match l {
                Some(l) => *l,
                None => 2.0 * estimate_norm(&problem.counted(&ledger), 20, opts.seed),
            };
            let mut params = AgdParams::new(l, mu.min(l), opts.eps);
            params.f_gap_bound = norm(problem.b()).powi(2) / (2.0 * mu);
            params.max_iters = opts.max_iters;
            let x0 = vec![0.0; problem.dim()];
            Ok(plain(accelerated_gradient(&QuadraticGradient::new(problem, &ledger), &params, &x0)?))
        }
        (SolverKind::Cg, Instance::Quadratic { problem, mu, .. }) => {
            let bn = norm(problem.b());
            // ||r||^2 <= 2 mu eps certifies the objective gap.
            let eps_res = match user_mu.or(*mu) {
                Some(m) if bn > 0.0 => (2.0 * m * opts.eps).sqrt() / bn,
                _ => opts.eps,
            };
            Ok(plain(conjugate_gradient(problem, &ledger, None, eps_res)?))
        }
        (SolverKind::Anpe | SolverKind::Cubic, _) => {
            let (oracle, x0): (Arc<dyn SecondOrderOracle>, Vec<f64>) = match instance {
                Instance::Quadratic { problem, .. } => (Arc::new(QuadraticOracle::new(problem.clone())), vec![0.0; problem.dim()]),
                Instance::SecondOrder { oracle, x0 } => (oracle.clone(), x0.clone()),
                Instance::Data(_) => return Err(config(format!("{solver} does not run on datasets"))),
            };
            let h = oracle.hessian_lipschitz();
            if solver == SolverKind::Anpe {
                let mut cfg = AnpeConfig::new(h, opts.eps);
                cfg.seed = opts.seed;
                if let Some(m) = opts.max_iters {
                    cfg.max_iters = m;
                }
                let out = anpe_solve(&oracle, &x0, &cfg, &ledger)?;
                Ok(Outcome {
                    extra: vec![
                        ("gamma0".into(), fmt_num(out.gamma0)),
                        ("diameter".into(), fmt_num(out.diameter)),
                    ],
                    report: out.report,
                    converged: true,
                })
            } else {
                let mut cfg = CubicConfig::new(opts.eps, h);
                cfg.seed = opts.seed;
                if let Some(m) = opts.max_iters {
                    cfg.max_iters = m;
                }
                let out = cubic_solve(&oracle, &x0, &cfg, &ledger)?;
                let mut extra = vec![("tau".into(), fmt_num(out.tau)), ("eps_b".into(), fmt_num(out.eps_b))];
                if let Some(c) = &out.certificate {
                    extra.push(("ssp_pass".into(), c.pass.to_string()));
                    extra.push(("ssp_grad_norm".into(), fmt_num(c.grad_norm)));
                    extra.push(("ssp_lambda_min".into(), fmt_num(c.lambda_min)));
                    extra.push(("ssp_grad_bound".into(), fmt_num(c.grad_bound)));
                    extra.push(("ssp_curvature_bound".into(), fmt_num(c.curvature_bound)));
                }
                Ok(Outcome {
                    report: out.report,
                    extra,
                    converged: out.converged,
                })
            }
        }
        (SolverKind::Erm | SolverKind::Agd, Instance::Data(data)) => {
            let mut data = data.clone();
            data.mu = user_mu.ok_or_else(|| config(format!("{solver} on a dataset needs --mu")))?;
            let out = if solver == SolverKind::Erm {
                let mut cfg = ErmConfig::new(opts.eps);
                cfg.seed = opts.seed;
                erm_solve(&data, &cfg, &ledger)?
            } else {
                agd_baseline(&data, opts.eps, opts.max_iters.unwrap_or(1_000_000), &ledger)?
            };
            Ok(Outcome {
                extra: vec![
                    ("epochs".into(), out.epochs.to_string()),
                    ("l_bar".into(), fmt_num(out.l_bar)),
                    ("restarts".into(), out.restarts.to_string()),
                    ("total_rank".into(), out.total_rank.to_string()),
                ],
                report: out.report,
                converged: true,
            })
        }
        (s, inst) => Err(config(format!("solver {s} does not accept a {} instance", inst.kind()))),
    }
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub const CSV_HEADER: &str = "iter,grad_calls,hvp_calls,data_accesses,objective,residual,branch";

/// Trace rows followed by a `final` summary row.
pub fn trace_csv(report: &SolverReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let branch = report.branch.to_string();
    for p in report.trace.points() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.iter,
            p.ledger.grad_calls,
            p.ledger.hvp_calls,
            p.ledger.data_accesses,
            fmt_num(p.objective),
            fmt_num(p.residual),
            branch
        ));
    }
    let s = &report.ledger_snapshot;
    out.push_str(&format!(
        "final,{},{},{},{},{},{}\n",
        s.grad_calls,
        s.hvp_calls,
        s.data_accesses,
        fmt_num(report.objective),
        fmt_num(report.residual),
        branch
    ));
    out
}
