//! Parameter sweeps over generated instances.
//!
//! A sweep file is a generator spec plus these keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `param` | spec key to vary, or `mu` for the solver's strong-convexity input |
//! | `values` | comma list of parameter values |
//! | `seeds` | comma list of seeds (default `0`) |
//! | `solvers` | comma list of solvers |
//! | `eps` | target accuracy (default `1e-8`) |
//! | `metric` | `grad_calls`, `hvp_calls`, `data_accesses` or `total` (default `total`) |
//! | `invert` | fit against `1/value` when `true` (default) |
//! | `max_iters` | optional solver iteration cap |

use std::collections::BTreeMap;

use benchgen::{fit_scaling_exponent, KeyValues};
use log::info;
use rayon::prelude::*;

use crate::instance::instance_from_spec;
use crate::run::{fmt_num, run_solver, RunError, RunOptions, SolverKind};

const SWEEP_KEYS: [&str; 8] = ["param", "values", "seeds", "solvers", "eps", "metric", "invert", "max_iters"];

#[derive(Debug, Clone)]
pub struct Sweep {
    pub base: KeyValues,
    pub param: String,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub solvers: Vec<SolverKind>,
    pub eps: f64,
    pub metric: String,
    pub invert: bool,
    pub max_iters: Option<usize>,
}

fn list(kv: &KeyValues, key: &str) -> Vec<String> {
    kv.get(key)
        .map(|v| v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default()
}

impl Sweep {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, RunError> {
        let err = |m: String| RunError::Config(m);
        let mut base = KeyValues::new();
        for (k, v) in kv.iter() {
            if !SWEEP_KEYS.contains(&k) {
                base.set(k, v);
            }
        }
        let param = kv.get("param").ok_or_else(|| err("sweep needs key \"param\"".into()))?.to_string();
        let values = kv
            .get_list("values")
            .map_err(RunError::from)?
            .ok_or_else(|| err("sweep needs key \"values\"".into()))?;
        if values.is_empty() {
            return Err(err("sweep \"values\" is empty".into()));
        }
        let seeds = match kv.get("seeds") {
            None => vec![0],
            Some(_) => list(kv, "seeds")
                .iter()
                .map(|s| s.parse::<u64>().map_err(|_| err(format!("key \"seeds\": {s:?} is not an integer"))))
                .collect::<Result<_, _>>()?,
        };
        let solvers: Vec<SolverKind> = list(kv, "solvers")
            .iter()
            .map(|s| s.parse().map_err(|m| err(format!("key \"solvers\": {m}"))))
            .collect::<Result<_, _>>()?;
        if solvers.is_empty() {
            return Err(err("sweep needs key \"solvers\"".into()));
        }
        let metric = kv.get("metric").unwrap_or("total").to_string();
        if !["grad_calls", "hvp_calls", "data_accesses", "total"].contains(&metric.as_str()) {
            return Err(err(format!("key \"metric\": unknown metric {metric:?}")));
        }
        Ok(Self {
            base,
            param,
            values,
            seeds,
            solvers,
            eps: kv.get_parsed("eps").map_err(RunError::from)?.unwrap_or(1e-8),
            metric,
            invert: kv.get_parsed("invert").map_err(RunError::from)?.unwrap_or(true),
            max_iters: kv.get_parsed("max_iters").map_err(RunError::from)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub solver: SolverKind,
    pub value: f64,
    pub seed: u64,
    pub grad_calls: u64,
    pub hvp_calls: u64,
    pub data_accesses: u64,
    pub objective: f64,
    pub residual: f64,
    pub branch: String,
    /// `ok`, or the failure message.
    pub status: String,
}

impl BenchRow {
    pub fn metric(&self, metric: &str) -> f64 {
        (match metric {
            "grad_calls" => self.grad_calls,
            "hvp_calls" => self.hvp_calls,
            "data_accesses" => self.data_accesses,
            _ => self.grad_calls + self.hvp_calls + self.data_accesses,
        }) as f64
    }

    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

pub const BENCH_HEADER: &str = "solver,value,seed,grad_calls,hvp_calls,data_accesses,objective,residual,branch,status";

fn run_row(sweep: &Sweep, solver: SolverKind, value: f64, seed: u64) -> BenchRow {
    let mut row = BenchRow {
        solver,
        value,
        seed,
        grad_calls: 0,
        hvp_calls: 0,
        data_accesses: 0,
        objective: f64::NAN,
        residual: f64::NAN,
        branch: "n/a".into(),
        status: "ok".into(),
    };
    let mut spec = sweep.base.clone();
    let mut opts = RunOptions {
        eps: sweep.eps,
        mu: None,
        seed,
        max_iters: sweep.max_iters,
    };
    if sweep.param == "mu" {
        opts.mu = Some(value);
    } else if value.fract() == 0.0 && value.abs() < 1e15 {
        // Integer keys such as `d` must not be written in exponent form.
        spec.set(&sweep.param, value as i64);
    } else {
        spec.set_f64(&sweep.param, value);
    }
    if spec.get("kind") != Some("nesterov") {
        spec.set("seed", seed);
    }
    let result = instance_from_spec(&spec, seed).map_err(RunError::from).and_then(|inst| run_solver(&inst, solver, &opts));
    match result {
        Ok(out) => {
            let s = out.report.ledger_snapshot;
            row.grad_calls = s.grad_calls;
            row.hvp_calls = s.hvp_calls;
            row.data_accesses = s.data_accesses;
            row.objective = out.report.objective;
            row.residual = out.report.residual;
            row.branch = out.report.branch.to_string();
            if !out.converged {
                row.status = "iteration cap".into();
            }
        }
        Err(e) => row.status = e.to_string().replace([',', '\n'], ";"),
    }
    info!("{solver} value={value} seed={seed}: {}", row.status);
    row
}

/// Runs every (solver, value, seed) cell on a pool of `jobs` threads; rows come back sorted.
pub fn run_sweep(sweep: &Sweep, jobs: usize) -> Result<Vec<BenchRow>, RunError> {
    let mut cells = Vec::new();
    for &solver in &sweep.solvers {
        for &value in &sweep.values {
            for &seed in &sweep.seeds {
                cells.push((solver, value, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let mut rows: Vec<BenchRow> = pool.install(|| cells.par_iter().map(|&(s, v, seed)| run_row(sweep, s, v, seed)).collect());
    rows.sort_by(|a, b| a.solver.cmp(&b.solver).then(a.value.total_cmp(&b.value)).then(a.seed.cmp(&b.seed)));
    Ok(rows)
}

pub fn rows_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.solver,
            fmt_num(r.value),
            r.seed,
            r.grad_calls,
            r.hvp_calls,
            r.data_accesses,
            fmt_num(r.objective),
            fmt_num(r.residual),
            r.branch,
            r.status
        ));
    }
    out
}

/// Seed-averaged `(x, metric)` points per solver, `x = 1/value` when inverted.
pub fn fit_points(sweep: &Sweep, rows: &[BenchRow]) -> BTreeMap<SolverKind, Vec<(f64, f64)>> {
    let mut acc: BTreeMap<SolverKind, BTreeMap<u64, (f64, f64, usize)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.ok()) {
        let x = if sweep.invert { 1.0 / r.value } else { r.value };
        let e = acc.entry(r.solver).or_default().entry(r.value.to_bits()).or_insert((x, 0.0, 0));
        e.1 += r.metric(&sweep.metric);
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(s, m)| (s, m.into_values().map(|(x, sum, n)| (x, sum / n as f64)).collect()))
        .collect()
}

/// Per-solver slopes as `key=value`; a solver whose fit is refused gets a `.error` entry.
pub fn fit_report(sweep: &Sweep, rows: &[BenchRow]) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("metric", &sweep.metric);
    kv.set("x", if sweep.invert { format!("1/{}", sweep.param) } else { sweep.param.clone() });
    let points = fit_points(sweep, rows);
    for solver in &sweep.solvers {
        let pts = points.get(solver).cloned().unwrap_or_default();
        match fit_scaling_exponent(&pts) {
            Ok(fit) => {
                kv.set_f64(&format!("{solver}.slope"), fit.slope);
                kv.set_f64(&format!("{solver}.stderr"), fit.stderr);
                kv.set_f64(&format!("{solver}.intercept"), fit.intercept);
                kv.set(&format!("{solver}.points"), fit.points);
            }
            Err(e) => kv.set(&format!("{solver}.error"), format!("fit refused: {}", e.root())),
        }
    }
    kv
}

/// `solver,x,y` lines of the seed-averaged points for plotting.
pub fn plot_csv(sweep: &Sweep, rows: &[BenchRow]) -> String {
    let mut out = String::from("solver,x,y\n");
    for (solver, pts) in fit_points(sweep, rows) {
        let mut pts = pts;
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (x, y) in pts {
            out.push_str(&format!("{solver},{},{}\n", fmt_num(x), fmt_num(y)));
        }
    }
    out
}
