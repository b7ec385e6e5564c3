//! `agmas`: generate benchmark instances, run solvers and sweep parameters.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a solver fails.

mod bench;
mod instance;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use benchgen::{
    gen_nesterov_chain, gen_powerlaw_quadratic, gen_regression_dataset, gen_wishart_hard_instance, write_matrix_instance,
    write_quadratic_instance, GenSpec, KeyValues,
};
use clap::{Parser, Subcommand};
use log::info;

use crate::bench::{fit_report, plot_csv, rows_csv, run_sweep, Sweep};
use crate::instance::load_instance;
use crate::run::{fmt_num, run_solver, trace_csv, RunError, RunOptions, SolverKind};

#[derive(Parser, Debug)]
#[command(name = "agmas", version, about = "Spectrum-adaptive quadratic and second-order solvers")]
struct Cli {
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance from a `key=value` spec file.
    Gen {
        spec: PathBuf,
        /// Output stem; `.mtx`, `.b.csv`, `.cert` and `.manifest` are appended.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one solver and write its trace as CSV.
    Solve {
        /// `.mtx` file, `.csv` dataset or `key=value` spec.
        instance: PathBuf,
        #[arg(long)]
        solver: SolverKind,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_iters: Option<usize>,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep and fit log-log slopes.
    Bench {
        sweep: PathBuf,
        /// CSV path; `.fit` and `.manifest` are written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write seed-averaged points for plotting.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Redirects the primary output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    std::fs::write(path, text).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

struct Record {
    config: PathBuf,
    seed: Option<u64>,
    instance: String,
    outputs: Vec<PathBuf>,
    summary: KeyValues,
}

fn manifest(args: &[String], command: &str, record: &Record, started: SystemTime, wall: f64) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("command", command);
    kv.set("version", env!("CARGO_PKG_VERSION"));
    kv.set("config", record.config.display());
    if let Some(s) = record.seed {
        kv.set("seed", s);
    }
    kv.set("instance", &record.instance);
    let outs: Vec<String> = record.outputs.iter().map(|p| p.display().to_string()).collect();
    kv.set("outputs", outs.join(","));
    kv.set("started_unix", started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
    kv.set("wall_clock_s", format!("{wall:.3}"));
    kv.set("argc", args.len());
    for (i, a) in args.iter().enumerate() {
        kv.set(&format!("arg.{i}"), a);
    }
    for (k, v) in record.summary.iter() {
        kv.set(&format!("summary.{k}"), v);
    }
    kv
}

fn gen(spec: &Path, out: &Path, seed: Option<u64>) -> Result<Record, RunError> {
    let mut kv = KeyValues::read(spec)?;
    if let Some(s) = seed {
        kv.set("seed", s);
    }
    let parsed = GenSpec::from_key_values(&kv)?;
    let (outputs, summary) = match parsed {
        GenSpec::Spectrum(s) => {
            let g = gen_powerlaw_quadratic(&s)?;
            let cert = g.certificate.to_key_values();
            let files = write_quadratic_instance(out, &g.problem, &cert)?;
            (vec![files.matrix, files.rhs.expect("rhs written"), files.certificate], cert)
        }
        GenSpec::Nesterov { d } => {
            let p = gen_nesterov_chain(d)?;
            let mut cert = KeyValues::new();
            cert.set("kind", "nesterov");
            cert.set("d", d);
            let files = write_quadratic_instance(out, &p, &cert)?;
            (vec![files.matrix, files.rhs.expect("rhs written"), files.certificate], cert)
        }
        GenSpec::Wishart(s) => {
            let inst = gen_wishart_hard_instance(&s)?;
            let cert = inst.certificate.to_key_values();
            let files = write_matrix_instance(out, &inst.matrix, &cert)?;
            (vec![files.matrix, files.certificate], cert)
        }
        GenSpec::Regression { n, spectrum, noise, seed } => {
            let planted = gen_regression_dataset(n, spectrum.d, &spectrum, noise, seed)?;
            let data_path = with_suffix(out, ".csv");
            planted.data.write_csv(&data_path)?;
            let mut cert = KeyValues::new();
            cert.set("kind", "regression");
            cert.set("n", n);
            cert.set("d", spectrum.d);
            cert.set_f64("scale", planted.data.scale);
            cert.set_f64("noise", noise);
            let cert_path = with_suffix(out, ".cert");
            cert.write(&cert_path)?;
            (vec![data_path, cert_path], cert)
        }
    };
    Ok(Record {
        config: spec.to_path_buf(),
        seed: kv.get_parsed("seed")?,
        instance: kv.require("kind")?.to_string(),
        outputs,
        summary,
    })
}

fn solve(instance_path: &Path, solver: SolverKind, opts: &RunOptions, out: Option<&Path>) -> Result<Record, RunError> {
    let instance = load_instance(instance_path, opts.seed)?;
    info!("loaded {} instance from {}", instance.kind(), instance_path.display());
    let outcome = run_solver(&instance, solver, opts)?;
    let csv = trace_csv(&outcome.report);
    let mut summary = KeyValues::new();
    summary.set("solver", solver);
    summary.set("branch", outcome.report.branch);
    summary.set("iterations", outcome.report.iterations);
    summary.set("converged", outcome.converged);
    summary.set("grad_calls", outcome.report.ledger_snapshot.grad_calls);
    summary.set("hvp_calls", outcome.report.ledger_snapshot.hvp_calls);
    summary.set("data_accesses", outcome.report.ledger_snapshot.data_accesses);
    summary.set("objective", fmt_num(outcome.report.objective));
    summary.set("residual", fmt_num(outcome.report.residual));
    for (k, v) in &outcome.extra {
        summary.set(k, v);
    }
    let outputs = match out {
        Some(p) => {
            write(p, &csv)?;
            vec![p.to_path_buf()]
        }
        None => {
            print!("{csv}");
            Vec::new()
        }
    };
    if out.is_some() {
        eprint!("{summary}");
    }
    if !outcome.converged {
        return Err(RunError::Solver(format!("{solver} hit its iteration cap")));
    }
    Ok(Record {
        config: instance_path.to_path_buf(),
        seed: Some(opts.seed),
        instance: instance.kind().to_string(),
        outputs,
        summary,
    })
}

fn bench(sweep_path: &Path, out: &Path, jobs: usize, plot: Option<&Path>) -> Result<Record, RunError> {
    let sweep = Sweep::from_key_values(&KeyValues::read(sweep_path)?)?;
    let rows = run_sweep(&sweep, jobs)?;
    write(out, &rows_csv(&rows))?;
    let fit = fit_report(&sweep, &rows);
    let fit_path = with_suffix(out, ".fit");
    fit.write(&fit_path)?;
    let mut outputs = vec![out.to_path_buf(), fit_path];
    if let Some(p) = plot {
        write(p, &plot_csv(&sweep, &rows))?;
        outputs.push(p.to_path_buf());
    }
    eprint!("{fit}");
    let failed = rows.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        return Err(RunError::Solver(format!("{failed} of {} sweep rows failed", rows.len())));
    }
    Ok(Record {
        config: sweep_path.to_path_buf(),
        seed: None,
        instance: sweep.base.get("kind").unwrap_or("?").to_string(),
        outputs,
        summary: fit,
    })
}

/// Arguments recorded in a manifest, with `--out` redirected when asked.
fn replay_args(manifest: &Path, out: Option<&Path>) -> Result<Vec<String>, RunError> {
    let kv = KeyValues::read(manifest)?;
    let argc: usize = kv.require_parsed("argc")?;
    let mut args = (0..argc).map(|i| kv.require(&format!("arg.{i}")).map(str::to_string)).collect::<Result<Vec<_>, _>>()?;
    if let Some(out) = out {
        let out = out.display().to_string();
        match args.iter().position(|a| a == "--out") {
            Some(i) if i + 1 < args.len() => args[i + 1] = out,
            _ => {
                if let Some(a) = args.iter_mut().find(|a| a.starts_with("--out=")) {
                    *a = format!("--out={out}");
                } else {
                    args.push("--out".into());
                    args.push(out);
                }
            }
        }
    }
    Ok(args)
}

/// Runs a parsed command and writes its manifest next to the primary output.
fn execute(cli: Cli, args: &[String]) -> Result<(), RunError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let (name, result, stem) = match &cli.command {
        Command::Gen { spec, out, seed } => ("gen", gen(spec, out, *seed), Some(out.clone())),
        Command::Solve {
            instance,
            solver,
            eps,
            mu,
            seed,
            max_iters,
            out,
        } => {
            let opts = RunOptions {
                eps: *eps,
                mu: *mu,
                seed: *seed,
                max_iters: *max_iters,
            };
            ("solve", solve(instance, *solver, &opts, out.as_deref()), out.clone())
        }
        Command::Bench { sweep, out, jobs, plot } => ("bench", bench(sweep, out, *jobs, plot.as_deref()), Some(out.clone())),
        Command::Replay { manifest, out } => {
            let replayed = replay_args(manifest, out.as_deref())?;
            let inner = Cli::try_parse_from(&replayed).map_err(|e| RunError::Config(format!("manifest arguments: {e}")))?;
            if matches!(inner.command, Command::Replay { .. }) {
                return Err(RunError::Config("a manifest cannot replay another replay".into()));
            }
            return execute(inner, &replayed);
        }
    };
    let record = result?;
    let kv = manifest(args, name, &record, started, clock.elapsed().as_secs_f64());
    match stem {
        Some(stem) => kv.write(with_suffix(&stem, ".manifest"))?,
        None => eprint!("{kv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    match execute(cli, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
