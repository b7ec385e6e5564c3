//! Generator specs in `key=value` form and instance files on disk.
//!
//! Schema, by `kind`:
//!
//! | kind | keys |
//! |------|------|
//! | `powerlaw` | `d`, `alpha`, `tau`, `mu_floor`, `seed`, `reflectors` |
//! | `flat` | `d`, `level`, `mu_floor`, `seed`, `reflectors` |
//! | `explicit` | `values` (comma list), `mu_floor`, `seed`, `reflectors` |
//! | `nesterov` | `d` |
//! | `wishart` | `d`, `mu`, `alpha`, `tau_alpha`, `regime`, `s`, `c`, `seed` |
//! | `regression` | `n`, `d`, `alpha`, `tau`, `mu_floor`, `noise`, `seed` |
//!
//! `mu_floor` defaults to 0, `seed` to 0, `alpha` to 1.

use std::path::{Path, PathBuf};

use oracle_core::io::{write_matrix_market, write_vector_csv};
use oracle_core::{DenseMatrix, LinearOperator, OptError, QuadraticProblem, Result};

use crate::keyvalue::KeyValues;
use crate::spectrum::{SpectrumLaw, SpectrumSpec};
use crate::wishart::{HardInstanceSpec, HardRegime};

/// Largest dimension written as a dense MatrixMarket file.
pub const WRITE_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum GenSpec {
    Spectrum(SpectrumSpec),
    Nesterov { d: usize },
    Wishart(HardInstanceSpec),
    Regression { n: usize, spectrum: SpectrumSpec, noise: f64, seed: u64 },
}

fn spectrum_from(kv: &KeyValues, law: SpectrumLaw, d: usize) -> Result<SpectrumSpec> {
    let mut spec = SpectrumSpec::new(
        d,
        law,
        kv.get_parsed("mu_floor")?.unwrap_or(0.0),
        kv.get_parsed("seed")?.unwrap_or(0),
    );
    spec.reflectors = kv.get_parsed("reflectors")?;
    spec.validate()?;
    Ok(spec)
}

impl GenSpec {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let kind = kv.require("kind")?;
        let common = ["kind", "seed", "mu_floor", "reflectors"];
        let allow = |extra: &[&str]| -> Result<()> {
            let keys: Vec<&str> = common.iter().chain(extra).copied().collect();
            kv.check_keys(&keys)
        };
        match kind {
            "powerlaw" => {
                allow(&["d", "alpha", "tau"])?;
                let law = SpectrumLaw::PowerLaw {
                    alpha: kv.get_parsed("alpha")?.unwrap_or(1.0),
                    tau: kv.require_parsed("tau")?,
                };
                Ok(Self::Spectrum(spectrum_from(kv, law, kv.require_parsed("d")?)?))
            }
            "flat" => {
                allow(&["d", "level"])?;
                let law = SpectrumLaw::Flat(kv.get_parsed("level")?.unwrap_or(1.0));
                Ok(Self::Spectrum(spectrum_from(kv, law, kv.require_parsed("d")?)?))
            }
            "explicit" => {
                allow(&["values"])?;
                let values = kv.get_list("values")?.ok_or_else(|| OptError::InvalidParameter("missing key \"values\"".into()))?;
                let d = values.len();
                Ok(Self::Spectrum(spectrum_from(kv, SpectrumLaw::Explicit(values), d)?))
            }
            "nesterov" => {
                kv.check_keys(&["kind", "d"])?;
                Ok(Self::Nesterov { d: kv.require_parsed("d")? })
            }
            "wishart" => {
                kv.check_keys(&["kind", "d", "mu", "alpha", "tau_alpha", "regime", "s", "c", "seed"])?;
                let mut spec = HardInstanceSpec::new(
                    kv.require_parsed("d")?,
                    kv.require_parsed("mu")?,
                    kv.get_parsed("alpha")?.unwrap_or(1.0),
                    kv.require_parsed("tau_alpha")?,
                    kv.require_parsed::<HardRegime>("regime")?,
                    kv.get_parsed("seed")?.unwrap_or(0),
                );
                spec.s = kv.get_parsed("s")?;
                spec.c = kv.get_parsed("c")?;
                spec.validate()?;
                Ok(Self::Wishart(spec))
            }
            "regression" => {
                allow(&["n", "d", "alpha", "tau", "noise"])?;
                let law = SpectrumLaw::PowerLaw {
                    alpha: kv.get_parsed("alpha")?.unwrap_or(1.0),
                    tau: kv.get_parsed("tau")?.unwrap_or(1.0),
                };
                let spectrum = spectrum_from(kv, law, kv.require_parsed("d")?)?;
                let seed = spectrum.seed;
                Ok(Self::Regression {
                    n: kv.require_parsed("n")?,
                    spectrum,
                    noise: kv.get_parsed("noise")?.unwrap_or(0.0),
                    seed,
                })
            }
            other => Err(OptError::InvalidParameter(format!("key \"kind\": unknown instance kind {other:?}"))),
        }
    }
}

/// Paths written for an instance with stem `stem`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFiles {
    pub matrix: PathBuf,
    pub rhs: Option<PathBuf>,
    pub certificate: PathBuf,
}

pub fn instance_files(stem: &Path, with_rhs: bool) -> InstanceFiles {
    let with = |ext: &str| {
        let mut p = stem.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    InstanceFiles {
        matrix: with(".mtx"),
        rhs: with_rhs.then(|| with(".b.csv")),
        certificate: with(".cert"),
    }
}

/// Dense copy of `A`, assembled column by column when the problem has none.
pub fn dense_matrix(problem: &QuadraticProblem) -> Result<DenseMatrix> {
    if let Some(a) = problem.dense_a() {
        return Ok(a.clone());
    }
    let d = problem.dim();
    if d > WRITE_LIMIT {
        return Err(OptError::InvalidParameter(format!("d = {d} is too large to write densely (limit {WRITE_LIMIT})")));
    }
    Ok(oracle_core::operator::to_dense(problem.operator().as_ref() as &dyn LinearOperator))
}

/// Writes `A` as MatrixMarket, `b` as CSV and the certificate as `key=value`.
pub fn write_quadratic_instance(stem: &Path, problem: &QuadraticProblem, certificate: &KeyValues) -> Result<InstanceFiles> {
    let files = instance_files(stem, true);
    write_matrix_market(&files.matrix, &dense_matrix(problem)?)?;
    write_vector_csv(files.rhs.as_ref().expect("rhs requested"), problem.b())?;
    certificate.write(&files.certificate)?;
    Ok(files)
}

pub fn write_matrix_instance(stem: &Path, m: &DenseMatrix, certificate: &KeyValues) -> Result<InstanceFiles> {
    let files = instance_files(stem, false);
    write_matrix_market(&files.matrix, m)?;
    certificate.write(&files.certificate)?;
    Ok(files)
}
