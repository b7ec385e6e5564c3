//! Loading problem instances from spec files, MatrixMarket files or CSV datasets.

use std::path::Path;
use std::sync::Arc;

use benchgen::{gen_nesterov_chain, gen_powerlaw_quadratic, gen_regression_dataset, gen_wishart_hard_instance, GenSpec, KeyValues};
use erm::RegressionDataset;
use oracle_core::io::{read_matrix_market, read_vector_csv};
use oracle_core::rng::{random_unit_vector, seeded_rng};
use oracle_core::{DenseMatrix, DoubleWell, OptError, QuadraticProblem, QuarticQuadratic, Result, SecondOrderOracle};

pub enum Instance {
    Quadratic {
        problem: QuadraticProblem,
        /// Known `lambda_min`, if any.
        mu: Option<f64>,
        /// Known `lambda_max`, if any.
        l: Option<f64>,
    },
    SecondOrder {
        oracle: Arc<dyn SecondOrderOracle>,
        x0: Vec<f64>,
    },
    Data(RegressionDataset),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Quadratic { .. } => "quadratic",
            Instance::SecondOrder { .. } => "second-order",
            Instance::Data(_) => "dataset",
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.with_extension("");
    let mut s = stem.into_os_string();
    s.push(suffix);
    s.into()
}

/// `.mtx` (with optional `.b.csv` and `.cert` siblings), `.csv` dataset, or a `key=value` spec.
pub fn load_instance(path: &Path, seed: u64) -> Result<Instance> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("mtx") => {
            let a = read_matrix_market(path)?;
            let d = a.rows();
            let rhs = sibling(path, ".b.csv");
            let b = if rhs.exists() {
                read_vector_csv(&rhs)?
            } else {
                random_unit_vector(&mut seeded_rng(seed), d)
            };
            let cert = sibling(path, ".cert");
            let (mu, l) = if cert.exists() {
                let kv = KeyValues::read(&cert)?;
                (kv.get_parsed("lambda_min")?, kv.get_parsed("lambda_max")?)
            } else {
                (None, None)
            };
            let problem = QuadraticProblem::from_dense(a, b)?;
            Ok(Instance::Quadratic { problem, mu, l })
        }
        Some("csv") => {
            let mut data = RegressionDataset::from_csv(path, 0.0)?;
            data.normalize();
            Ok(Instance::Data(data))
        }
        _ => instance_from_spec(&KeyValues::read(path)?, seed),
    }
}

pub fn instance_from_spec(kv: &KeyValues, seed: u64) -> Result<Instance> {
    match kv.require("kind")? {
        "quartic" => {
            kv.check_keys(&["kind", "d", "c", "seed"])?;
            let d: usize = kv.require_parsed("d")?;
            let c: f64 = kv.get_parsed("c")?.unwrap_or(1.0);
            let seed = kv.get_parsed("seed")?.unwrap_or(seed);
            if d == 0 || !(c > 0.0) {
                return Err(OptError::InvalidParameter(format!("quartic needs d >= 1 and c > 0, got d={d} c={c}")));
            }
            let diag: Vec<f64> = (0..d).map(|i| if i < d / 2 { 1.0 / (i + 1) as f64 } else { 0.0 }).collect();
            let x0: Vec<f64> = random_unit_vector(&mut seeded_rng(seed), d).iter().map(|v| 2.0 * v).collect();
            let mut f = QuarticQuadratic::new(c, diag, 1.0);
            // Hessian-Lipschitz constant on the initial sublevel set.
            let radius = (4.0 * f.value(&x0) / c).powf(0.25);
            f.h = 6.0 * c * radius;
            Ok(Instance::SecondOrder { oracle: Arc::new(f), x0 })
        }
        "doublewell" => {
            kv.check_keys(&["kind", "d", "radius", "seed"])?;
            let d: usize = kv.require_parsed("d")?;
            let radius: f64 = kv.get_parsed("radius")?.unwrap_or(1e-3);
            let seed = kv.get_parsed("seed")?.unwrap_or(seed);
            if d == 0 {
                return Err(OptError::InvalidParameter("doublewell needs d >= 1".into()));
            }
            let x0 = random_unit_vector(&mut seeded_rng(seed), d).iter().map(|v| radius * v).collect();
            Ok(Instance::SecondOrder {
                oracle: Arc::new(DoubleWell::new(d)),
                x0,
            })
        }
        _ => match GenSpec::from_key_values(kv)? {
            GenSpec::Spectrum(spec) => {
                let g = gen_powerlaw_quadratic(&spec)?;
                Ok(Instance::Quadratic {
                    problem: g.problem,
                    mu: Some(g.certificate.lambda_min),
                    l: Some(g.certificate.lambda_max),
                })
            }
            GenSpec::Nesterov { d } => Ok(Instance::Quadratic {
                problem: gen_nesterov_chain(d)?,
                mu: None,
                l: Some(4.0),
            }),
            GenSpec::Wishart(spec) => {
                // The quadratic with A = (1 + gap) I - M.
                let inst = gen_wishart_hard_instance(&spec)?;
                let gap = inst.certificate.gap;
                let d = spec.d;
                let mut a = DenseMatrix::identity(d);
                a.scale(1.0 + gap);
                a.add_scaled(-1.0, &inst.matrix);
                let b = random_unit_vector(&mut seeded_rng(spec.seed ^ 0x5bd1_e995), d);
                Ok(Instance::Quadratic {
                    problem: QuadraticProblem::from_dense(a, b)?,
                    mu: Some(gap),
                    l: Some(1.0 + gap),
                })
            }
            GenSpec::Regression { n, spectrum, noise, seed } => {
                Ok(Instance::Data(gen_regression_dataset(n, spectrum.d, &spectrum, noise, seed)?.data))
            }
        },
    }
}
