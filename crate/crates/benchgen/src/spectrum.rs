//! Quadratics with a planted spectrum behind a random Householder rotation.

use std::sync::Arc;

use oracle_core::linalg::{dot, normalize};
use oracle_core::rng::{gaussian_vector, random_unit_vector, seeded_rng};
use oracle_core::{DenseMatrix, LinearOperator, OptError, QuadraticProblem, Result};

use crate::keyvalue::KeyValues;

/// Dense ground truth is kept up to this dimension.
pub const DENSE_LIMIT: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumLaw {
    /// `lambda_i = tau i^{-1/alpha}`, `i = 1..d`.
    PowerLaw { alpha: f64, tau: f64 },
    Explicit(Vec<f64>),
    Flat(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub d: usize,
    pub law: SpectrumLaw,
    /// Added to every eigenvalue.
    pub mu_floor: f64,
    pub seed: u64,
    /// Number of Householder reflectors in `Q`; `None` uses `d`.
    pub reflectors: Option<usize>,
}

impl SpectrumSpec {
    pub fn new(d: usize, law: SpectrumLaw, mu_floor: f64, seed: u64) -> Self {
        Self {
            d,
            law,
            mu_floor,
            seed,
            reflectors: None,
        }
    }

    pub fn power_law(d: usize, alpha: f64, tau: f64, mu_floor: f64, seed: u64) -> Self {
        Self::new(d, SpectrumLaw::PowerLaw { alpha, tau }, mu_floor, seed)
    }

    /// The exponent the certificate reports `tau_alpha` for.
    pub fn alpha(&self) -> f64 {
        match self.law {
            SpectrumLaw::PowerLaw { alpha, .. } => alpha,
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(OptError::InvalidParameter(m));
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if !(self.mu_floor >= 0.0 && self.mu_floor.is_finite()) {
            return bad(format!("mu_floor = {}", self.mu_floor));
        }
        match &self.law {
            SpectrumLaw::PowerLaw { alpha, tau } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return bad(format!("alpha = {alpha}"));
                }
                if !(*tau > 0.0 && tau.is_finite()) {
                    return bad(format!("tau = {tau}"));
                }
            }
            SpectrumLaw::Explicit(values) => {
                if values.len() != self.d {
                    return Err(OptError::DimensionMismatch {
                        expected: self.d,
                        got: values.len(),
                    });
                }
                if let Some(v) = values.iter().find(|v| !(**v + self.mu_floor > 0.0 && v.is_finite())) {
                    return bad(format!("eigenvalue {v} is not positive"));
                }
            }
            SpectrumLaw::Flat(l) => {
                if !(*l + self.mu_floor > 0.0 && l.is_finite()) {
                    return bad(format!("flat level {l}"));
                }
            }
        }
        if let Some(k) = self.reflectors {
            if k > self.d {
                return bad(format!("{k} reflectors in dimension {}", self.d));
            }
        }
        Ok(())
    }

    /// Eigenvalues in descending order, floor included.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mut v: Vec<f64> = match &self.law {
            SpectrumLaw::PowerLaw { alpha, tau } => (1..=self.d).map(|i| tau * (i as f64).powf(-1.0 / alpha)).collect(),
            SpectrumLaw::Explicit(values) => values.clone(),
            SpectrumLaw::Flat(l) => vec![*l; self.d],
        };
        v.iter_mut().for_each(|x| *x += self.mu_floor);
        v.sort_by(|a, b| b.total_cmp(a));
        Ok(v)
    }
}

/// Spectral facts about a generated matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCertificate {
    pub d: usize,
    pub alpha: f64,
    /// `(sum_i lambda_i^alpha)^{1/alpha}`.
    pub tau_alpha: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// `lambda_1 - lambda_2`; zero when `d = 1`.
    pub gap: f64,
    pub trace: f64,
}

impl SpectralCertificate {
    /// Computes the certificate from eigenvalues in any order.
    pub fn from_eigenvalues(values: &[f64], alpha: f64) -> Self {
        let mut v = values.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        let tau_alpha = v.iter().map(|x| x.abs().powf(alpha)).sum::<f64>().powf(1.0 / alpha);
        Self {
            d: v.len(),
            alpha,
            tau_alpha,
            lambda_max: v[0],
            lambda_min: v[v.len() - 1],
            gap: if v.len() > 1 { v[0] - v[1] } else { 0.0 },
            trace: v.iter().sum(),
        }
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("kind", "spectrum");
        kv.set("d", self.d);
        kv.set_f64("alpha", self.alpha);
        kv.set_f64("tau_alpha", self.tau_alpha);
        kv.set_f64("lambda_max", self.lambda_max);
        kv.set_f64("lambda_min", self.lambda_min);
        kv.set_f64("gap", self.gap);
        kv.set_f64("trace", self.trace);
        kv
    }
}

/// `Q = H_1 H_2 ... H_k` with `H_i = I - 2 u_i u_i^T`.
#[derive(Debug, Clone)]
pub struct HouseholderProduct {
    dim: usize,
    vecs: Vec<Vec<f64>>,
}

impl HouseholderProduct {
    pub fn random(dim: usize, count: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let vecs = (0..count)
            .map(|_| {
                let mut u = gaussian_vector(&mut rng, dim);
                if normalize(&mut u) == 0.0 {
                    u[0] = 1.0;
                }
                u
            })
            .collect();
        Self { dim, vecs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn reflect(u: &[f64], x: &mut [f64]) {
        let s = 2.0 * dot(u, x);
        x.iter_mut().zip(u).for_each(|(xi, ui)| *xi -= s * ui);
    }

    /// `x <- Q x`.
    pub fn apply(&self, x: &mut [f64]) {
        for u in self.vecs.iter().rev() {
            Self::reflect(u, x);
        }
    }

    /// `x <- Q^T x`.
    pub fn apply_transpose(&self, x: &mut [f64]) {
        for u in &self.vecs {
            Self::reflect(u, x);
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut q = DenseMatrix::identity(self.dim);
        let mut col = vec![0.0; self.dim];
        for j in 0..self.dim {
            col.iter_mut().enumerate().for_each(|(i, c)| *c = if i == j { 1.0 } else { 0.0 });
            self.apply(&mut col);
            for i in 0..self.dim {
                q[(i, j)] = col[i];
            }
        }
        q
    }
}

/// `A = Q diag(lambda) Q^T` applied in `O(k d)`.
#[derive(Debug, Clone)]
pub struct RotatedDiagonal {
    pub q: HouseholderProduct,
    pub eigenvalues: Vec<f64>,
}

impl RotatedDiagonal {
    pub fn to_dense(&self) -> DenseMatrix {
        let q = self.q.to_dense();
        let d = self.eigenvalues.len();
        let mut a = DenseMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let v: f64 = (0..d).map(|k| q[(i, k)] * self.eigenvalues[k] * q[(j, k)]).sum();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }
}

impl LinearOperator for RotatedDiagonal {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
        self.q.apply_transpose(out);
        out.iter_mut().zip(&self.eigenvalues).for_each(|(o, l)| *o *= l);
        self.q.apply(out);
    }
}

/// A generated quadratic with its planted spectrum and certificate.
#[derive(Debug, Clone)]
pub struct GeneratedQuadratic {
    pub problem: QuadraticProblem,
    pub operator: Arc<RotatedDiagonal>,
    pub certificate: SpectralCertificate,
}

pub fn gen_powerlaw_quadratic(spec: &SpectrumSpec) -> Result<GeneratedQuadratic> {
    let eigenvalues = spec.eigenvalues()?;
    let d = spec.d;
    let q = HouseholderProduct::random(d, spec.reflectors.unwrap_or(d), spec.seed);
    let b = random_unit_vector(&mut seeded_rng(spec.seed ^ 0x9e37_79b9_7f4a_7c15), d);
    let certificate = SpectralCertificate::from_eigenvalues(&eigenvalues, spec.alpha());
    let operator = Arc::new(RotatedDiagonal { q, eigenvalues });
    let mu = certificate.lambda_min;
    let mut problem = QuadraticProblem::new(operator.clone(), b)?.with_mu_hint(mu);
    if d <= DENSE_LIMIT {
        let mut dense = operator.to_dense();
        symmetrize(&mut dense);
        problem = problem.with_dense(dense)?;
    }
    Ok(GeneratedQuadratic {
        problem,
        operator,
        certificate,
    })
}

pub(crate) fn symmetrize(a: &mut DenseMatrix) {
    let n = a.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}
