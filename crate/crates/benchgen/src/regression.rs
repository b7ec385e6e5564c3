//! Synthetic least-squares data with a planted covariance.

use erm::RegressionDataset;
use oracle_core::linalg::dot;
use oracle_core::rng::{gaussian_vector, random_unit_vector, seeded_rng};
use oracle_core::{OptError, Result};

use crate::spectrum::{HouseholderProduct, SpectrumSpec};

/// A normalized dataset and the vector its targets were planted from.
#[derive(Debug, Clone)]
pub struct PlantedRegression {
    pub data: RegressionDataset,
    pub x_planted: Vec<f64>,
    /// Covariance eigenvalues before normalization, descending.
    pub covariance_eigenvalues: Vec<f64>,
}

/// Rows `a_i = Q Lambda^{1/2} z_i` with `z_i` standard normal, so the row
/// covariance is `Q Lambda Q^T`; all rows are then divided by the largest row
/// norm. Targets are `a_i^T x + noise xi_i` on the normalized rows, with `x` a
/// random unit vector. The regularizer is left at 0.
pub fn gen_regression_dataset(n: usize, d: usize, spectrum: &SpectrumSpec, noise: f64, seed: u64) -> Result<PlantedRegression> {
    if n == 0 || d == 0 {
        return Err(OptError::InvalidParameter(format!("n = {n}, d = {d}")));
    }
    if spectrum.d != d {
        return Err(OptError::DimensionMismatch {
            expected: d,
            got: spectrum.d,
        });
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(OptError::InvalidParameter(format!("noise = {noise}")));
    }
    let eig = spectrum.eigenvalues()?;
    let root: Vec<f64> = eig.iter().map(|l| l.sqrt()).collect();
    let q = HouseholderProduct::random(d, spectrum.reflectors.unwrap_or(d), spectrum.seed);
    let mut rng = seeded_rng(seed);
    let mut rows = Vec::with_capacity(n * d);
    let mut max_norm = 0.0_f64;
    for _ in 0..n {
        let mut a: Vec<f64> = gaussian_vector(&mut rng, d).iter().zip(&root).map(|(z, r)| z * r).collect();
        q.apply(&mut a);
        max_norm = max_norm.max(dot(&a, &a).sqrt());
        rows.extend(a);
    }
    if max_norm > 0.0 {
        rows.iter_mut().for_each(|v| *v /= max_norm);
    }
    let x_planted = random_unit_vector(&mut rng, d);
    let targets: Vec<f64> = rows
        .chunks(d)
        .map(|a| dot(a, &x_planted) + noise * gaussian_vector(&mut rng, 1)[0])
        .collect();
    let mut data = RegressionDataset::from_flat(n, d, rows, targets, 0.0)?;
    data.scale = if max_norm > 0.0 { max_norm } else { 1.0 };
    Ok(PlantedRegression {
        data,
        x_planted,
        covariance_eigenvalues: eig,
    })
}
