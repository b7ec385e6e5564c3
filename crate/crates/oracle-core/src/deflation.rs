use crate::error::{OptError, Result};
use crate::linalg::{axpy, dot, normalize, DenseMatrix};

/// The fixed fraction of each Rayleigh value that is removed per deflation step.
pub const DEFLATION_SCALE: f64 = 0.2;

/// `A_1 = sum_i (a_i / 5) v_i v_i^T` stored in factored form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LowRankDeflation {
    dim: usize,
    coeffs: Vec<f64>,
    vecs: Vec<Vec<f64>>,
}

impl LowRankDeflation {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coeffs: Vec::new(),
            vecs: Vec::new(),
        }
    }

    /// Appends the pair `(a, v)`; `v` is normalized on the way in.
    pub fn push(&mut self, a: f64, mut v: Vec<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(OptError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(OptError::InvalidParameter(format!(
                "deflation coefficient must be positive, got {a}"
            )));
        }
        if normalize(&mut v) == 0.0 {
            return Err(OptError::InvalidParameter("zero deflation vector".into()));
        }
        self.coeffs.push(a);
        self.vecs.push(v);
        Ok(())
    }

    /// Concatenates the pairs of several deflations.
    pub fn concat(dim: usize, parts: &[LowRankDeflation]) -> Self {
        let mut out = Self::empty(dim);
        for p in parts {
            out.coeffs.extend_from_slice(&p.coeffs);
            out.vecs.extend(p.vecs.iter().cloned());
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The Rayleigh values `a_i`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn vecs(&self) -> &[Vec<f64>] {
        &self.vecs
    }

    /// The weights `a_i / 5` of the outer products.
    pub fn weights(&self) -> Vec<f64> {
        self.coeffs.iter().map(|a| a * DEFLATION_SCALE).collect()
    }

    /// Returns a copy with every weight multiplied by `factor` (coefficients scale the same way).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|a| a * factor).collect(),
            vecs: self.vecs.clone(),
        }
    }

    /// `out += alpha * A_1 x` in O(rd).
    pub fn apply_add(&self, alpha: f64, x: &[f64], out: &mut [f64]) {
        for (a, v) in self.coeffs.iter().zip(&self.vecs) {
            let c = alpha * a * DEFLATION_SCALE * dot(v, x);
            axpy(c, v, out);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_add(1.0, x, &mut out);
        out
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.vecs)
            .map(|(a, v)| {
                let p = dot(v, x);
                a * DEFLATION_SCALE * p * p
            })
            .sum()
    }

    /// Dense `A_1`. Test scale only.
    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_outer_products(self.dim, &self.weights(), &self.vecs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_matches_dense() {
        let mut d = LowRankDeflation::empty(3);
        d.push(5.0, vec![1.0, 0.0, 0.0]).unwrap();
        d.push(10.0, vec![0.0, 3.0, 4.0]).unwrap();
        let x = [1.0, 2.0, 3.0];
        let dense = d.to_dense().matvec(&x);
        let fast = d.apply(&x);
        for (a, b) in dense.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((fast[0] - 1.0).abs() < 1e-15);
        assert!((d.quadratic_form(&x) - dot(&x, &fast)).abs() < 1e-13);
    }

    #[test]
    fn push_rejects_bad_input() {
        let mut d = LowRankDeflation::empty(2);
        assert!(d.push(1.0, vec![1.0]).is_err());
        assert!(d.push(-1.0, vec![1.0, 0.0]).is_err());
        assert!(d.push(1.0, vec![0.0, 0.0]).is_err());
        assert!(d.is_empty());
    }
}
