//! Least-squares datasets with row-level access counting.

use std::ops::Range;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use oracle_core::linalg::{axpy, dot, norm, DenseMatrix};
use oracle_core::{direct_solve, OptError, OracleLedger, Result};

/// Rows `a_i`, targets `b_i` and ridge `mu` of
/// `F(x) = 1/(2n) sum_i (a_i^T x - b_i)^2 + (mu/2) ||x||^2`.
///
/// Every row read by the solvers goes through this type and bumps an internal
/// touch counter, independent of the ledgers the solvers charge.
#[derive(Debug)]
pub struct RegressionDataset {
    n: usize,
    d: usize,
    rows: Vec<f64>,
    targets: Vec<f64>,
    pub mu: f64,
    /// Factor the rows were divided by during normalization (1 if untouched).
    pub scale: f64,
    touches: AtomicU64,
}

impl Clone for RegressionDataset {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            d: self.d,
            rows: self.rows.clone(),
            targets: self.targets.clone(),
            mu: self.mu,
            scale: self.scale,
            touches: AtomicU64::new(0),
        }
    }
}

impl RegressionDataset {
    pub fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>, mu: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(OptError::InvalidParameter("empty dataset".into()));
        }
        if targets.len() != n {
            return Err(OptError::DimensionMismatch { expected: n, got: targets.len() });
        }
        let d = rows[0].len();
        let mut flat = Vec::with_capacity(n * d);
        for r in &rows {
            if r.len() != d {
                return Err(OptError::DimensionMismatch { expected: d, got: r.len() });
            }
            flat.extend_from_slice(r);
        }
        Self::from_flat(n, d, flat, targets, mu)
    }

    pub fn from_flat(n: usize, d: usize, rows: Vec<f64>, targets: Vec<f64>, mu: f64) -> Result<Self> {
        if rows.len() != n * d {
            return Err(OptError::DimensionMismatch { expected: n * d, got: rows.len() });
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(OptError::InvalidParameter(format!("mu = {mu}")));
        }
        if rows.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(OptError::NonFinite("dataset entries".into()));
        }
        Ok(Self {
            n,
            d,
            rows,
            targets,
            mu,
            scale: 1.0,
            touches: AtomicU64::new(0),
        })
    }

    /// Reads a CSV with one sample per line and the target in the last column.
    /// A non-numeric first line is taken as a header.
    pub fn from_csv(path: impl AsRef<Path>, mu: f64) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| OptError::InvalidParameter(format!("{}: {e}", path.display())))?;
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| OptError::InvalidParameter(format!("{}: {e}", path.display())))?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let mut vals = match parsed {
                Ok(v) => v,
                Err(_) if line == 0 => continue,
                Err(e) => {
                    return Err(OptError::InvalidParameter(format!("{} line {}: {e}", path.display(), line + 1)))
                }
            };
            if vals.len() < 2 {
                return Err(OptError::InvalidParameter(format!(
                    "{} line {}: need at least one feature and a target",
                    path.display(),
                    line + 1
                )));
            }
            targets.push(vals.pop().unwrap());
            rows.push(vals);
        }
        Self::new(rows, targets, mu)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |e: csv::Error| OptError::InvalidParameter(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        for i in 0..self.n {
            let rec: Vec<String> = self.row_unchecked(i).iter().chain([&self.targets[i]]).map(|v| format!("{v:.17e}")).collect();
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| OptError::InvalidParameter(format!("{}: {e}", path.display())))
    }

    /// Divides rows and targets by the largest row norm so that `||a_i|| <= 1`.
    /// Minimizers scale accordingly only when `mu = 0`; the factor is kept in `scale`.
    pub fn normalize(&mut self) {
        let max = (0..self.n).map(|i| norm(self.row_unchecked(i))).fold(0.0_f64, f64::max);
        if max > 1.0 {
            self.rows.iter_mut().for_each(|v| *v /= max);
            self.targets.iter_mut().for_each(|v| *v /= max);
            self.scale *= max;
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn max_row_norm(&self) -> f64 {
        (0..self.n).map(|i| norm(self.row_unchecked(i))).fold(0.0, f64::max)
    }

    /// Row reads since construction or the last reset.
    pub fn touches(&self) -> u64 {
        self.touches.load(Ordering::Relaxed)
    }

    pub fn reset_touches(&self) {
        self.touches.store(0, Ordering::Relaxed);
    }

    /// Uncounted row access for checks, I/O and reference solutions.
    pub fn row_unchecked(&self, i: usize) -> &[f64] {
        &self.rows[i * self.d..(i + 1) * self.d]
    }

    fn row(&self, i: usize) -> &[f64] {
        self.touches.fetch_add(1, Ordering::Relaxed);
        self.row_unchecked(i)
    }

    /// `out += scale * sum_{i in range} a_i a_i^T v`, one read per row.
    pub fn normal_apply_add(&self, range: Range<usize>, scale: f64, v: &[f64], out: &mut [f64], ledger: &OracleLedger) {
        ledger.record_data(range.len() as u64);
        for i in range {
            let a = self.row(i);
            axpy(scale * dot(a, v), a, out);
        }
    }

    /// `out += scale * sum_{i in range} a_i (a_i^T x - b_i)`, one read per row.
    pub fn residual_grad_add(&self, range: Range<usize>, scale: f64, x: &[f64], out: &mut [f64], ledger: &OracleLedger) {
        ledger.record_data(range.len() as u64);
        for i in range {
            let a = self.row(i);
            axpy(scale * (dot(a, x) - self.targets[i]), a, out);
        }
    }

    /// `∇F(x)`, reading every row once.
    pub fn full_gradient(&self, x: &[f64], ledger: &OracleLedger) -> Vec<f64> {
        let mut g: Vec<f64> = x.iter().map(|v| self.mu * v).collect();
        self.residual_grad_add(0..self.n, 1.0 / self.n as f64, x, &mut g, ledger);
        g
    }

    /// `F(x)`, uncounted.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let sq: f64 = (0..self.n)
            .map(|i| {
                let r = dot(self.row_unchecked(i), x) - self.targets[i];
                r * r
            })
            .sum();
        0.5 * sq / self.n as f64 + 0.5 * self.mu * dot(x, x)
    }

    /// `A^T A / n + mu I`, uncounted.
    pub fn dense_hessian(&self) -> DenseMatrix {
        let mut h = self.batch_gram(0..self.n, 1.0 / self.n as f64);
        h.add_identity(self.mu);
        h
    }

    /// `scale * sum_{i in range} a_i a_i^T`, uncounted.
    pub fn batch_gram(&self, range: Range<usize>, scale: f64) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.d, self.d);
        for i in range {
            let a = self.row_unchecked(i);
            for p in 0..self.d {
                for q in 0..self.d {
                    g[(p, q)] += scale * a[p] * a[q];
                }
            }
        }
        g
    }

    /// Minimizer from the normal equations, uncounted. Test scale only.
    pub fn reference_solution(&self) -> Result<Vec<f64>> {
        let mut atb = vec![0.0; self.d];
        for i in 0..self.n {
            axpy(self.targets[i] / self.n as f64, self.row_unchecked(i), &mut atb);
        }
        let neg: Vec<f64> = atb.iter().map(|v| -v).collect();
        direct_solve(&self.dense_hessian(), &neg)
    }

    /// Same rows in the order given by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(OptError::DimensionMismatch { expected: self.n, got: perm.len() });
        }
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut targets = Vec::with_capacity(self.n);
        for &p in perm {
            rows.extend_from_slice(self.row_unchecked(p));
            targets.push(self.targets[p]);
        }
        let mut out = Self::from_flat(self.n, self.d, rows, targets, self.mu)?;
        out.scale = self.scale;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_equations_on_tiny_set() {
        let ds = RegressionDataset::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 2.0], 0.5).unwrap();
        // (I/2 + I/2) x = (1, 2)/2
        let x = ds.reference_solution().unwrap();
        assert!((x[0] - 0.5).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let g = ds.full_gradient(&x, &OracleLedger::new());
        assert!(norm(&g) < 1e-14);
        assert_eq!(ds.touches(), 2);
    }

    #[test]
    fn normalize_bounds_rows() {
        let mut ds = RegressionDataset::new(vec![vec![3.0, 4.0], vec![1.0, 0.0]], vec![1.0, 1.0], 0.0).unwrap();
        ds.normalize();
        assert!((ds.max_row_norm() - 1.0).abs() < 1e-15);
        assert_eq!(ds.scale, 5.0);
    }
}
