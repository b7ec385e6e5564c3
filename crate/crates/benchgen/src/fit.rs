//! Log-log slope fits for oracle-count sweeps.

use oracle_core::{OptError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Least-squares slope of `log(count)` against `log(parameter)`.
pub fn fit_scaling_exponent(sweep: &[(f64, f64)]) -> Result<ScalingFit> {
    if sweep.len() < 4 {
        return Err(OptError::InvalidParameter(format!("need at least 4 sweep points, got {}", sweep.len())));
    }
    if let Some((p, c)) = sweep.iter().find(|(p, c)| !(*p > 0.0 && *c > 0.0 && p.is_finite() && c.is_finite())) {
        return Err(OptError::InvalidParameter(format!("sweep point ({p}, {c}) is not positive")));
    }
    let mut params: Vec<f64> = sweep.iter().map(|(p, _)| *p).collect();
    params.sort_by(|a, b| a.total_cmp(b));
    if params.windows(2).any(|w| w[0] == w[1]) {
        return Err(OptError::InvalidParameter("sweep parameter values must be distinct".into()));
    }
    let n = sweep.len() as f64;
    let xs: Vec<f64> = sweep.iter().map(|(p, _)| p.ln()).collect();
    let ys: Vec<f64> = sweep.iter().map(|(_, c)| c.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(ScalingFit {
        slope,
        stderr,
        intercept,
        points: sweep.len(),
    })
}
