//! Constants and tolerances of the cubic-regularization solver.

use oracle_core::{OptError, Result};

#[derive(Debug, Clone)]
pub struct CubicConfig {
    /// Target gradient accuracy.
    pub eps: f64,
    /// Hessian-Lipschitz constant.
    pub h: f64,
    pub c1: f64,
    pub c2: f64,
    /// Exponent in the `2^{-c}` safety factor of the subproblem accuracy.
    pub c: f64,
    /// Subproblem accuracy; `None` derives it from `tau_bound`.
    pub eps_b: Option<f64>,
    /// Upper bound on the degeneracy level `tau`; `None` uses `2 d ||∇²f(x0)||` from a power estimate.
    pub tau_bound: Option<f64>,
    /// Inner bisection cap; `None` uses `ceil(log2((u - l) / (c2 sqrt(eps/H)))) + 2`.
    pub k_cap: Option<usize>,
    /// Bisection rounds before the best short probe is returned.
    pub max_rounds: usize,
    pub max_doublings: usize,
    pub max_iters: usize,
    /// Also require `lambda >= -exit_curvature()` before stopping on a short step.
    pub curvature_guard: bool,
    pub seed: u64,
}

impl CubicConfig {
    pub fn new(eps: f64, h: f64) -> Self {
        Self {
            eps,
            h,
            c1: 1.0,
            c2: 1.0,
            c: 1.0,
            eps_b: None,
            tau_bound: None,
            k_cap: None,
            max_rounds: 20,
            max_doublings: 60,
            max_iters: 10_000,
            curvature_guard: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps", self.eps),
            ("H", self.h),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c", self.c),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(OptError::InvalidParameter(format!("{name} = {v}")));
            }
        }
        if let Some(e) = self.eps_b {
            if !(e > 0.0) {
                return Err(OptError::InvalidParameter(format!("eps_B = {e}")));
            }
        }
        if let Some(t) = self.tau_bound {
            if !(t > 0.0) {
                return Err(OptError::InvalidParameter(format!("tau = {t}")));
            }
        }
        if self.max_rounds == 0 || self.max_doublings == 0 {
            return Err(OptError::InvalidParameter("search caps must be positive".into()));
        }
        Ok(())
    }

    /// `sqrt(eps / H)`, the exit radius.
    pub fn radius_unit(&self) -> f64 {
        (self.eps / self.h).sqrt()
    }

    /// `sqrt(H eps)`, the curvature scale.
    pub fn curvature_unit(&self) -> f64 {
        (self.eps * self.h).sqrt()
    }

    /// `2^{-c} min{(c2^3/2) sqrt(eps^3/H), (4c1+2c2)^4 eps^2.5 H^0.5 / (2 tau^2)}`.
    pub fn eps_b_for(&self, tau: f64) -> f64 {
        let a = 0.5 * self.c2.powi(3) * (self.eps.powi(3) / self.h).sqrt();
        let b = (4.0 * self.c1 + 2.0 * self.c2).powi(4) * self.eps.powf(2.5) * self.h.sqrt() / (2.0 * tau * tau);
        2f64.powf(-self.c) * a.min(b)
    }

    /// `C_g = (68 c1^2 + 79 c1 c2 + 23 c2^2) / 2`.
    pub fn grad_constant(&self) -> f64 {
        grad_constant(self.c1, self.c2)
    }

    /// `C_h = (16 c1 + 11 c2) / 2`.
    pub fn curvature_constant(&self) -> f64 {
        curvature_constant(self.c1, self.c2)
    }

    /// Descent factor `kappa` in `f(x_k) - f(x_{k+1}) >= kappa H r^3`.
    pub fn descent_kappa(&self) -> f64 {
        let (c1, c2) = (self.c1, self.c2);
        (8.0 * c1.powi(3) + 24.0 * c1 * c1 * c2 + 12.0 * c1 * c1 * c2 + c2.powi(3))
            / (12.0 * (4.0 * c1 + 2.0 * c2).powi(3))
    }

    /// Radius above which the descent factor applies.
    pub fn descent_radius(&self) -> f64 {
        (4.0 * self.c1 + 2.0 * self.c2) * self.radius_unit()
    }

    /// `(C_h - c1/2 - 1) sqrt(H eps)`: a short step from a point whose eigenvalue estimate
    /// is above minus this value lands inside the curvature bound of the certificate.
    pub fn exit_curvature(&self) -> f64 {
        (self.curvature_constant() - 0.5 * self.c1 - 1.0).max(0.0) * self.curvature_unit()
    }

    /// Iteration budget `2 Delta sqrt(H) eps^{-3/2} / (kappa (4c1+2c2)^3) + 10` for a known gap `Delta`.
    pub fn iteration_budget(&self, delta: f64) -> usize {
        let per_step = self.descent_kappa() * (4.0 * self.c1 + 2.0 * self.c2).powi(3) * self.eps.powf(1.5) / self.h.sqrt();
        (2.0 * delta.max(0.0) / per_step).ceil() as usize + 10
    }
}

pub fn grad_constant(c1: f64, c2: f64) -> f64 {
    0.5 * (68.0 * c1 * c1 + 79.0 * c1 * c2 + 23.0 * c2 * c2)
}

pub fn curvature_constant(c1: f64, c2: f64) -> f64 {
    0.5 * (16.0 * c1 + 11.0 * c2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_constants() {
        let cfg = CubicConfig::new(1e-4, 1.0);
        assert_eq!(cfg.grad_constant(), 85.0);
        assert_eq!(cfg.curvature_constant(), 13.5);
        assert!((cfg.descent_kappa() - 45.0 / 2592.0).abs() < 1e-15);
        assert!((cfg.descent_radius() - 0.06).abs() < 1e-15);
    }

    #[test]
    fn eps_b_takes_the_smaller_branch() {
        let cfg = CubicConfig::new(1e-4, 1.0);
        let small_tau = cfg.eps_b_for(1e-6);
        assert!((small_tau - 0.25 * 1e-6).abs() < 1e-20);
        let big_tau = cfg.eps_b_for(1e3);
        assert!((big_tau - 0.5 * 1296.0 * 1e-10 / 2e6).abs() < 1e-24);
    }

    #[test]
    fn rejects_nonpositive() {
        let mut cfg = CubicConfig::new(1e-4, 1.0);
        assert!(cfg.validate().is_ok());
        cfg.c2 = 0.0;
        assert!(cfg.validate().is_err());
    }
}
