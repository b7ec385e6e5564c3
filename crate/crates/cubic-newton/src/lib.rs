//! Inexact cubic-regularized Newton method for nonconvex objectives with
//! Lipschitz Hessian.
//!
//! Each outer step picks a radius `r` by search and minimizes the convex model
//! `f_x(y) + (H r / 4) ||y - x||^2` with AGMAS. The method stops once an accepted
//! step is shorter than `sqrt(eps / H)`; the point is then an
//! `(eps, sqrt(H eps))`-approximate second-order stationary point up to the
//! constants `C_g` and `C_h`.

pub mod certificate;
pub mod config;
pub mod search;
pub mod solver;

pub use certificate::{ssp_certificate, ssp_certificate_with, SspCertificate, SSP_MAX_DIM};
pub use config::{curvature_constant, grad_constant, CubicConfig};
pub use search::{c_cubic_binary_search, cubic_subproblem, CubicState, CubicStep};
pub use solver::{cubic_solve, final_grad_norm, CubicIterate, CubicReport};
