//! Inexact large-step accelerated Newton proximal extragradient for convex
//! objectives with Lipschitz Hessian.
//!
//! Every outer step searches for a step size `gamma` whose regularized
//! second-order subproblem, solved by AGMAS, lands in the large-step window
//! `2 sigma_l / H <= gamma ||y - x~|| <= 2 sigma_u / H`.
//!
//! Inside a subproblem every product with `∇²f(x~) + I/gamma` is one gradient of
//! the model and is charged as a gradient call. The power steps behind the
//! accuracy threshold charge HVPs.

pub mod model;
pub mod solver;

pub use model::{anpe_subproblem, eps_a_threshold, local_model, soe_gradient, EpsA, LocalModel, NUMERIC_FLOOR};
pub use solver::{
    anpe_solve, c_binary_search, next_coefficient, AnpeConfig, AnpeIterate, AnpeReport, AnpeState, SearchOutcome,
};
