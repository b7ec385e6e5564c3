//! AGMAS: accelerated gradient method with adaptive subspace search.
//!
//! The solver first peels the large eigenvalues of `A` with the eigen extractor,
//! then runs proximal AGD on the deflated part (the low-rank part goes into a
//! closed-form prox), plain AGD, or CG, depending on which stopping rule fired.

pub mod agd;
pub mod cg;
pub mod prox;
pub mod solver;

pub use agd::{accelerated_gradient, accelerated_prox_gradient, AgdParams, GradientSource, QuadraticGradient};
pub use cg::conjugate_gradient;
pub use prox::{prox_lowrank_quadratic, LowRankProx};
pub use solver::{agmas_plan, agmas_solve, AgmasPlan, agmas_solve_from, dispatch, solve_to_eps_nonstrongly, AgmasConfig, TUNED_LEAK_FRACTION, TUNED_SMOOTHNESS, TUNED_STOP_CONST};
