//! Problem representations, oracle accounting and dense reference oracles.
//!
//! Every gradient or Hessian-vector product a solver sees goes through
//! [`Counted`] or [`CountingOracle`], which charge an [`OracleLedger`].
//! One product with `A` is one gradient call; low-rank corrections and vector
//! arithmetic are free.

pub mod deflation;
pub mod error;
pub mod fd;
pub mod io;
pub mod krylov;
pub mod ledger;
pub mod linalg;
pub mod operator;
pub mod problem;
pub mod report;
pub mod rng;
pub mod second_order;

pub use deflation::{LowRankDeflation, DEFLATION_SCALE};
pub use error::{OptError, Result};
pub use fd::finite_diff_check;
pub use krylov::{cg_solve, CgOutcome};
pub use ledger::{LedgerSnapshot, OracleLedger};
pub use linalg::{dense_eigendecomposition, direct_solve, DenseMatrix, SymmetricEigen};
pub use operator::{Counted, Deflated, DiagonalOperator, FnOperator, LinearOperator, Projected, Shifted};
pub use problem::{counting_gradient, deflated_gradient, QuadraticProblem};
pub use report::{Branch, SolverReport, Trace, TracePoint};
pub use second_order::{
    assemble_hessian, regularized_model, CountingOracle, DoubleWell, HessianOperator, HessianSnapshot, QuadraticOracle, QuarticQuadratic,
    SecondOrderOracle,
};
