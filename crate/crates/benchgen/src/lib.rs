//! Synthetic benchmark instances with machine-checkable certificates, and the
//! log-log fit that turns oracle-count sweeps into scaling exponents.
//!
//! Generators are pure functions of their spec and seed.

pub mod fit;
pub mod instance;
pub mod keyvalue;
pub mod nesterov;
pub mod regression;
pub mod spectrum;
pub mod wishart;

pub use fit::{fit_scaling_exponent, ScalingFit};
pub use instance::{dense_matrix, instance_files, write_matrix_instance, write_quadratic_instance, GenSpec, InstanceFiles};
pub use keyvalue::{fmt_f64, KeyValues};
pub use nesterov::{gen_nesterov_chain, nesterov_chain_value, Tridiagonal};
pub use regression::{gen_regression_dataset, PlantedRegression};
pub use spectrum::{
    gen_powerlaw_quadratic, GeneratedQuadratic, HouseholderProduct, RotatedDiagonal, SpectralCertificate, SpectrumLaw, SpectrumSpec,
    DENSE_LIMIT,
};
pub use wishart::{
    assemble_hard_matrix, calibrate_wishart_event, certify_hard_instance, gen_wishart_hard_instance, in_wishart_event, sample_wishart,
    HardCertificate, HardInstance, HardInstanceSpec, HardRegime, WishartCalibration, WishartConstants, GAP_WINDOW, MAX_WISHART_DRAWS,
    TOP_FACTOR, TRACE_FACTOR, TRACE_SHIFT, WISHART_EVENT,
};
