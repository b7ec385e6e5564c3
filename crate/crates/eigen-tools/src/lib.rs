//! Eigenvalue routines driven only by operator products: leading eigenvectors,
//! the partial-deflation extractor and a two-stage smallest-eigenvalue finder.

pub mod extractor;
pub mod leading;
pub mod smallest;

pub use extractor::{eigen_extract, eigen_extract_op, ExtractMode, Extraction, ExtractorConfig, StopCriterion, LEVEL_FACTOR, RANK_CAP_FACTOR};
pub use leading::{
    certified_power_leading, estimate_norm, estimate_smallest_eigenvalue, leading_eigenvector, power_leading, power_steps, shift_invert_leading,
    LeadingEigen, LeadingSolver, MuEstimate, RAYLEIGH_SLACK,
};
pub use smallest::{
    find_smallest_eigenvalue, find_smallest_eigenvalue_at, find_smallest_eigenvalue_quadratic,
    find_smallest_eigenvalue_scaled, simultaneous_iteration, smallest_eig_stage1, smallest_eig_stage2, EigFinderState,
    Handoff, SmallestEigen, Stage1Outcome,
};
