//! Discrete-ordinates transport: linear solves, the semilinear Picard
//! solver and the characteristics oracle.

mod linear;
mod oracle;
mod semilinear;
mod sweep;

pub use linear::{
    positivity_bound_value, positivity_lower_bound, solve_linear_rte, ContractionCertificate,
    FaceField, TransportOperator, TransportOptions, TransportSolution, TransportSolveReport,
};
pub use oracle::{characteristics_oracle, trace_ray, RaySegment};
pub use semilinear::{contraction_certificate, solve_semilinear_rte, PicardOptions};
pub(crate) use semilinear::solve_semilinear_with;
