//! Semilinear radiative transport and diffusion models for two-photon
//! quantitative photoacoustic imaging: forward solvers, linearizations,
//! internal data, coefficient reconstruction and sensitivity sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod coefficients;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod linearization;
pub mod norms;
pub mod quadrature;
pub mod reconstruction;
pub mod transport;
pub mod uq;

pub use boundary::{BoundarySource, BoundaryTrace};
pub use coefficients::{validate_coefficients, CoefficientCertificate, CoefficientSet, KnownLayer};
pub use error::{Error, Result};
pub use field::{apply_scattering, velocity_average, PhaseField, ScalarField};
pub use grid::{boundary_distance, SpatialGrid};
pub use linearization::Regime;
pub use norms::{discrete_norm, FieldRef, Norm};
pub use quadrature::{Angular, AngularQuadrature, ScatteringKernel};
