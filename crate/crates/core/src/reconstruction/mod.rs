//! Admissibility certificates and the constructive inversions for σ_a (from
//! first-order data) and σ_b (from second-order data) in both regimes.

mod certificate;
mod diffusion;
mod transport;

pub use certificate::{
    certificate_from_u1, certify_admissibility_transport, diffusion_stability_constants,
    AdmissibilityCertificate, DiffusionStability,
};
pub use diffusion::{boundary_sigma_a_diffusion, reconstruct_sigma_a_diffusion, reconstruct_sigma_b_diffusion};
pub use transport::{reconstruct_sigma_a_transport, reconstruct_sigma_b_transport, reconstruct_sigma_b_transport_with};

use crate::diffusion::DiffusionOptions;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::SpatialGrid;
use crate::transport::TransportOptions;
use std::fmt;

/// Largest fraction of cells that may be masked before a reconstruction
/// refuses to continue.
pub const MAX_MASKED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionOptions {
    /// Relative tolerance on the L² norm of the fixed-point update.
    pub tol: f64,
    pub max_iter: usize,
    /// Clamp bounds; default to the coefficient set's `[c0, C0]`.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Initial iterate; defaults to the constant `(c0 + C0)/2`.
    pub initial: Option<ScalarField>,
    /// Refuse the transport σ_b inversion when Π ≥ 1.
    pub enforce_admissibility: bool,
    /// Declared A₁ margin; `None` accepts any positive α.
    pub alpha_min: Option<f64>,
    pub transport: TransportOptions,
    pub diffusion: DiffusionOptions,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 500,
            lower: None,
            upper: None,
            initial: None,
            enforce_admissibility: true,
            alpha_min: None,
            transport: TransportOptions {
                tol: 1e-13,
                max_iter: 20_000,
            },
            diffusion: DiffusionOptions {
                tol: 1e-13,
                max_iter: 100_000,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub field: ScalarField,
    pub iterations: usize,
    /// L² norm of each fixed-point update over unmasked cells.
    pub trace: Vec<f64>,
    pub residual: f64,
    /// Cells excluded from division and from error norms.
    pub masked: Vec<usize>,
    /// Largest ratio of consecutive updates after the second iteration.
    pub contraction_estimate: Option<f64>,
}

impl fmt::Display for ReconstructionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "iterations = {}", self.iterations)?;
        writeln!(f, "residual = {:e}", self.residual)?;
        writeln!(f, "masked_cells = {}", self.masked.len())?;
        if let Some(r) = self.contraction_estimate {
            writeln!(f, "contraction_estimate = {r:e}")?;
        }
        Ok(())
    }
}

/// Cells below `threshold`, failing if they exceed the allowed fraction.
pub(crate) fn mask_below(values: &[f64], threshold: f64, what: &str) -> Result<Vec<bool>> {
    let mask: Vec<bool> = values.iter().map(|v| !(*v >= threshold)).collect();
    let count = mask.iter().filter(|m| **m).count();
    if count as f64 > MAX_MASKED_FRACTION * values.len() as f64 {
        return Err(Error::Precondition(format!(
            "{what} is below the mask threshold {threshold:e} on {count} of {} cells",
            values.len()
        )));
    }
    Ok(mask)
}

pub(crate) fn masked_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect()
}

/// `‖a − b‖_{L²(Ω)}` over cells with `mask == false`.
pub(crate) fn masked_l2_diff(a: &[f64], b: &[f64], mask: &[bool], area: f64) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .zip(mask)
        .filter(|(_, m)| !**m)
        .map(|((x, y), _)| (x - y) * (x - y))
        .sum();
    (s * area).sqrt()
}

pub(crate) fn masked_l2(a: &[f64], mask: &[bool], area: f64) -> f64 {
    let s: f64 = a.iter().zip(mask).filter(|(_, m)| !**m).map(|(x, _)| x * x).sum();
    (s * area).sqrt()
}

/// Resolves clamp bounds and checks they are ordered.
pub(crate) fn bounds(opts: &ReconstructionOptions, lower: f64, upper: f64) -> Result<(f64, f64)> {
    let lo = opts.lower.unwrap_or(lower);
    let hi = opts.upper.unwrap_or(upper);
    if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::Precondition(format!("invalid clamp bounds [{lo}, {hi}]")));
    }
    Ok((lo, hi))
}

pub(crate) fn initial_guess(
    grid: &SpatialGrid,
    opts: &ReconstructionOptions,
    lo: f64,
    hi: f64,
) -> Result<ScalarField> {
    match &opts.initial {
        Some(f) => {
            f.check_grid(grid)?;
            Ok(f.map(|v| v.clamp(lo, hi)))
        }
        None => Ok(ScalarField::constant(grid, 0.5 * (lo + hi))),
    }
}

/// Fixed-point bookkeeping shared by the iterative inversions.
pub(crate) struct FixedPointLog {
    pub trace: Vec<f64>,
    name: &'static str,
}

impl FixedPointLog {
    pub fn new(name: &'static str) -> Self {
        Self { trace: Vec::new(), name }
    }

    /// Records an update; `Ok(true)` when converged.
    pub fn push(&mut self, update: f64, scale: f64, tol: f64) -> Result<bool> {
        self.trace.push(update);
        if !update.is_finite() {
            return Err(Error::Divergence(format!(
                "{}: update became non-finite after {} iterations",
                self.name,
                self.trace.len()
            )));
        }
        let n = self.trace.len();
        if n > 3 && update > 1e3 * self.trace[0] {
            return Err(Error::Divergence(format!(
                "{}: update grew to {update:e} (contraction estimate {:.3})",
                self.name,
                self.ratio().unwrap_or(f64::NAN)
            )));
        }
        if n > 8 && self.trace[n - 6..].windows(2).all(|w| w[1] >= w[0]) {
            return Err(Error::Divergence(format!(
                "{}: fixed point is not contracting (estimate {:.3})",
                self.name,
                self.ratio().unwrap_or(f64::NAN)
            )));
        }
        Ok(update <= tol * scale)
    }

    /// Largest ratio of consecutive updates from the third iteration on.
    pub fn ratio(&self) -> Option<f64> {
        self.trace
            .windows(2)
            .skip(1)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .reduce(f64::max)
    }

    pub fn not_converged(&self) -> Error {
        Error::NotConverged {
            solver: self.name,
            iterations: self.trace.len(),
            residual: *self.trace.last().unwrap_or(&f64::NAN),
        }
    }
}
