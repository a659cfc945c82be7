//! Fixed-point inversions in the transport regime:
//! `σ_a ← h1 / (Ξ⟨u⁽¹⁾(σ_a)⟩)` and
//! `σ_b ← (h2/Ξ − σ_a⟨u⁽²⁾(σ_b)⟩) / (2⟨u⁽¹⁾⟩²)`.

use super::certificate::certificate_from_u1;
use super::{
    bounds, initial_guess, mask_below, masked_indices, masked_l2, masked_l2_diff, FixedPointLog,
    ReconstructionOptions, ReconstructionResult,
};
use crate::boundary::BoundarySource;
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::field::{velocity_average, PhaseField, ScalarField};
use crate::linearization::solve_u2_with;
use crate::quadrature::Angular;
use crate::transport::TransportOperator;

/// `max(ε′/10, 1e−12)` with `ε′ = g̲ e^{−d_Ω σ̄}`; `σ̄` is bounded by
/// `C₀ + max σ_s` when σ_a is unknown.
fn mask_threshold(c: &CoefficientSet, g: &BoundarySource, sigma_bar: f64) -> f64 {
    let g_min = g.inf();
    let eps = if g_min > 0.0 {
        g_min * (-c.grid.diameter() * sigma_bar).exp()
    } else {
        0.0
    };
    (eps / 10.0).max(1e-12)
}

fn freeze_layer(c: &CoefficientSet, field: &mut ScalarField) -> Vec<bool> {
    let layer = c.grid.boundary_layer_mask();
    if let Some(known) = c.known_layer {
        for (v, m) in field.values_mut().iter_mut().zip(&layer) {
            if *m {
                *v = known.sigma_a;
            }
        }
        layer
    } else {
        vec![false; layer.len()]
    }
}

/// Recovers σ_a from first-order data with σ_s and Ξ known. `c.sigma_a` is
/// ignored except through the declared known boundary layer.
pub fn reconstruct_sigma_a_transport(
    c: &CoefficientSet,
    angular: &Angular,
    g: &BoundarySource,
    h1: &ScalarField,
    opts: &ReconstructionOptions,
) -> Result<ReconstructionResult> {
    let grid = &c.grid;
    h1.check_grid(grid)?;
    g.check_shape(grid, angular.ndirs())?;
    let (lo, hi) = bounds(opts, c.lower, c.upper)?;
    let mut sigma = initial_guess(grid, opts, lo, hi)?;
    let frozen = freeze_layer(c, &mut sigma);
    let threshold = mask_threshold(c, g, hi + c.sigma_s.max());
    let area = grid.cell_area();
    let xi = c.xi.values();
    let floor = hi * grid.area().sqrt();
    let mut log = FixedPointLog::new("sigma_a transport fixed point");
    for _ in 0..opts.max_iter {
        let cs = c.clone().with_sigma_a(sigma.clone());
        let op = TransportOperator::new(&cs, angular)?;
        let u1 = op.solve(Some(g), None, None, &opts.transport)?.u;
        let avg = velocity_average(&u1, &angular.quadrature)?;
        let mask = mask_below(avg.values(), threshold, "<u1>")?;
        let mut next = sigma.clone();
        for (i, v) in next.values_mut().iter_mut().enumerate() {
            if !mask[i] && !frozen[i] {
                *v = (h1.values()[i] / (xi[i] * avg.values()[i])).clamp(lo, hi);
            }
        }
        let update = masked_l2_diff(next.values(), sigma.values(), &mask, area);
        sigma = next;
        if log.push(update, masked_l2(sigma.values(), &mask, area).max(floor), opts.tol)? {
            return Ok(ReconstructionResult {
                field: sigma,
                iterations: log.trace.len(),
                residual: update,
                contraction_estimate: log.ratio(),
                trace: log.trace,
                masked: masked_indices(&mask),
            });
        }
    }
    Err(log.not_converged())
}

/// Recovers σ_b from second-order data with Ξ, σ_a, σ_s known.
pub fn reconstruct_sigma_b_transport(
    c: &CoefficientSet,
    angular: &Angular,
    g: &BoundarySource,
    h2: &ScalarField,
    opts: &ReconstructionOptions,
) -> Result<ReconstructionResult> {
    let op = TransportOperator::new(c, angular)?;
    let u1 = op.solve(Some(g), None, None, &opts.transport)?.u;
    reconstruct_sigma_b_transport_with(&op, c, g, &u1, h2, opts)
}

/// As [`reconstruct_sigma_b_transport`] with the operator and `u⁽¹⁾`
/// supplied, so repeated inversions share them.
pub fn reconstruct_sigma_b_transport_with(
    op: &TransportOperator,
    c: &CoefficientSet,
    g: &BoundarySource,
    u1: &PhaseField,
    h2: &ScalarField,
    opts: &ReconstructionOptions,
) -> Result<ReconstructionResult> {
    let grid = &c.grid;
    let angular = op.angular();
    h2.check_grid(grid)?;
    let avg1 = velocity_average(u1, &angular.quadrature)?;
    let mask = mask_below(avg1.values(), mask_threshold(c, g, c.sigma_bar()), "<u1>")?;
    if opts.enforce_admissibility {
        let h1 = c.xi.zip_map(&c.sigma_a, |x, s| x * s).zip_map(&avg1, |a, b| a * b);
        let cert = certificate_from_u1(c, angular, g, &h1, u1, opts.alpha_min)?;
        if !cert.in_a2 {
            return Err(Error::Precondition(format!(
                "A2: Pi >= 1 (Pi = {:.4}), sigma_b stability is not certified",
                cert.pi
            )));
        }
        if !cert.in_a1 {
            return Err(Error::Precondition(format!(
                "A1: alpha = {:.4} is below the required margin",
                cert.alpha
            )));
        }
    }
    let (lo, hi) = bounds(opts, c.lower, c.upper)?;
    let mut sigma_b = initial_guess(grid, opts, lo, hi)?;
    let area = grid.cell_area();
    let (xi, sa) = (c.xi.values(), c.sigma_a.values());
    let floor = hi * grid.area().sqrt();
    let mut log = FixedPointLog::new("sigma_b transport fixed point");
    for _ in 0..opts.max_iter {
        let u2 = solve_u2_with(op, &sigma_b, u1, &opts.transport)?;
        let avg2 = velocity_average(&u2, &angular.quadrature)?;
        let mut next = sigma_b.clone();
        for (i, v) in next.values_mut().iter_mut().enumerate() {
            if !mask[i] {
                let a1 = avg1.values()[i];
                let raw = (h2.values()[i] / xi[i] - sa[i] * avg2.values()[i]) / (2.0 * a1 * a1);
                *v = raw.clamp(lo, hi);
            }
        }
        let update = masked_l2_diff(next.values(), sigma_b.values(), &mask, area);
        sigma_b = next;
        if log.push(update, masked_l2(sigma_b.values(), &mask, area).max(floor), opts.tol)? {
            return Ok(ReconstructionResult {
                field: sigma_b,
                iterations: log.trace.len(),
                residual: update,
                contraction_estimate: log.ratio(),
                trace: log.trace,
                masked: masked_indices(&mask),
            });
        }
    }
    Err(log.not_converged())
}
