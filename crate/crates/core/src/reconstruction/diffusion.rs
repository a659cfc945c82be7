//! Inversions in the diffusion regime: a fixed point for σ_a and the direct
//! ψ-equation for σ_b.

use super::{
    bounds, initial_guess, mask_below, masked_indices, masked_l2, masked_l2_diff, FixedPointLog,
    ReconstructionOptions, ReconstructionResult,
};
use crate::boundary::BoundaryTrace;
use crate::coefficients::CoefficientSet;
use crate::diffusion::{solve_with_operator, EllipticOperator};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Side;

/// Cells with `u⁽¹⁾` below this are excluded from division.
const DIFFUSION_MASK: f64 = 1e-12;

/// Recovers σ_a from `h1 = Ξσ_a u⁽¹⁾(σ_a)` with γ and Ξ known.
pub fn reconstruct_sigma_a_diffusion(
    c: &CoefficientSet,
    g: &BoundaryTrace,
    h1: &ScalarField,
    opts: &ReconstructionOptions,
) -> Result<ReconstructionResult> {
    let grid = &c.grid;
    h1.check_grid(grid)?;
    g.check_grid(grid)?;
    let (lo, hi) = bounds(opts, c.lower, c.upper)?;
    let mut sigma = initial_guess(grid, opts, lo, hi)?;
    let layer = grid.boundary_layer_mask();
    let frozen: Vec<bool> = match c.known_layer {
        Some(known) => {
            for (v, m) in sigma.values_mut().iter_mut().zip(&layer) {
                if *m {
                    *v = known.sigma_a;
                }
            }
            layer
        }
        None => vec![false; grid.ncells()],
    };
    let area = grid.cell_area();
    let floor = hi * grid.area().sqrt();
    let xi = c.xi.values();
    let mut log = FixedPointLog::new("sigma_a diffusion fixed point");
    for _ in 0..opts.max_iter {
        let op = EllipticOperator::new(grid, &c.gamma, &sigma)?;
        let u1 = solve_with_operator(grid, &op, Some(g), None, None, &opts.diffusion)?.u;
        let mask = mask_below(u1.values(), DIFFUSION_MASK, "u1")?;
        let mut next = sigma.clone();
        for (i, v) in next.values_mut().iter_mut().enumerate() {
            if !mask[i] && !frozen[i] {
                *v = (h1.values()[i] / (xi[i] * u1.values()[i])).clamp(lo, hi);
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

/// σ_a on ∂Ω as `H⁽¹⁾/(Ξ g)`, with `h1` and Ξ extrapolated linearly from the
/// two nearest cell centres to each boundary face. Indexed by boundary face.
pub fn boundary_sigma_a_diffusion(
    c: &CoefficientSet,
    g: &BoundaryTrace,
    h1: &ScalarField,
) -> Result<Vec<f64>> {
    let grid = &c.grid;
    h1.check_grid(grid)?;
    g.check_grid(grid)?;
    let nx = grid.nx();
    let extrapolate = |f: &[f64], face: usize| -> f64 {
        let bf = grid.boundary_face(face);
        let (i, j) = grid.coords(bf.cell);
        let inner = match bf.side {
            Side::Bottom => (j + 1) * nx + i,
            Side::Top => (j - 1) * nx + i,
            Side::Left => j * nx + i + 1,
            Side::Right => j * nx + i - 1,
        };
        1.5 * f[bf.cell] - 0.5 * f[inner]
    };
    (0..grid.n_boundary_faces())
        .map(|f| {
            let gv = g.get(f);
            if !(gv > 0.0) {
                return Err(Error::Precondition(format!(
                    "boundary sigma_a needs g > 0, face {f} has {gv}"
                )));
            }
            Ok(extrapolate(h1.values(), f) / (extrapolate(c.xi.values(), f) * gv))
        })
        .collect()
}

/// Direct σ_b inversion: with `U = h2/(Ξσ_a)`, solve
/// `−∇·γ∇ψ = −∇·γ∇U + σ_a U`, `ψ = U` on ∂Ω, then `σ_b = ψσ_a/(2(u⁽¹⁾)²)`.
///
/// On the grid the problem is solved for `ψ − U`, which has zero boundary
/// data and source `σ_a U`; this uses the same operator as the forward
/// solve, so `ψ − U = −u⁽²⁾` holds to CG tolerance.
pub fn reconstruct_sigma_b_diffusion(
    c: &CoefficientSet,
    g: &BoundaryTrace,
    h2: &ScalarField,
    opts: &ReconstructionOptions,
) -> Result<ReconstructionResult> {
    let grid = &c.grid;
    h2.check_grid(grid)?;
    c.check_solvable()?;
    let op = EllipticOperator::new(grid, &c.gamma, &c.sigma_a)?;
    let u1 = solve_with_operator(grid, &op, Some(g), None, None, &opts.diffusion)?.u;
    let mask = mask_below(u1.values(), DIFFUSION_MASK, "u1")?;
    let xs = c.xi.zip_map(&c.sigma_a, |x, s| x * s);
    let big_u = h2.zip_map(&xs, |h, d| h / d);
    let src = big_u.zip_map(&c.sigma_a, |u, s| s * u);
    let pure = EllipticOperator::pure(grid, &c.gamma)?;
    let sol = solve_with_operator(grid, &pure, None, Some(&src), None, &opts.diffusion)?;
    let psi = big_u.zip_map(&sol.u, |a, b| a + b);
    let mut sigma_b = ScalarField::zeros(grid);
    for (i, v) in sigma_b.values_mut().iter_mut().enumerate() {
        if !mask[i] {
            let u = u1.values()[i];
            *v = psi.values()[i] * c.sigma_a.values()[i] / (2.0 * u * u);
        }
    }
    let residual = sol.report.residual;
    Ok(ReconstructionResult {
        field: sigma_b,
        iterations: 1,
        trace: vec![masked_l2(sol.u.values(), &mask, grid.cell_area())],
        residual,
        masked: masked_indices(&mask),
        contraction_estimate: None,
    })
}
