//! Integral form of the linear transport equation evaluated along
//! characteristics, independent of the sweep discretization:
//!
//! `u(x, v) = e^{−τ(x, x₋)} g(x₋, v) + ∫₀^{τ₋} σ_s(x − s v) e^{−τ(x, x − s v)} (Θu)(x − s v, v) ds`
//!
//! where `x₋ = x − τ₋ v` is the backward exit point and optical depths are
//! integrated exactly over the piecewise-constant cross-sections.

use crate::boundary::BoundarySource;
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::field::{in_scatter, out_scatter_rates, PhaseField};
use crate::grid::SpatialGrid;
use crate::quadrature::Angular;
use rayon::prelude::*;

/// A piece of a backward ray inside one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySegment {
    pub cell: usize,
    pub start: f64,
    pub end: f64,
}

/// Walks from `p` along `d` through the grid cells until the boundary.
/// Returns the segments and the exit point.
pub fn trace_ray(grid: &SpatialGrid, p: [f64; 2], d: [f64; 2]) -> Result<(Vec<RaySegment>, [f64; 2])> {
    if !grid.contains(p) {
        return Err(Error::OutsideDomain { x: p[0], y: p[1] });
    }
    let (nx, ny) = (grid.nx() as i64, grid.ny() as i64);
    let o = grid.origin();
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut i = (((p[0] - o[0]) / hx).floor() as i64).clamp(0, nx - 1);
    let mut j = (((p[1] - o[1]) / hy).floor() as i64).clamp(0, ny - 1);
    let tie = 1e-12 * grid.h();
    let mut t = 0.0;
    let mut pos = p;
    let mut segs = Vec::new();
    loop {
        let tx = if d[0] > 0.0 {
            (o[0] + (i + 1) as f64 * hx - pos[0]) / d[0]
        } else if d[0] < 0.0 {
            (o[0] + i as f64 * hx - pos[0]) / d[0]
        } else {
            f64::INFINITY
        };
        let ty = if d[1] > 0.0 {
            (o[1] + (j + 1) as f64 * hy - pos[1]) / d[1]
        } else if d[1] < 0.0 {
            (o[1] + j as f64 * hy - pos[1]) / d[1]
        } else {
            f64::INFINITY
        };
        let step = tx.min(ty).max(0.0);
        if !step.is_finite() {
            return Err(Error::Grid(format!("degenerate ray direction {d:?}")));
        }
        segs.push(RaySegment {
            cell: (j * nx + i) as usize,
            start: t,
            end: t + step,
        });
        t += step;
        pos = [pos[0] + step * d[0], pos[1] + step * d[1]];
        let cross_x = tx <= ty + tie;
        let cross_y = ty <= tx + tie;
        if cross_x {
            i += if d[0] > 0.0 { 1 } else { -1 };
        }
        if cross_y {
            j += if d[1] > 0.0 { 1 } else { -1 };
        }
        if i < 0 || i >= nx || j < 0 || j >= ny {
            break;
        }
    }
    Ok((segs, pos))
}

/// Bilinear interpolation of cell-centred values, constant beyond the
/// outermost cell centres.
fn bilinear(grid: &SpatialGrid, f: &[f64], p: [f64; 2]) -> f64 {
    let o = grid.origin();
    let (nx, ny) = (grid.nx(), grid.ny());
    let sx = ((p[0] - o[0]) / grid.hx() - 0.5).clamp(0.0, (nx - 1) as f64);
    let sy = ((p[1] - o[1]) / grid.hy() - 0.5).clamp(0.0, (ny - 1) as f64);
    let i0 = (sx.floor() as usize).min(nx - 2);
    let j0 = (sy.floor() as usize).min(ny - 2);
    let (ax, ay) = (sx - i0 as f64, sy - j0 as f64);
    let at = |i: usize, j: usize| f[j * nx + i];
    (1.0 - ay) * ((1.0 - ax) * at(i0, j0) + ax * at(i0 + 1, j0))
        + ay * ((1.0 - ax) * at(i0, j0 + 1) + ax * at(i0 + 1, j0 + 1))
}

/// Inflow value at a boundary point for direction `k`: among the faces
/// touching the point, the lowest-index face carrying inflow for `k`.
fn inflow_at(grid: &SpatialGrid, g: &BoundarySource, p: [f64; 2], k: usize) -> f64 {
    grid.faces_at(p)
        .into_iter()
        .find(|&f| g.is_inflow(f, k))
        .map_or(0.0, |f| g.get(f, k))
}

/// Applies the integral form to a candidate solution `u`. Scattering
/// integrals use the trapezoid rule with steps at most `h/2` inside each cell.
pub fn characteristics_oracle(
    c: &CoefficientSet,
    angular: &Angular,
    g: &BoundarySource,
    u: &PhaseField,
) -> Result<PhaseField> {
    c.check_solvable()?;
    let grid = &c.grid;
    let nv = angular.ndirs();
    u.check_shape(grid, nv)?;
    g.check_shape(grid, nv)?;
    let scattering = !c.sigma_s.is_identically_zero();
    let theta_u = if scattering {
        Some(in_scatter(u, angular)?)
    } else {
        None
    };
    let rates = out_scatter_rates(angular);
    let sa = c.sigma_a.values();
    let ss = c.sigma_s.values();
    let n = grid.ncells();
    let max_step = 0.5 * grid.h();
    let mut out = PhaseField::zeros(grid, nv);
    out.values_mut()
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(k, block)| -> Result<()> {
            let v = angular.quadrature.direction(k);
            let d = [-v[0], -v[1]];
            let sigma_t = |cell: usize| sa[cell] + ss[cell] * rates[k];
            for (cell, dst) in block.iter_mut().enumerate() {
                let (i, j) = grid.coords(cell);
                let x = grid.center(i, j);
                let (segs, foot) = trace_ray(grid, x, d)?;
                let mut tau = 0.0;
                let mut acc = 0.0;
                for seg in &segs {
                    let st = sigma_t(seg.cell);
                    let len = seg.end - seg.start;
                    if let Some(th) = &theta_u {
                        let s_cell = ss[seg.cell];
                        if s_cell != 0.0 && len > 0.0 {
                            let th_k = th.block(k);
                            let m = (len / max_step).ceil().max(1.0) as usize;
                            let ds = len / m as f64;
                            let mut part = 0.0;
                            for node in 0..=m {
                                let s = seg.start + node as f64 * ds;
                                let pt = [x[0] + s * d[0], x[1] + s * d[1]];
                                let wgt = if node == 0 || node == m { 0.5 } else { 1.0 };
                                let depth = tau + st * (s - seg.start);
                                part += wgt * (-depth).exp() * bilinear(grid, th_k, pt);
                            }
                            acc += s_cell * part * ds;
                        }
                    }
                    tau += st * len;
                }
                *dst = (-tau).exp() * inflow_at(grid, g, foot, k) + acc;
            }
            Ok(())
        })?;
    Ok(out)
}
