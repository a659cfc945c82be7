//! Small-data semilinear transport by Picard iteration around the linear
//! solution: `u = u₀ + w`, `w = T⁻¹(−σ_b ⟨u₀ + w⟩ (u₀ + w))` with zero inflow.

use super::linear::{
    ContractionCertificate, TransportOperator, TransportOptions, TransportSolution,
};
use crate::boundary::BoundarySource;
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::field::{velocity_average, PhaseField};
use crate::quadrature::Angular;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Relative tolerance on the sup-norm change of `w` between iterations.
    pub tol: f64,
    pub max_iter: usize,
    pub inner: TransportOptions,
    /// Refuse to iterate when the contraction certificate fails.
    pub require_certificate: bool,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            inner: TransportOptions {
                tol: 1e-12,
                max_iter: 10_000,
            },
            require_certificate: true,
        }
    }
}

/// Invariant-ball certificate for the Picard map with `k = C₂C₀`,
/// `ε = ‖g‖`. The ball radius is the smallest `δ` with `k(ε + δ)² ≤ δ`,
/// which exists iff `4kε < 1`.
pub fn contraction_certificate(k: f64, epsilon: f64) -> Option<ContractionCertificate> {
    let disc = 1.0 - 4.0 * k * epsilon;
    if !(disc > 0.0) || !(k > 0.0) {
        return None;
    }
    let delta = ((1.0 - 2.0 * k * epsilon) - disc.sqrt()) / (2.0 * k);
    let certified_ratio = k * (epsilon + delta);
    Some(ContractionCertificate {
        epsilon,
        delta,
        k,
        certified_ratio,
        lipschitz_bound: 2.0 * certified_ratio,
    })
}

/// Solves `v·∇u + σ_a u + σ_b⟨u⟩u = σ_s K(u)`, `u = g` on Γ₋.
pub fn solve_semilinear_rte(
    c: &CoefficientSet,
    angular: &Angular,
    g: &BoundarySource,
    opts: &PicardOptions,
) -> Result<TransportSolution> {
    let op = TransportOperator::new(c, angular)?;
    solve_semilinear_with(&op, c, g, opts)
}

pub(crate) fn solve_semilinear_with(
    op: &TransportOperator,
    c: &CoefficientSet,
    g: &BoundarySource,
    opts: &PicardOptions,
) -> Result<TransportSolution> {
    let base = op.solve(Some(g), None, None, &opts.inner)?;
    if c.sigma_b.is_identically_zero() {
        return Ok(base);
    }
    let epsilon = g.sup_norm();
    let k = c.c2() * c.upper;
    let cert = contraction_certificate(k, epsilon);
    if cert.is_none() && opts.require_certificate {
        return Err(Error::Precondition(format!(
            "contraction: 4 C2 C0 ||g|| = {:.4} >= 1, boundary data too large for the Picard solver",
            4.0 * k * epsilon
        )));
    }
    let quad = &op.angular().quadrature;
    let u0 = &base.u;
    let sigma_b = c.sigma_b.values();
    let n = op.grid().ncells();
    let mut w = PhaseField::zeros(op.grid(), op.ndirs());
    let mut w_faces = None;
    let mut history: Vec<f64> = Vec::new();
    let mut ratios = Vec::new();
    let mut source_iterations = base.report.source_iterations;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let phi = u0.zip_map(&w, |a, b| a + b);
        let avg = velocity_average(&phi, quad)?;
        let mut src = phi;
        for chunk in src.values_mut().chunks_mut(n) {
            for ((v, a), s) in chunk.iter_mut().zip(avg.values()).zip(sigma_b) {
                *v *= -s * a;
            }
        }
        let next = op.solve(None, Some(&src), Some(&w), &opts.inner)?;
        source_iterations += next.report.source_iterations;
        let res = next
            .u
            .values()
            .iter()
            .zip(w.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if let Some(prev) = history.last() {
            if *prev > 0.0 {
                ratios.push(res / prev);
            }
        }
        history.push(res);
        w = next.u;
        w_faces = Some(next.faces);
        if !res.is_finite() || (history.len() > 3 && res > 1e3 * history[0]) {
            return Err(Error::Divergence(format!(
                "Picard residual grew to {res:e}; boundary data too large"
            )));
        }
        let scale = u0.zip_map(&w, |a, b| a + b).max_abs();
        if res <= opts.tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            solver: "semilinear Picard",
            iterations: history.len(),
            residual: *history.last().unwrap_or(&f64::NAN),
        });
    }
    let u = u0.zip_map(&w, |a, b| a + b);
    let faces = match w_faces {
        Some(wf) => base.faces.zip_map(&wf, |a, b| a + b),
        None => base.faces.clone(),
    };
    let mut report = base.report.clone();
    report.source_iterations = source_iterations;
    report.picard_iterations = history.len();
    report.residual = *history.last().unwrap_or(&0.0);
    report.residual_history = history;
    report.picard_ratios = ratios;
    report.bound_constant = if epsilon > 0.0 { u.max_abs() / epsilon } else { 0.0 };
    report.contraction = cert;
    Ok(TransportSolution { u, faces, report })
}
