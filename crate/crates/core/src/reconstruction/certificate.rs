//! A₁/A₂ admissibility for the transport σ_b inversion and the explicit
//! stability constants of the diffusion ψ-inversion.

use crate::boundary::BoundarySource;
use crate::coefficients::CoefficientSet;
use crate::diffusion::{solve_with_operator, DiffusionOptions, EllipticOperator};
use crate::error::{Error, Result};
use crate::field::{velocity_average, PhaseField, ScalarField};
use crate::quadrature::Angular;
use crate::transport::{TransportOperator, TransportOptions};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityCertificate {
    /// `inf (σ_a + v·∇ln(h1/(Ξσ_a)))` over cells and directions.
    pub alpha: f64,
    /// `‖Ξσ_a g / h1‖_{L∞_{dξ}(Γ₋)}`.
    pub boundary_ratio: f64,
    pub c2: f64,
    pub c0: f64,
    pub c0_upper: f64,
    /// `Π = C₂ C₀ · boundary_ratio`.
    pub pi: f64,
    pub in_a1: bool,
    pub in_a2: bool,
    /// `boundary_ratio / (2 c0 (1 − Π))`, only when Π < 1.
    pub stability_constant: Option<f64>,
    /// `max u⁽¹⁾/⟨u⁽¹⁾⟩` over the phase space.
    pub lemma_lhs: f64,
    /// Whether `lemma_lhs ≤ boundary_ratio`; checked only inside A₁.
    pub lemma_holds: Option<bool>,
}

impl fmt::Display for AdmissibilityCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "alpha = {:e}", self.alpha)?;
        writeln!(f, "boundary_ratio = {:e}", self.boundary_ratio)?;
        writeln!(f, "c2 = {:e}", self.c2)?;
        writeln!(f, "c0 = {:e}", self.c0)?;
        writeln!(f, "C0 = {:e}", self.c0_upper)?;
        writeln!(f, "Pi = {:e}", self.pi)?;
        writeln!(f, "in_A1 = {}", self.in_a1)?;
        writeln!(f, "in_A2 = {}", self.in_a2)?;
        match self.stability_constant {
            Some(c) => writeln!(f, "stability_constant = {c:e}")?,
            None => writeln!(f, "stability_constant = unavailable")?,
        }
        writeln!(f, "lemma_lhs = {:e}", self.lemma_lhs)?;
        if let Some(h) = self.lemma_holds {
            writeln!(f, "lemma_holds = {h}")?;
        }
        Ok(())
    }
}

/// Upwind derivative of cell values along `v`: the difference is taken
/// towards the side the direction comes from, falling back to the other
/// side at the boundary.
fn upwind_directional(f: &[f64], nx: usize, ny: usize, hx: f64, hy: f64, v: [f64; 2]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            let dx = if v[0] > 0.0 {
                if i > 0 { (f[c] - f[c - 1]) / hx } else { (f[c + 1] - f[c]) / hx }
            } else if v[0] < 0.0 {
                if i + 1 < nx { (f[c + 1] - f[c]) / hx } else { (f[c] - f[c - 1]) / hx }
            } else {
                0.0
            };
            let dy = if v[1] > 0.0 {
                if j > 0 { (f[c] - f[c - nx]) / hy } else { (f[c + nx] - f[c]) / hy }
            } else if v[1] < 0.0 {
                if j + 1 < ny { (f[c + nx] - f[c]) / hy } else { (f[c] - f[c - nx]) / hy }
            } else {
                0.0
            };
            out[c] = v[0] * dx + v[1] * dy;
        }
    }
    out
}

/// Certificate from a precomputed `u⁽¹⁾`.
pub fn certificate_from_u1(
    c: &CoefficientSet,
    angular: &Angular,
    g: &BoundarySource,
    h1: &ScalarField,
    u1: &PhaseField,
    alpha_min: Option<f64>,
) -> Result<AdmissibilityCertificate> {
    let grid = &c.grid;
    let nv = angular.ndirs();
    h1.check_grid(grid)?;
    g.check_shape(grid, nv)?;
    u1.check_shape(grid, nv)?;
    if !(h1.min() > 0.0) {
        return Err(Error::Precondition(format!(
            "first-order data must be positive, min h1 = {:e}",
            h1.min()
        )));
    }
    let (xi, sa) = (c.xi.values(), c.sigma_a.values());
    let log_ratio: Vec<f64> = (0..grid.ncells()).map(|i| (h1.values()[i] / (xi[i] * sa[i])).ln()).collect();
    let mut alpha = f64::INFINITY;
    for k in 0..nv {
        let d = upwind_directional(
            &log_ratio,
            grid.nx(),
            grid.ny(),
            grid.hx(),
            grid.hy(),
            angular.quadrature.direction(k),
        );
        for (s, dv) in sa.iter().zip(&d) {
            alpha = alpha.min(s + dv);
        }
    }
    let mut boundary_ratio: f64 = 0.0;
    for (f, k) in g.inflow_pairs() {
        let cell = grid.boundary_face(f).cell;
        let r = (xi[cell] * sa[cell] * g.get(f, k) / h1.values()[cell]).abs();
        boundary_ratio = boundary_ratio.max(r);
    }
    let c2 = c.c2();
    let (c0, c0_upper) = (c.lower, c.upper);
    let pi = c2 * c0_upper * boundary_ratio;
    let in_a1 = match alpha_min {
        Some(a) => a > 0.0 && alpha >= a,
        None => alpha > 0.0,
    };
    let in_a2 = (0.0..1.0).contains(&pi);
    let stability_constant = in_a2.then(|| boundary_ratio / (2.0 * c0 * (1.0 - pi)));
    let avg = velocity_average(u1, &angular.quadrature)?;
    let n = grid.ncells();
    let mut lemma_lhs: f64 = 0.0;
    for k in 0..nv {
        for (cell, u) in u1.block(k).iter().enumerate().take(n) {
            let a = avg.values()[cell];
            if a > 0.0 {
                lemma_lhs = lemma_lhs.max(u / a);
            }
        }
    }
    Ok(AdmissibilityCertificate {
        alpha,
        boundary_ratio,
        c2,
        c0,
        c0_upper,
        pi,
        in_a1,
        in_a2,
        stability_constant,
        lemma_lhs,
        lemma_holds: in_a1.then_some(lemma_lhs <= boundary_ratio * (1.0 + 1e-12)),
    })
}

/// Evaluates α, Π, the stability constant and the maximum bound on
/// `u⁽¹⁾/⟨u⁽¹⁾⟩` for the data `h1` generated by `g`.
pub fn certify_admissibility_transport(
    c: &CoefficientSet,
    angular: &Angular,
    g: &BoundarySource,
    h1: &ScalarField,
    alpha_min: Option<f64>,
    opts: &TransportOptions,
) -> Result<AdmissibilityCertificate> {
    let op = TransportOperator::new(c, angular)?;
    let u1 = op.solve(Some(g), None, None, opts)?.u;
    certificate_from_u1(c, angular, g, h1, &u1, alpha_min)
}

/// Explicit constants for the diffusion σ_b inversion on the discrete
/// level. With `A⁰z = 1` (zero boundary data), the ψ-map
/// `ΔU ↦ ΔU + (A⁰)⁻¹(σ_a ΔU)` has `Lᵖ → Lᵖ` norm at most `1 + max σ_a ‖z‖_∞`,
/// since `(A⁰)⁻¹` is entrywise nonnegative and symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionStability {
    pub z_sup: f64,
    pub min_u1: f64,
    /// Bound for `‖(σ_b − σ̃_b)(u⁽¹⁾)²‖_p / ‖H⁽²⁾ − H̃⁽²⁾‖_{W²ᵖ}`.
    pub weighted: f64,
    /// Bound for `‖σ_b − σ̃_b‖_p / ‖H⁽²⁾ − H̃⁽²⁾‖_{W²ᵖ}`.
    pub plain: f64,
}

pub fn diffusion_stability_constants(
    c: &CoefficientSet,
    u1: &ScalarField,
    opts: &DiffusionOptions,
) -> Result<DiffusionStability> {
    let grid = &c.grid;
    u1.check_grid(grid)?;
    let pure = EllipticOperator::pure(grid, &c.gamma)?;
    let ones = ScalarField::constant(grid, 1.0);
    let z = solve_with_operator(grid, &pure, None, Some(&ones), None, opts)?.u;
    let z_sup = z.max_abs();
    let sa_max = c.sigma_a.max();
    let xs_min = c.xi.zip_map(&c.sigma_a, |x, s| x * s).min();
    let min_u1 = u1.min();
    if !(min_u1 > 0.0) {
        return Err(Error::Precondition(format!(
            "diffusion stability needs u1 > 0, min is {min_u1:e}"
        )));
    }
    let weighted = 0.5 * sa_max * (1.0 + sa_max * z_sup) / xs_min;
    Ok(DiffusionStability {
        z_sup,
        min_u1,
        weighted,
        plain: weighted / (min_u1 * min_u1),
    })
}
