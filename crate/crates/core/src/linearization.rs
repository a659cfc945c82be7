//! First and second derivatives of the forward solutions with respect to the
//! boundary amplitude, and a numerical check of differentiability.
//!
//! With inflow `εg`, `u_ε = ε u⁽¹⁾ + ε²/2 u⁽²⁾ + O(ε³)` where `u⁽¹⁾` solves
//! the linear problem with data `g`, and `u⁽²⁾` the linear problem with zero
//! data and source `−2σ_b⟨u⁽¹⁾⟩u⁽¹⁾` (transport) or `−2σ_b (u⁽¹⁾)²`
//! (diffusion).

use crate::boundary::{BoundarySource, BoundaryTrace};
use crate::coefficients::CoefficientSet;
use crate::diffusion::{
    solve_semilinear_diffusion, solve_with_operator, DiffusionOptions, DiffusionPicardOptions,
    EllipticOperator,
};
use crate::error::{Error, Result};
use crate::field::{velocity_average, PhaseField, ScalarField};
use crate::quadrature::{Angular, AngularQuadrature};
use crate::transport::{solve_semilinear_with, PicardOptions, TransportOperator, TransportOptions};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Transport,
    Diffusion,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Transport => "transport",
            Regime::Diffusion => "diffusion",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transport" => Ok(Regime::Transport),
            "diffusion" => Ok(Regime::Diffusion),
            _ => Err(Error::Format(format!("unknown regime {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportBundle {
    pub u1: PhaseField,
    pub u2: PhaseField,
    pub g: BoundarySource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionBundle {
    pub u1: ScalarField,
    pub u2: ScalarField,
    pub g: BoundaryTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinearizationBundle {
    Transport(TransportBundle),
    Diffusion(DiffusionBundle),
}

impl LinearizationBundle {
    pub fn regime(&self) -> Regime {
        match self {
            LinearizationBundle::Transport(_) => Regime::Transport,
            LinearizationBundle::Diffusion(_) => Regime::Diffusion,
        }
    }
}

/// `v·∇u⁽¹⁾ + σ_a u⁽¹⁾ = σ_s K(u⁽¹⁾)`, `u⁽¹⁾ = g` on Γ₋.
pub fn solve_u1_transport(
    c: &CoefficientSet,
    angular: &Angular,
    g: &BoundarySource,
    opts: &TransportOptions,
) -> Result<PhaseField> {
    let op = TransportOperator::new(c, angular)?;
    Ok(op.solve(Some(g), None, None, opts)?.u)
}

/// The second-order source `−2σ_b⟨u⁽¹⁾⟩u⁽¹⁾`.
pub fn u2_source_transport(
    sigma_b: &ScalarField,
    u1: &PhaseField,
    quad: &AngularQuadrature,
) -> Result<PhaseField> {
    let avg = velocity_average(u1, quad)?;
    sigma_b.same_shape(&avg)?;
    let weight = avg.zip_map(sigma_b, |a, s| -2.0 * s * a);
    Ok(u1.mul_scalar(&weight))
}

/// `u⁽²⁾` for an already assembled operator. Zero source short-circuits to
/// the exact zero field.
pub fn solve_u2_with(
    op: &TransportOperator,
    sigma_b: &ScalarField,
    u1: &PhaseField,
    opts: &TransportOptions,
) -> Result<PhaseField> {
    u1.check_shape(op.grid(), op.ndirs())?;
    if sigma_b.is_identically_zero() {
        return Ok(PhaseField::zeros(op.grid(), op.ndirs()));
    }
    let src = u2_source_transport(sigma_b, u1, &op.angular().quadrature)?;
    Ok(op.solve(None, Some(&src), None, opts)?.u)
}

/// `v·∇u⁽²⁾ + σ_a u⁽²⁾ − σ_s K(u⁽²⁾) = −2σ_b⟨u⁽¹⁾⟩u⁽¹⁾`, `u⁽²⁾ = 0` on Γ₋.
pub fn solve_u2_transport(
    c: &CoefficientSet,
    angular: &Angular,
    u1: &PhaseField,
    opts: &TransportOptions,
) -> Result<PhaseField> {
    let op = TransportOperator::new(c, angular)?;
    solve_u2_with(&op, &c.sigma_b, u1, opts)
}

pub fn linearize_transport(
    c: &CoefficientSet,
    angular: &Angular,
    g: &BoundarySource,
    opts: &TransportOptions,
) -> Result<TransportBundle> {
    let op = TransportOperator::new(c, angular)?;
    let u1 = op.solve(Some(g), None, None, opts)?.u;
    let u2 = solve_u2_with(&op, &c.sigma_b, &u1, opts)?;
    Ok(TransportBundle { u1, u2, g: g.clone() })
}

/// `−∇·γ∇u⁽¹⁾ + σ_a u⁽¹⁾ = 0`, `u⁽¹⁾ = g` on ∂Ω.
pub fn solve_u1_diffusion(
    c: &CoefficientSet,
    g: &BoundaryTrace,
    opts: &DiffusionOptions,
) -> Result<ScalarField> {
    c.check_solvable()?;
    let op = EllipticOperator::new(&c.grid, &c.gamma, &c.sigma_a)?;
    Ok(solve_with_operator(&c.grid, &op, Some(g), None, None, opts)?.u)
}

pub fn u2_source_diffusion(sigma_b: &ScalarField, u1: &ScalarField) -> Result<ScalarField> {
    sigma_b.same_shape(u1)?;
    Ok(u1.zip_map(sigma_b, |u, s| -2.0 * s * u * u))
}

pub fn solve_u2_diffusion_with(
    c: &CoefficientSet,
    op: &EllipticOperator,
    u1: &ScalarField,
    opts: &DiffusionOptions,
) -> Result<ScalarField> {
    u1.check_grid(&c.grid)?;
    if c.sigma_b.is_identically_zero() {
        return Ok(ScalarField::zeros(&c.grid));
    }
    let src = u2_source_diffusion(&c.sigma_b, u1)?;
    Ok(solve_with_operator(&c.grid, op, None, Some(&src), None, opts)?.u)
}

/// `−∇·γ∇u⁽²⁾ + σ_a u⁽²⁾ = −2σ_b (u⁽¹⁾)²`, `u⁽²⁾ = 0` on ∂Ω.
pub fn solve_u2_diffusion(
    c: &CoefficientSet,
    u1: &ScalarField,
    opts: &DiffusionOptions,
) -> Result<ScalarField> {
    c.check_solvable()?;
    let op = EllipticOperator::new(&c.grid, &c.gamma, &c.sigma_a)?;
    solve_u2_diffusion_with(c, &op, u1, opts)
}

pub fn linearize_diffusion(
    c: &CoefficientSet,
    g: &BoundaryTrace,
    opts: &DiffusionOptions,
) -> Result<DiffusionBundle> {
    c.check_solvable()?;
    let op = EllipticOperator::new(&c.grid, &c.gamma, &c.sigma_a)?;
    let u1 = solve_with_operator(&c.grid, &op, Some(g), None, None, opts)?.u;
    let u2 = solve_u2_diffusion_with(c, &op, &u1, opts)?;
    Ok(DiffusionBundle { u1, u2, g: g.clone() })
}

/// Remainders `r₁(ε) = ‖u_ε/ε − u⁽¹⁾‖_∞`, `r₂(ε) = ‖2(u_ε − εu⁽¹⁾)/ε² − u⁽²⁾‖_∞`,
/// their ratios under successive ε, and the finite-ε derivative cross-check.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub eps: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub r1_ratios: Vec<f64>,
    pub r2_ratios: Vec<f64>,
    /// `‖D_Δ u_ε − u⁽¹⁾_ε‖_∞ / ‖u⁽¹⁾_ε‖_∞` with central differences.
    pub u1_eps_errors: Vec<f64>,
    /// `‖D²_Δ u_ε − u⁽²⁾_ε‖_∞ / ‖u⁽²⁾_ε‖_∞`.
    pub u2_eps_errors: Vec<f64>,
    /// True when σ_b ≡ 0, so `u_ε = εu⁽¹⁾` and ratios carry no information.
    pub linear: bool,
    pub passed: bool,
}

/// Accepted band for the halving ratio of a first-order remainder.
pub const RICHARDSON_BAND: (f64, f64) = (1.5, 2.5);
/// Remainder bound in the linear case.
pub const LINEAR_REMAINDER_TOL: f64 = 1e-9;
/// Relative bound on the central-difference cross-check.
pub const CROSS_CHECK_TOL: f64 = 1e-3;

impl DerivativeReport {
    fn assemble(
        eps: Vec<f64>,
        r1: Vec<f64>,
        r2: Vec<f64>,
        u1_eps_errors: Vec<f64>,
        u2_eps_errors: Vec<f64>,
        linear: bool,
    ) -> Self {
        let ratios = |r: &[f64]| -> Vec<f64> { r.windows(2).map(|w| w[0] / w[1]).collect() };
        let r1_ratios = ratios(&r1);
        let r2_ratios = ratios(&r2);
        let band = |r: &f64| (RICHARDSON_BAND.0..=RICHARDSON_BAND.1).contains(r);
        let cross = u1_eps_errors.iter().chain(&u2_eps_errors).all(|e| *e <= CROSS_CHECK_TOL);
        let passed = if linear {
            r1.iter().all(|r| *r <= LINEAR_REMAINDER_TOL)
        } else {
            r1_ratios.iter().all(band) && r2_ratios.iter().all(band) && cross
        };
        Self {
            eps,
            r1,
            r2,
            r1_ratios,
            r2_ratios,
            u1_eps_errors,
            u2_eps_errors,
            linear,
            passed,
        }
    }
}

impl fmt::Display for DerivativeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "linear = {}", self.linear)?;
        for (i, e) in self.eps.iter().enumerate() {
            writeln!(f, "eps[{i}] = {e:e}")?;
            writeln!(f, "r1[{i}] = {:e}", self.r1[i])?;
            writeln!(f, "r2[{i}] = {:e}", self.r2[i])?;
            if let Some(x) = self.u1_eps_errors.get(i) {
                writeln!(f, "u1_eps_error[{i}] = {x:e}")?;
            }
            if let Some(x) = self.u2_eps_errors.get(i) {
                writeln!(f, "u2_eps_error[{i}] = {x:e}")?;
            }
        }
        for (i, r) in self.r1_ratios.iter().enumerate() {
            writeln!(f, "r1_ratio[{i}] = {r:.6}")?;
        }
        for (i, r) in self.r2_ratios.iter().enumerate() {
            writeln!(f, "r2_ratio[{i}] = {r:.6}")?;
        }
        writeln!(f, "passed = {}", self.passed)
    }
}

pub const DEFAULT_EPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn remainders(u_eps: &[f64], u1: &[f64], u2: &[f64], eps: f64) -> (f64, f64) {
    let mut r1: f64 = 0.0;
    let mut r2: f64 = 0.0;
    for ((u, a), b) in u_eps.iter().zip(u1).zip(u2) {
        r1 = r1.max((u / eps - a).abs());
        r2 = r2.max((2.0 * (u - eps * a) / (eps * eps) - b).abs());
    }
    (r1, r2)
}

fn relative(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

fn check_eps(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Precondition(format!(
            "eps list must be nonempty and positive, got {eps_list:?}"
        )));
    }
    Ok(())
}

/// Solves `L v + σ_b⟨u_ε⟩v + σ_b⟨v⟩u_ε = f`, `v = h` on Γ₋, by freezing the
/// coupling terms on the right and iterating.
#[allow(clippy::too_many_arguments)]
pub fn solve_frozen_transport(
    op: &TransportOperator,
    sigma_b: &ScalarField,
    u_eps: &PhaseField,
    inflow: Option<&BoundarySource>,
    f: Option<&PhaseField>,
    tol: f64,
    max_iter: usize,
    inner: &TransportOptions,
) -> Result<PhaseField> {
    let quad = &op.angular().quadrature;
    let avg_u = velocity_average(u_eps, quad)?;
    let sb_avg_u = avg_u.zip_map(sigma_b, |a, s| s * a);
    let mut v = PhaseField::zeros(op.grid(), op.ndirs());
    for _ in 0..max_iter {
        let avg_v = velocity_average(&v, quad)?;
        let sb_avg_v = avg_v.zip_map(sigma_b, |a, s| s * a);
        let mut src = v.mul_scalar(&sb_avg_u).zip_map(&u_eps.mul_scalar(&sb_avg_v), |a, b| -a - b);
        if let Some(f) = f {
            src = src.zip_map(f, |a, b| a + b);
        }
        let next = op.solve(inflow, Some(&src), Some(&v), inner)?.u;
        let diff = sup_diff(next.values(), v.values());
        v = next;
        if !diff.is_finite() {
            return Err(Error::Divergence("frozen linearization iteration blew up".into()));
        }
        if diff <= tol * v.max_abs() {
            return Ok(v);
        }
    }
    Err(Error::NotConverged {
        solver: "frozen linearization",
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Differentiability check for the semilinear transport problem.
pub fn verify_derivatives_transport(
    c: &CoefficientSet,
    angular: &Angular,
    g: &BoundarySource,
    eps_list: &[f64],
    opts: &PicardOptions,
) -> Result<DerivativeReport> {
    check_eps(eps_list)?;
    let op = TransportOperator::new(c, angular)?;
    let u1 = op.solve(Some(g), None, None, &opts.inner)?.u;
    let u2 = solve_u2_with(&op, &c.sigma_b, &u1, &opts.inner)?;
    let linear = c.sigma_b.is_identically_zero();
    let solve_at = |e: f64| solve_semilinear_with(&op, c, &g.scale(e), opts).map(|s| s.u);
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    let mut e1 = Vec::new();
    let mut e2 = Vec::new();
    for &eps in eps_list {
        let u_eps = solve_at(eps)?;
        let (a, b) = remainders(u_eps.values(), u1.values(), u2.values(), eps);
        r1.push(a);
        r2.push(b);
        if linear {
            continue;
        }
        let d = eps / 4.0;
        let up = solve_at(eps + d)?;
        let dn = solve_at(eps - d)?;
        let v1 = solve_frozen_transport(&op, &c.sigma_b, &u_eps, Some(g), None, 1e-13, 500, &opts.inner)?;
        let f2 = u2_source_transport(&c.sigma_b, &v1, &angular.quadrature)?;
        let v2 = solve_frozen_transport(&op, &c.sigma_b, &u_eps, None, Some(&f2), 1e-13, 500, &opts.inner)?;
        let mut err1: f64 = 0.0;
        let mut err2: f64 = 0.0;
        for i in 0..u_eps.values().len() {
            let (p, m, z) = (up.values()[i], dn.values()[i], u_eps.values()[i]);
            err1 = err1.max(((p - m) / (2.0 * d) - v1.values()[i]).abs());
            err2 = err2.max(((p - 2.0 * z + m) / (d * d) - v2.values()[i]).abs());
        }
        e1.push(relative(err1, v1.max_abs()));
        e2.push(relative(err2, v2.max_abs()));
    }
    Ok(DerivativeReport::assemble(eps_list.to_vec(), r1, r2, e1, e2, linear))
}

/// Differentiability check for the semilinear diffusion problem. The
/// finite-ε derivative equations fold `2σ_b u_ε` into the reaction.
pub fn verify_derivatives_diffusion(
    c: &CoefficientSet,
    g: &BoundaryTrace,
    eps_list: &[f64],
    opts: &DiffusionPicardOptions,
) -> Result<DerivativeReport> {
    check_eps(eps_list)?;
    let bundle = linearize_diffusion(c, g, &opts.inner)?;
    let (u1, u2) = (&bundle.u1, &bundle.u2);
    let linear = c.sigma_b.is_identically_zero();
    let solve_at = |e: f64| solve_semilinear_diffusion(c, &g.scale(e), opts).map(|s| s.u);
    let mut r1 = Vec::new();
    let mut r2 = Vec::new();
    let mut e1 = Vec::new();
    let mut e2 = Vec::new();
    for &eps in eps_list {
        let u_eps = solve_at(eps)?;
        let (a, b) = remainders(u_eps.values(), u1.values(), u2.values(), eps);
        r1.push(a);
        r2.push(b);
        if linear {
            continue;
        }
        let d = eps / 4.0;
        let up = solve_at(eps + d)?;
        let dn = solve_at(eps - d)?;
        let reaction = c.sigma_a.zip_map(&c.sigma_b.zip_map(&u_eps, |s, u| 2.0 * s * u), |a, b| a + b);
        let op = EllipticOperator::new(&c.grid, &c.gamma, &reaction)?;
        let v1 = solve_with_operator(&c.grid, &op, Some(g), None, None, &opts.inner)?.u;
        let f2 = u2_source_diffusion(&c.sigma_b, &v1)?;
        let v2 = solve_with_operator(&c.grid, &op, None, Some(&f2), None, &opts.inner)?.u;
        let mut err1: f64 = 0.0;
        let mut err2: f64 = 0.0;
        for i in 0..u_eps.len() {
            let (p, m, z) = (up.values()[i], dn.values()[i], u_eps.values()[i]);
            err1 = err1.max(((p - m) / (2.0 * d) - v1.values()[i]).abs());
            err2 = err2.max(((p - 2.0 * z + m) / (d * d) - v2.values()[i]).abs());
        }
        e1.push(relative(err1, v1.max_abs()));
        e2.push(relative(err2, v2.max_abs()));
    }
    Ok(DerivativeReport::assemble(eps_list.to_vec(), r1, r2, e1, e2, linear))
}
