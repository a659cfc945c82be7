//! Sensitivity of the (σ_a, σ_b) reconstructions to a misspecified
//! scattering coefficient (transport) or diffusion coefficient (diffusion).
//!
//! Data are generated once from the true coefficients. Each sweep entry
//! reconstructs from those data with the perturbed coefficient and is compared
//! with the reconstruction that uses the unperturbed one.

use crate::boundary::{BoundarySource, BoundaryTrace};
use crate::coefficients::CoefficientSet;
use crate::data::{linearized_data_diffusion, linearized_data_transport};
use crate::diffusion::{solve_with_operator, EllipticOperator};
use crate::error::{Error, Result};
use crate::field::{apply_scattering, velocity_average, PhaseField, ScalarField};
use crate::linearization::{linearize_diffusion, linearize_transport, u2_source_diffusion, u2_source_transport, Regime};
use crate::norms::{phase_norm, scalar_norm, Norm};
use crate::quadrature::Angular;
use crate::reconstruction::{
    certificate_from_u1, reconstruct_sigma_a_diffusion, reconstruct_sigma_a_transport,
    reconstruct_sigma_b_diffusion, reconstruct_sigma_b_transport_with, ReconstructionOptions,
};
use crate::transport::{TransportOperator, TransportSolution};
use rayon::prelude::*;
use std::fmt::{self, Write as _};

/// Shape of the misspecification: `σ̃ = σ·(1 + η·b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// `b ≡ 1`.
    Uniform,
    /// `b(x) = exp(−|x − center|²/width²)`.
    Bump { center: [f64; 2], width: f64 },
}

impl Perturbation {
    pub fn factor(&self, grid: &crate::grid::SpatialGrid, eta: f64) -> ScalarField {
        match *self {
            Perturbation::Uniform => ScalarField::constant(grid, 1.0 + eta),
            Perturbation::Bump { center, width } => ScalarField::from_fn(grid, |x, y| {
                let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                1.0 + eta * (-r2 / (width * width)).exp()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UqOptions {
    pub reconstruction: ReconstructionOptions,
    pub perturbation: Perturbation,
    /// Exponent of the Lᵖ/W¹ᵖ/W²ᵖ norms in the diffusion sweep.
    pub p: f64,
}

impl Default for UqOptions {
    fn default() -> Self {
        Self {
            reconstruction: ReconstructionOptions {
                enforce_admissibility: false,
                ..Default::default()
            },
            perturbation: Perturbation::Uniform,
            p: 4.0,
        }
    }
}

/// Diagnostics of one sweep entry.
#[derive(Debug, Clone, PartialEq)]
pub struct UqMeasurement {
    pub err_sigma_a: f64,
    pub err_sigma_b: f64,
    /// `(err_sigma_a + err_sigma_b) / misspecification`, absent when the
    /// misspecification vanishes.
    pub ratio: Option<f64>,
    /// Left and right side of the intermediate estimate on `u⁽¹⁾ − ũ⁽¹⁾`:
    /// the L²(X) bound through C₂ (transport) or `‖u⁽¹⁾ − ũ⁽¹⁾‖_{W²ᵖ}` against
    /// the misspecification (diffusion).
    pub intermediate_lhs: f64,
    pub intermediate_rhs: f64,
    /// Relative defects of the difference equations for `u⁽¹⁾ − ũ⁽¹⁾` and
    /// `u⁽²⁾ − ũ⁽²⁾` after substituting the computed fields.
    pub defect_first: f64,
    pub defect_second: f64,
    /// Relative mismatch of the first-order data reproduced by the two
    /// reconstructions.
    pub data_defect: f64,
    /// Π of the perturbed pair; transport only.
    pub pi: Option<f64>,
    pub in_a1: Option<bool>,
    pub in_a2: Option<bool>,
    pub sigma_a: ScalarField,
    pub sigma_b: ScalarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UqRow {
    pub eta: f64,
    pub misspecification: f64,
    /// A failed reconstruction is kept as its message.
    pub outcome: std::result::Result<UqMeasurement, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UqSweepResult {
    pub regime: Regime,
    pub error_norm: Norm,
    pub misspecification_norm: Norm,
    pub rows: Vec<UqRow>,
    pub reference_sigma_a: ScalarField,
    pub reference_sigma_b: ScalarField,
    /// Largest observed ratio.
    pub c_max: Option<f64>,
    /// Least-squares slope of error against misspecification through zero.
    pub c_lsq: Option<f64>,
    /// Largest over smallest observed ratio.
    pub spread: Option<f64>,
}

impl UqSweepResult {
    fn from_rows(
        regime: Regime,
        error_norm: Norm,
        misspecification_norm: Norm,
        rows: Vec<UqRow>,
        reference: (ScalarField, ScalarField),
    ) -> Self {
        let ratios: Vec<f64> = rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().and_then(|m| m.ratio))
            .collect();
        let c_max = ratios.iter().copied().reduce(f64::max);
        let c_min = ratios.iter().copied().reduce(f64::min);
        let (mut num, mut den) = (0.0, 0.0);
        for r in &rows {
            if let Ok(m) = &r.outcome {
                if r.misspecification > 0.0 {
                    num += (m.err_sigma_a + m.err_sigma_b) * r.misspecification;
                    den += r.misspecification * r.misspecification;
                }
            }
        }
        Self {
            regime,
            error_norm,
            misspecification_norm,
            rows,
            reference_sigma_a: reference.0,
            reference_sigma_b: reference.1,
            c_max,
            c_lsq: (den > 0.0).then(|| num / den),
            spread: c_max.zip(c_min).filter(|(_, lo)| *lo > 0.0).map(|(hi, lo)| hi / lo),
        }
    }

    /// Whether `err_a + err_b ≤ c·misspecification` for every converged entry.
    pub fn inequality_holds(&self, c: f64) -> bool {
        self.rows.iter().all(|r| match &r.outcome {
            Ok(m) => m.err_sigma_a + m.err_sigma_b <= c * r.misspecification * (1.0 + 1e-12),
            Err(_) => true,
        })
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.outcome.is_ok())
    }

    /// Entries with η = 0 reproduce the reference reconstruction bit for bit.
    pub fn zero_eta_is_exact(&self) -> bool {
        self.rows.iter().filter(|r| r.eta == 0.0).all(|r| match &r.outcome {
            Ok(m) => m.sigma_a == self.reference_sigma_a && m.sigma_b == self.reference_sigma_b,
            Err(_) => false,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "eta,misspecification,err_sigma_a,err_sigma_b,ratio,intermediate_lhs,intermediate_rhs,\
             defect_first,defect_second,data_defect,pi,in_A2,status\n",
        );
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        for r in &self.rows {
            match &r.outcome {
                Ok(m) => {
                    let _ = writeln!(
                        s,
                        "{:e},{:e},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{},{},ok",
                        r.eta,
                        r.misspecification,
                        m.err_sigma_a,
                        m.err_sigma_b,
                        opt(m.ratio),
                        m.intermediate_lhs,
                        m.intermediate_rhs,
                        m.defect_first,
                        m.defect_second,
                        m.data_defect,
                        opt(m.pi),
                        m.in_a2.map_or(String::new(), |b| b.to_string()),
                    );
                }
                Err(e) => {
                    let _ = writeln!(
                        s,
                        "{:e},{:e},,,,,,,,,,,\"error: {}\"",
                        r.eta,
                        r.misspecification,
                        e.replace('"', "'")
                    );
                }
            }
        }
        s
    }
}

impl fmt::Display for UqSweepResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "regime = {}", self.regime)?;
        writeln!(f, "error_norm = {}", self.error_norm)?;
        writeln!(f, "misspecification_norm = {}", self.misspecification_norm)?;
        writeln!(f, "entries = {}", self.rows.len())?;
        writeln!(f, "failed = {}", self.rows.iter().filter(|r| r.outcome.is_err()).count())?;
        let opt = |v: Option<f64>| v.map_or("unavailable".to_string(), |x| format!("{x:e}"));
        writeln!(f, "c_max = {}", opt(self.c_max))?;
        writeln!(f, "c_lsq = {}", opt(self.c_lsq))?;
        writeln!(f, "ratio_spread = {}", opt(self.spread))?;
        if let Some(c) = self.c_max {
            writeln!(f, "inequality_holds = {}", self.inequality_holds(c))?;
        }
        writeln!(f, "zero_eta_exact = {}", self.zero_eta_is_exact())
    }
}

fn sorted_etas(etas: &[f64]) -> Result<Vec<f64>> {
    if let Some(e) = etas.iter().find(|e| !e.is_finite() || **e <= -1.0) {
        return Err(Error::Precondition(format!("perturbation eta must be finite and > -1, got {e}")));
    }
    let mut v = etas.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
fn relative(diff: f64, a: f64, b: f64) -> f64 {
    let s = a.max(b);
    if s > 0.0 { diff / s } else { diff }
}

fn diff(a: &ScalarField, b: &ScalarField) -> ScalarField {
    a.zip_map(b, |x, y| x - y)
}

struct TransportState {
    coeffs: CoefficientSet,
    op: TransportOperator,
    first: TransportSolution,
    second: TransportSolution,
}

fn transport_state(
    base: &CoefficientSet,
    sigma_s: ScalarField,
    angular: &Angular,
    g: &BoundarySource,
    h: (&ScalarField, &ScalarField),
    opts: &ReconstructionOptions,
) -> Result<TransportState> {
    let c = base.clone().with_sigma_s(sigma_s);
    let sa = reconstruct_sigma_a_transport(&c, angular, g, h.0, opts)?.field;
    let c = c.with_sigma_a(sa);
    let op = TransportOperator::new(&c, angular)?;
    let first = op.solve(Some(g), None, None, &opts.transport)?;
    let sb = reconstruct_sigma_b_transport_with(&op, &c, g, &first.u, h.1, opts)?.field;
    let c = c.with_sigma_b(sb);
    let src = u2_source_transport(&c.sigma_b, &first.u, &angular.quadrature)?;
    let second = op.solve(None, Some(&src), None, &opts.transport)?;
    Ok(TransportState { coeffs: c, op, first, second })
}

/// Relative defect of `op(w) = rhs` for the difference of two sweeps.
fn transport_defect(
    op: &TransportOperator,
    a: &TransportSolution,
    b: &TransportSolution,
    rhs: &PhaseField,
    angular: &Angular,
) -> Result<f64> {
    let w = a.u.zip_map(&b.u, |x, y| x - y);
    let faces = a.faces.zip_map(&b.faces, |x, y| x - y);
    let lhs = op.apply(&w, &faces)?;
    let grid = op.grid();
    let q = &angular.quadrature;
    let d = phase_norm(&lhs.zip_map(rhs, |x, y| x - y), grid, q, Norm::L2X)?;
    Ok(relative(d, phase_norm(&lhs, grid, q, Norm::L2X)?, phase_norm(rhs, grid, q, Norm::L2X)?))
}

/// Sweep over `σ̃_s = σ_s(1 + η b)` in the transport regime. Errors and the
/// misspecification are measured in L²(Ω). Admissibility of each perturbed
/// pair is recorded but does not gate the reconstruction.
pub fn uq_transport_sweep(
    c_true: &CoefficientSet,
    angular: &Angular,
    g: &BoundarySource,
    etas: &[f64],
    opts: &UqOptions,
) -> Result<UqSweepResult> {
    let etas = sorted_etas(etas)?;
    let grid = &c_true.grid;
    let quad = &angular.quadrature;
    let ropts = &opts.reconstruction;
    let bundle = linearize_transport(c_true, angular, g, &ropts.transport)?;
    let data = linearized_data_transport(c_true, quad, &bundle)?;
    let h = (&data.h1, &data.h2);
    let reference = transport_state(c_true, c_true.sigma_s.clone(), angular, g, h, ropts)?;
    let r = &reference.coeffs;
    let k_u1 = apply_scattering(&reference.first.u, angular)?;
    let avg1 = velocity_average(&reference.first.u, quad)?;
    let ref_data = r.sigma_a.zip_map(&avg1, |s, a| s * a);

    let rows = etas
        .par_iter()
        .map(|&eta| {
            let sigma_s = c_true.sigma_s.zip_map(&opts.perturbation.factor(grid, eta), |s, f| s * f);
            let ds = diff(&c_true.sigma_s, &sigma_s);
            let misspecification = scalar_norm(&ds, grid, Norm::L2Omega)?;
            let measure = || -> Result<UqMeasurement> {
                let t = transport_state(c_true, sigma_s.clone(), angular, g, h, ropts)?;
                let p = &t.coeffs;
                let da = diff(&r.sigma_a, &p.sigma_a);
                let err_sigma_a = scalar_norm(&da, grid, Norm::L2Omega)?;
                let err_sigma_b = scalar_norm(&diff(&r.sigma_b, &p.sigma_b), grid, Norm::L2Omega)?;

                // w̃ = u⁽¹⁾ − ũ⁽¹⁾ solves the perturbed problem with source
                // −(σ_a − σ̃_a)u⁽¹⁾ + (σ_s − σ̃_s)K(u⁽¹⁾).
                let a_term = reference.first.u.mul_scalar(&da);
                let s_term = k_u1.mul_scalar(&ds);
                let rhs1 = s_term.zip_map(&a_term, |s, a| s - a);
                let defect_first = transport_defect(&t.op, &reference.first, &t.first, &rhs1, angular)?;
                let w1 = reference.first.u.zip_map(&t.first.u, |x, y| x - y);
                let intermediate_lhs = phase_norm(&w1, grid, quad, Norm::L2X)?;
                let intermediate_rhs = p.c2()
                    * (phase_norm(&a_term, grid, quad, Norm::L2X)? + phase_norm(&s_term, grid, quad, Norm::L2X)?);

                // ŵ = u⁽²⁾ − ũ⁽²⁾ solves the reference problem with source
                // −(σ_a − σ̃_a)ũ⁽²⁾ + (σ_s − σ̃_s)K(ũ⁽²⁾) + 2σ̃_b⟨ũ⁽¹⁾⟩ũ⁽¹⁾ − 2σ_b⟨u⁽¹⁾⟩u⁽¹⁾.
                let k_u2 = apply_scattering(&t.second.u, angular)?;
                let src_ref = u2_source_transport(&r.sigma_b, &reference.first.u, quad)?;
                let src_pert = u2_source_transport(&p.sigma_b, &t.first.u, quad)?;
                let mut rhs2 = k_u2.mul_scalar(&ds);
                for (i, v) in rhs2.values_mut().iter_mut().enumerate() {
                    let cell = i % grid.ncells();
                    *v += -da.values()[cell] * t.second.u.values()[i] + src_ref.values()[i]
                        - src_pert.values()[i];
                }
                let defect_second = transport_defect(&reference.op, &reference.second, &t.second, &rhs2, angular)?;

                let avg = velocity_average(&t.first.u, quad)?;
                let pert_data = p.sigma_a.zip_map(&avg, |s, a| s * a);
                let data_defect = scalar_norm(&diff(&ref_data, &pert_data), grid, Norm::L2Omega)?
                    / scalar_norm(&ref_data, grid, Norm::L2Omega)?;

                let h1 = p.xi.zip_map(&pert_data, |x, d| x * d);
                let cert = certificate_from_u1(p, angular, g, &h1, &t.first.u, ropts.alpha_min)?;
                Ok(UqMeasurement {
                    err_sigma_a,
                    err_sigma_b,
                    ratio: (misspecification > 0.0).then(|| (err_sigma_a + err_sigma_b) / misspecification),
                    intermediate_lhs,
                    intermediate_rhs,
                    defect_first,
                    defect_second,
                    data_defect,
                    pi: Some(cert.pi),
                    in_a1: Some(cert.in_a1),
                    in_a2: Some(cert.in_a2),
                    sigma_a: p.sigma_a.clone(),
                    sigma_b: p.sigma_b.clone(),
                })
            };
            Ok(UqRow {
                eta,
                misspecification,
                outcome: measure().map_err(|e| e.to_string()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UqSweepResult::from_rows(
        Regime::Transport,
        Norm::L2Omega,
        Norm::L2Omega,
        rows,
        (r.sigma_a.clone(), r.sigma_b.clone()),
    ))
}

struct DiffusionState {
    coeffs: CoefficientSet,
    pure: EllipticOperator,
    u1: ScalarField,
    u2: ScalarField,
}

fn diffusion_state(
    base: &CoefficientSet,
    gamma: ScalarField,
    g: &BoundaryTrace,
    h: (&ScalarField, &ScalarField),
    opts: &ReconstructionOptions,
) -> Result<DiffusionState> {
    let c = base.clone().with_gamma(gamma);
    let sa = reconstruct_sigma_a_diffusion(&c, g, h.0, opts)?.field;
    let c = c.with_sigma_a(sa);
    let sb = reconstruct_sigma_b_diffusion(&c, g, h.1, opts)?.field;
    let c = c.with_sigma_b(sb);
    let op = EllipticOperator::new(&c.grid, &c.gamma, &c.sigma_a)?;
    let u1 = solve_with_operator(&c.grid, &op, Some(g), None, None, &opts.diffusion)?.u;
    let src = u2_source_diffusion(&c.sigma_b, &u1)?;
    let u2 = solve_with_operator(&c.grid, &op, None, Some(&src), None, &opts.diffusion)?.u;
    let pure = EllipticOperator::pure(&c.grid, &c.gamma)?;
    Ok(DiffusionState { coeffs: c, pure, u1, u2 })
}

/// Relative defect of `−∇·γ∇(a − b) = ∇·(γ − γ̃)∇b` with the boundary trace
/// `g` shared by `a` and `b` (zero for second-order fields).
fn diffusion_defect(
    reference: &DiffusionState,
    perturbed: &DiffusionState,
    a: &ScalarField,
    b: &ScalarField,
    g: &BoundaryTrace,
) -> Result<f64> {
    let grid = &reference.coeffs.grid;
    let w = diff(a, b);
    let lhs = ScalarField::new(grid, reference.pure.apply(w.values()))?;
    let with_ref = reference.pure.apply_with_boundary(grid, b.values(), g)?;
    let with_pert = perturbed.pure.apply_with_boundary(grid, b.values(), g)?;
    let rhs = ScalarField::new(grid, with_pert.iter().zip(&with_ref).map(|(p, r)| p - r).collect())?;
    let d = scalar_norm(&diff(&lhs, &rhs), grid, Norm::L2Omega)?;
    Ok(relative(
        d,
        scalar_norm(&lhs, grid, Norm::L2Omega)?,
        scalar_norm(&rhs, grid, Norm::L2Omega)?,
    ))
}

/// Sweep over `γ̃ = γ(1 + η b)` in the diffusion regime. Errors are measured
/// in Lᵖ and the misspecification `(γ̃ − γ)/γ̃` in the discrete W¹ᵖ norm.
pub fn uq_diffusion_sweep(
    c_true: &CoefficientSet,
    g: &BoundaryTrace,
    etas: &[f64],
    opts: &UqOptions,
) -> Result<UqSweepResult> {
    let etas = sorted_etas(etas)?;
    if !(g.inf() > 0.0) {
        return Err(Error::Precondition(format!(
            "diffusion sweep needs inf g > 0, got {:e}",
            g.inf()
        )));
    }
    let grid = &c_true.grid;
    let p = opts.p;
    let ropts = &opts.reconstruction;
    let bundle = linearize_diffusion(c_true, g, &ropts.diffusion)?;
    let data = linearized_data_diffusion(c_true, &bundle)?;
    let h = (&data.h1, &data.h2);
    let reference = diffusion_state(c_true, c_true.gamma.clone(), g, h, ropts)?;
    let r = &reference.coeffs;
    let ref_data = r.sigma_a.zip_map(&reference.u1, |s, u| s * u);
    let zero_trace = BoundaryTrace::constant(grid, 0.0);

    let rows = etas
        .par_iter()
        .map(|&eta| {
            let gamma = c_true.gamma.zip_map(&opts.perturbation.factor(grid, eta), |s, f| s * f);
            let rel = gamma.zip_map(&c_true.gamma, |gt, g0| (gt - g0) / gt);
            let misspecification = scalar_norm(&rel, grid, Norm::W1p(p))?;
            let measure = || -> Result<UqMeasurement> {
                let t = diffusion_state(c_true, gamma.clone(), g, h, ropts)?;
                let q = &t.coeffs;
                let err_sigma_a = scalar_norm(&diff(&r.sigma_a, &q.sigma_a), grid, Norm::Lp(p))?;
                let err_sigma_b = scalar_norm(&diff(&r.sigma_b, &q.sigma_b), grid, Norm::Lp(p))?;
                let intermediate_lhs = scalar_norm(&diff(&reference.u1, &t.u1), grid, Norm::W2p(p))?;
                let defect_first = diffusion_defect(&reference, &t, &reference.u1, &t.u1, g)?;
                let defect_second = diffusion_defect(&reference, &t, &reference.u2, &t.u2, &zero_trace)?;
                let pert_data = q.sigma_a.zip_map(&t.u1, |s, u| s * u);
                let data_defect = scalar_norm(&diff(&ref_data, &pert_data), grid, Norm::L2Omega)?
                    / scalar_norm(&ref_data, grid, Norm::L2Omega)?;
                Ok(UqMeasurement {
                    err_sigma_a,
                    err_sigma_b,
                    ratio: (misspecification > 0.0).then(|| (err_sigma_a + err_sigma_b) / misspecification),
                    intermediate_lhs,
                    intermediate_rhs: misspecification,
                    defect_first,
                    defect_second,
                    data_defect,
                    pi: None,
                    in_a1: None,
                    in_a2: None,
                    sigma_a: q.sigma_a.clone(),
                    sigma_b: q.sigma_b.clone(),
                })
            };
            Ok(UqRow {
                eta,
                misspecification,
                outcome: measure().map_err(|e| e.to_string()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UqSweepResult::from_rows(
        Regime::Diffusion,
        Norm::Lp(p),
        Norm::W1p(p),
        rows,
        (r.sigma_a.clone(), r.sigma_b.clone()),
    ))
}
