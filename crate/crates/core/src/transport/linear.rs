//! Linear transport solves `v·∇u + σ_a u = σ_s K(u) + S`, `u = g` on Γ₋,
//! by step-characteristics sweeps and source iteration on the scattering term.

use super::sweep::{
    streaming_plus_removal, sweep_direction, x_face_count, y_face_count, DirectionPlan,
};
use crate::boundary::BoundarySource;
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::field::{in_scatter, out_scatter_rates, PhaseField};
use crate::grid::{Side, SpatialGrid};
use crate::quadrature::Angular;
use rayon::prelude::*;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    /// Relative tolerance on the sup-norm change between source iterations.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Face averages from the final sweep, one block per direction.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    nx: usize,
    ny: usize,
    nv: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl FaceField {
    pub fn zeros(grid: &SpatialGrid, nv: usize) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            nv,
            x: vec![0.0; x_face_count(grid) * nv],
            y: vec![0.0; y_face_count(grid) * nv],
        }
    }

    fn nxf(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    fn nyf(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn ndirs(&self) -> usize {
        self.nv
    }

    /// Average over the x face `i_face` (at `x0 + i_face·hx`) in row `j`.
    pub fn x_face(&self, k: usize, i_face: usize, j: usize) -> f64 {
        self.x[k * self.nxf() + j * (self.nx + 1) + i_face]
    }

    /// Average over the y face `j_face` in column `i`.
    pub fn y_face(&self, k: usize, i: usize, j_face: usize) -> f64 {
        self.y[k * self.nyf() + j_face * self.nx + i]
    }

    pub fn x_block(&self, k: usize) -> &[f64] {
        let n = self.nxf();
        &self.x[k * n..(k + 1) * n]
    }

    pub fn y_block(&self, k: usize) -> &[f64] {
        let n = self.nyf();
        &self.y[k * n..(k + 1) * n]
    }

    pub fn zip_map(&self, other: &FaceField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.x.len(), other.x.len(), "face field shape mismatch");
        Self {
            nx: self.nx,
            ny: self.ny,
            nv: self.nv,
            x: self.x.iter().zip(&other.x).map(|(&a, &b)| f(a, b)).collect(),
            y: self.y.iter().zip(&other.y).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionCertificate {
    /// `ε = ‖g‖_{L∞_{dξ}(Γ₋)}`.
    pub epsilon: f64,
    /// Radius of the invariant ball for the correction `w`.
    pub delta: f64,
    /// `C₂ C₀`.
    pub k: f64,
    /// `C₂ C₀ (ε + δ)`.
    pub certified_ratio: f64,
    /// Lipschitz bound of the Picard map on the ball, `2 C₂ C₀ (ε + δ)`.
    pub lipschitz_bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransportSolveReport {
    pub source_iterations: usize,
    pub picard_iterations: usize,
    /// Final sup-norm successive difference (source iteration for linear
    /// solves, Picard for semilinear ones).
    pub residual: f64,
    pub residual_history: Vec<f64>,
    /// Ratios of consecutive Picard residuals.
    pub picard_ratios: Vec<f64>,
    /// `ε′ = g̲ e^{−d_Ω σ̄}` when `inf g > 0` and there is no volume source.
    pub epsilon_prime: Option<f64>,
    /// A-priori sup bound `‖g‖_{L∞_{dξ}(Γ₋)}` for source-free problems.
    pub sup_bound: Option<f64>,
    /// Observed `‖u‖_∞ / ‖g‖_{L∞_{dξ}(Γ₋)}`.
    pub bound_constant: f64,
    pub contraction: Option<ContractionCertificate>,
}

impl fmt::Display for TransportSolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "source_iterations = {}", self.source_iterations)?;
        writeln!(f, "picard_iterations = {}", self.picard_iterations)?;
        writeln!(f, "residual = {:e}", self.residual)?;
        if let Some(e) = self.epsilon_prime {
            writeln!(f, "epsilon_prime = {e:e}")?;
        }
        if let Some(b) = self.sup_bound {
            writeln!(f, "sup_bound = {b:e}")?;
        }
        writeln!(f, "bound_constant = {:e}", self.bound_constant)?;
        if let Some(c) = &self.contraction {
            writeln!(f, "contraction_epsilon = {:e}", c.epsilon)?;
            writeln!(f, "contraction_delta = {:e}", c.delta)?;
            writeln!(f, "certified_ratio = {:e}", c.certified_ratio)?;
            writeln!(f, "lipschitz_bound = {:e}", c.lipschitz_bound)?;
            let max_ratio = self.picard_ratios.iter().copied().fold(0.0, f64::max);
            writeln!(f, "max_observed_ratio = {max_ratio:e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub u: PhaseField,
    pub faces: FaceField,
    pub report: TransportSolveReport,
}

/// The discrete transport operator for one coefficient set, with the sweep
/// weights precomputed.
#[derive(Debug, Clone)]
pub struct TransportOperator {
    grid: SpatialGrid,
    angular: Angular,
    sigma_a: Vec<f64>,
    sigma_s: Vec<f64>,
    /// `σ_a + σ_s Σ_j w_j Θ(v_j, v_k)` per direction.
    sigma_t: Vec<Vec<f64>>,
    plans: Vec<DirectionPlan>,
    scattering: bool,
    epsilon_prime_factor: f64,
}

impl TransportOperator {
    pub fn new(c: &CoefficientSet, angular: &Angular) -> Result<Self> {
        c.check_solvable()?;
        let grid = c.grid.clone();
        let rates = out_scatter_rates(angular);
        let sigma_a = c.sigma_a.values().to_vec();
        let sigma_s = c.sigma_s.values().to_vec();
        let sigma_t: Vec<Vec<f64>> = rates
            .iter()
            .map(|r| sigma_a.iter().zip(&sigma_s).map(|(a, s)| a + s * r).collect())
            .collect();
        let plans = (0..angular.ndirs())
            .into_par_iter()
            .map(|k| DirectionPlan::new(&grid, angular.quadrature.direction(k), &sigma_t[k]))
            .collect();
        let scattering = !c.sigma_s.is_identically_zero();
        let epsilon_prime_factor = (-grid.diameter() * c.sigma_bar()).exp();
        Ok(Self {
            grid,
            angular: angular.clone(),
            sigma_a,
            sigma_s,
            sigma_t,
            plans,
            scattering,
            epsilon_prime_factor,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn angular(&self) -> &Angular {
        &self.angular
    }

    pub fn ndirs(&self) -> usize {
        self.angular.ndirs()
    }

    fn sweep_all(&self, g: Option<&BoundarySource>, q: &PhaseField) -> (PhaseField, FaceField) {
        let grid = &self.grid;
        let nv = self.ndirs();
        let n = grid.ncells();
        let mut u = PhaseField::zeros(grid, nv);
        let mut faces = FaceField::zeros(grid, nv);
        let (nxf, nyf) = (x_face_count(grid), y_face_count(grid));
        u.values_mut()
            .par_chunks_mut(n)
            .zip(faces.x.par_chunks_mut(nxf))
            .zip(faces.y.par_chunks_mut(nyf))
            .enumerate()
            .for_each(|(k, ((cells, xf), yf))| {
                let inflow = |side: Side, along: usize| match g {
                    Some(g) => g.get(grid.face_index(side, along), k),
                    None => 0.0,
                };
                sweep_direction(grid, &self.plans[k], q.block(k), inflow, cells, xf, yf);
            });
        (u, faces)
    }

    /// `σ_s Θu + S`.
    fn source(&self, u: &PhaseField, s: Option<&PhaseField>) -> Result<PhaseField> {
        let nv = self.ndirs();
        let mut q = if self.scattering {
            in_scatter(u, &self.angular)?
        } else {
            PhaseField::zeros(&self.grid, nv)
        };
        let n = self.grid.ncells();
        if self.scattering {
            for chunk in q.values_mut().chunks_mut(n) {
                for (v, s) in chunk.iter_mut().zip(&self.sigma_s) {
                    *v *= s;
                }
            }
        }
        if let Some(s) = s {
            for (v, sv) in q.values_mut().iter_mut().zip(s.values()) {
                *v += sv;
            }
        }
        Ok(q)
    }

    /// Solves with inflow `g` (zero if `None`), volume source `s`, starting
    /// the source iteration from `initial` if given.
    pub fn solve(
        &self,
        g: Option<&BoundarySource>,
        s: Option<&PhaseField>,
        initial: Option<&PhaseField>,
        opts: &TransportOptions,
    ) -> Result<TransportSolution> {
        let nv = self.ndirs();
        if let Some(g) = g {
            g.check_shape(&self.grid, nv)?;
        }
        if let Some(s) = s {
            s.check_shape(&self.grid, nv)?;
        }
        if !(opts.tol > 0.0) {
            return Err(Error::Precondition(format!("tolerance must be positive, got {}", opts.tol)));
        }
        let mut u = match initial {
            Some(u0) => {
                u0.check_shape(&self.grid, nv)?;
                u0.clone()
            }
            None => PhaseField::zeros(&self.grid, nv),
        };
        let mut history = Vec::new();
        let mut faces;
        let mut iterations = 0;
        loop {
            iterations += 1;
            let q = self.source(&u, s)?;
            let (u_new, f_new) = self.sweep_all(g, &q);
            faces = f_new;
            let diff = u_new
                .values()
                .iter()
                .zip(u.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let scale = u_new.max_abs();
            u = u_new;
            if !self.scattering {
                history.push(0.0);
                break;
            }
            history.push(diff);
            if !diff.is_finite() {
                return Err(Error::Divergence("source iteration produced non-finite values".into()));
            }
            if diff <= opts.tol * scale {
                break;
            }
            if iterations >= opts.max_iter {
                return Err(Error::NotConverged {
                    solver: "source iteration",
                    iterations,
                    residual: diff,
                });
            }
        }
        let g_sup = g.map_or(0.0, |g| g.sup_norm());
        let source_free = s.is_none_or(|s| s.values().iter().all(|v| *v == 0.0));
        let epsilon_prime = match g {
            Some(g) if source_free && g.inf() > 0.0 => Some(g.inf() * self.epsilon_prime_factor),
            _ => None,
        };
        let report = TransportSolveReport {
            source_iterations: iterations,
            picard_iterations: 0,
            residual: *history.last().unwrap_or(&0.0),
            residual_history: history,
            picard_ratios: Vec::new(),
            epsilon_prime,
            sup_bound: source_free.then_some(g_sup),
            bound_constant: if g_sup > 0.0 { u.max_abs() / g_sup } else { 0.0 },
            contraction: None,
        };
        Ok(TransportSolution { u, faces, report })
    }

    /// `v·∇u + σ_a u − σ_s K(u)` evaluated with the face averages of a sweep.
    /// For a converged solve this reproduces the volume source up to the
    /// source-iteration tolerance.
    pub fn apply(&self, u: &PhaseField, faces: &FaceField) -> Result<PhaseField> {
        let nv = self.ndirs();
        u.check_shape(&self.grid, nv)?;
        let mut out = PhaseField::zeros(&self.grid, nv);
        for k in 0..nv {
            streaming_plus_removal(
                &self.grid,
                self.angular.quadrature.direction(k),
                &self.sigma_t[k],
                u.block(k),
                faces.x_block(k),
                faces.y_block(k),
                out.block_mut(k),
            );
        }
        if self.scattering {
            let th = in_scatter(u, &self.angular)?;
            let n = self.grid.ncells();
            for (k, chunk) in out.values_mut().chunks_mut(n).enumerate() {
                for ((o, t), s) in chunk.iter_mut().zip(th.block(k)).zip(&self.sigma_s) {
                    *o -= s * t;
                }
            }
        }
        Ok(out)
    }

    pub fn sigma_a(&self) -> &[f64] {
        &self.sigma_a
    }
}

/// Linear transport solve with a fresh operator.
pub fn solve_linear_rte(
    c: &CoefficientSet,
    angular: &Angular,
    g: &BoundarySource,
    s: Option<&PhaseField>,
    opts: &TransportOptions,
) -> Result<TransportSolution> {
    TransportOperator::new(c, angular)?.solve(Some(g), s, None, opts)
}

/// `ε′ = g̲ · exp(−d_Ω σ̄)`, the positivity floor for source-free solutions.
pub fn positivity_lower_bound(c: &CoefficientSet, g: &BoundarySource) -> Result<f64> {
    let g_min = g.inf();
    if !(g_min > 0.0) {
        return Err(Error::Precondition(format!(
            "positivity bound needs inf g > 0 on the inflow boundary, got {g_min}"
        )));
    }
    Ok(positivity_bound_value(g_min, c.grid.diameter(), c.sigma_bar()))
}

pub fn positivity_bound_value(g_min: f64, diameter: f64, sigma_bar: f64) -> f64 {
    g_min * (-diameter * sigma_bar).exp()
}
