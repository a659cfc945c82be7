//! Linear and small-data semilinear diffusion solves.

use super::operator::{pcg, EllipticOperator};
use crate::boundary::BoundaryTrace;
use crate::coefficients::CoefficientSet;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::SpatialGrid;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionOptions {
    /// Relative CG residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DiffusionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionPicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub inner: DiffusionOptions,
}

impl Default for DiffusionPicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            inner: DiffusionOptions::default(),
        }
    }
}

/// Observed version of the invariant-ball inequality `c(ε² + δ²) < δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallCheck {
    /// `‖u₀‖_∞`.
    pub epsilon: f64,
    /// Twice the largest correction seen.
    pub delta: f64,
    /// `max ‖w^{k+1}‖ / (‖u₀‖² + ‖w^k‖²)`.
    pub c_obs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiffusionSolveReport {
    pub cg_iterations: usize,
    pub picard_iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub picard_ratios: Vec<f64>,
    pub energy: Vec<f64>,
    /// `‖u‖_∞ / ‖g‖_∞`.
    pub bound_ratio: f64,
    pub ball: Option<BallCheck>,
}

impl fmt::Display for DiffusionSolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cg_iterations = {}", self.cg_iterations)?;
        writeln!(f, "picard_iterations = {}", self.picard_iterations)?;
        writeln!(f, "residual = {:e}", self.residual)?;
        writeln!(f, "bound_ratio = {:e}", self.bound_ratio)?;
        if let Some(b) = &self.ball {
            writeln!(f, "ball_epsilon = {:e}", b.epsilon)?;
            writeln!(f, "ball_delta = {:e}", b.delta)?;
            writeln!(f, "ball_c_obs = {:e}", b.c_obs)?;
            writeln!(f, "ball_holds = {}", b.holds)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSolution {
    pub u: ScalarField,
    pub report: DiffusionSolveReport,
}

/// Solves `A x = b(g) + S` for an assembled operator.
pub fn solve_with_operator(
    grid: &SpatialGrid,
    op: &EllipticOperator,
    g: Option<&BoundaryTrace>,
    s: Option<&ScalarField>,
    x0: Option<&ScalarField>,
    opts: &DiffusionOptions,
) -> Result<DiffusionSolution> {
    let mut b = match g {
        Some(g) => op.boundary_rhs(grid, g)?,
        None => vec![0.0; grid.ncells()],
    };
    if let Some(s) = s {
        s.check_grid(grid)?;
        for (b, s) in b.iter_mut().zip(s.values()) {
            *b += s;
        }
    }
    let (x, cg) = pcg(op, &b, x0.map(|x| x.values()), opts.tol, opts.max_iter)?;
    let u = ScalarField::new(grid, x)?;
    let gsup = g.map_or(0.0, |g| g.sup_norm());
    Ok(DiffusionSolution {
        report: DiffusionSolveReport {
            cg_iterations: cg.iterations,
            residual: cg.residual,
            energy: cg.energy,
            bound_ratio: if gsup > 0.0 { u.max_abs() / gsup } else { 0.0 },
            ..Default::default()
        },
        u,
    })
}

/// `−∇·γ∇u + σ_a u = S`, `u = g` on ∂Ω.
pub fn solve_linear_diffusion(
    c: &CoefficientSet,
    g: &BoundaryTrace,
    s: Option<&ScalarField>,
    opts: &DiffusionOptions,
) -> Result<DiffusionSolution> {
    c.check_solvable()?;
    let op = EllipticOperator::new(&c.grid, &c.gamma, &c.sigma_a)?;
    solve_with_operator(&c.grid, &op, Some(g), s, None, opts)
}

/// `−∇·γ∇u + σ_a u + σ_b u² = 0`, `u = g` on ∂Ω, as `u = u₀ + w` with
/// `w` the Picard fixed point of `w ↦ T⁻¹(−σ_b (u₀ + w)²)`.
pub fn solve_semilinear_diffusion(
    c: &CoefficientSet,
    g: &BoundaryTrace,
    opts: &DiffusionPicardOptions,
) -> Result<DiffusionSolution> {
    c.check_solvable()?;
    let grid = &c.grid;
    let op = EllipticOperator::new(grid, &c.gamma, &c.sigma_a)?;
    let base = solve_with_operator(grid, &op, Some(g), None, None, &opts.inner)?;
    if c.sigma_b.is_identically_zero() {
        return Ok(base);
    }
    let u0 = &base.u;
    let eps = u0.max_abs();
    let mut w = ScalarField::zeros(grid);
    let mut history: Vec<f64> = Vec::new();
    let mut ratios = Vec::new();
    let mut cg_iterations = base.report.cg_iterations;
    let mut c_obs: f64 = 0.0;
    let mut w_max: f64 = 0.0;
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let src = u0.zip_map(&w, |a, b| a + b).zip_map(&c.sigma_b, |u, s| -s * u * u);
        let next = solve_with_operator(grid, &op, None, Some(&src), Some(&w), &opts.inner)?;
        cg_iterations += next.report.cg_iterations;
        let w_norm = w.max_abs();
        let next_norm = next.u.max_abs();
        let denom = eps * eps + w_norm * w_norm;
        if denom > 0.0 {
            c_obs = c_obs.max(next_norm / denom);
        }
        w_max = w_max.max(next_norm);
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
        if !res.is_finite() || (history.len() > 3 && res > 1e3 * history[0]) {
            return Err(Error::Divergence(format!(
                "semilinear diffusion Picard residual grew to {res:e}; boundary data too large"
            )));
        }
        if history.len() > 5 && ratios.iter().rev().take(3).all(|r| *r >= 1.0) {
            return Err(Error::Divergence(
                "semilinear diffusion Picard iteration is not contracting".into(),
            ));
        }
        let scale = u0.zip_map(&w, |a, b| a + b).max_abs();
        if res <= opts.tol * scale {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            solver: "semilinear diffusion Picard",
            iterations: history.len(),
            residual: *history.last().unwrap_or(&f64::NAN),
        });
    }
    let u = u0.zip_map(&w, |a, b| a + b);
    let delta = 2.0 * w_max;
    let ball = BallCheck {
        epsilon: eps,
        delta,
        c_obs,
        holds: c_obs * (eps * eps + delta * delta) < delta,
    };
    let gsup = g.sup_norm();
    Ok(DiffusionSolution {
        report: DiffusionSolveReport {
            cg_iterations,
            picard_iterations: history.len(),
            residual: *history.last().unwrap_or(&0.0),
            residual_history: history,
            picard_ratios: ratios,
            energy: Vec::new(),
            bound_ratio: if gsup > 0.0 { u.max_abs() / gsup } else { 0.0 },
            ball: Some(ball),
        },
        u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn homogeneous(n: usize, sigma_b: f64) -> CoefficientSet {
        let grid = SpatialGrid::unit_square(n).unwrap();
        CoefficientSet::constant(&grid, 1.0, 1.0, sigma_b, 0.0, 1.0, 0.5, 2.0)
    }

    fn manufactured_error(n: usize) -> f64 {
        let c = homogeneous(n, 0.0);
        let exact = ScalarField::from_fn(&c.grid, |x, y| (PI * x).sin() * (PI * y).sin());
        let s = exact.map(|u| (2.0 * PI * PI + 1.0) * u);
        let sol = solve_linear_diffusion(&c, &BoundaryTrace::zeros(&c.grid), Some(&s), &Default::default())
            .unwrap();
        sol.u.zip_map(&exact, |a, b| a - b).max_abs()
    }

    #[test]
    fn zero_data_gives_zero() {
        let c = homogeneous(8, 0.0);
        let sol = solve_linear_diffusion(&c, &BoundaryTrace::zeros(&c.grid), None, &Default::default()).unwrap();
        assert!(sol.u.is_identically_zero());
    }

    #[test]
    fn manufactured_solution_is_second_order() {
        let e: Vec<f64> = [16, 32, 64].iter().map(|&n| manufactured_error(n)).collect();
        for w in e.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..=2.2).contains(&order), "order {order}, errors {e:?}");
        }
    }

    #[test]
    fn maximum_principle() {
        let c = homogeneous(12, 0.0);
        let g = BoundaryTrace::from_fn(&c.grid, |p| 1.0 + p[0] * p[1]);
        let sol = solve_linear_diffusion(&c, &g, None, &Default::default()).unwrap();
        assert!(sol.u.min() >= 0.0);
        assert!(sol.u.max() <= g.sup_norm() + 1e-12);
    }

    #[test]
    fn zero_sigma_b_is_the_linear_solve() {
        let c = homogeneous(10, 0.0);
        let g = BoundaryTrace::constant(&c.grid, 0.01);
        let lin = solve_linear_diffusion(&c, &g, None, &Default::default()).unwrap();
        let semi = solve_semilinear_diffusion(&c, &g, &Default::default()).unwrap();
        assert_eq!(lin.u, semi.u);
    }

    #[test]
    fn two_photon_absorption_lowers_the_solution() {
        let c = homogeneous(10, 1.0);
        let g = BoundaryTrace::constant(&c.grid, 0.05);
        let lin = solve_linear_diffusion(&c, &g, None, &Default::default()).unwrap();
        let semi = solve_semilinear_diffusion(&c, &g, &Default::default()).unwrap();
        assert!(semi.u.min() > 0.0);
        for (a, b) in semi.u.values().iter().zip(lin.u.values()) {
            assert!(a <= b);
        }
        let ball = semi.report.ball.unwrap();
        assert!(ball.holds, "{ball:?}");
        assert!(semi.report.picard_ratios.iter().all(|r| *r < 1.0));
    }
}
