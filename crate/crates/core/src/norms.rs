//! Discrete norms on grid functions.
//!
//! Derivatives in the Sobolev surrogates use centred differences in the
//! interior. At the boundary, first derivatives use the second-order
//! one-sided stencil and second derivatives use `(f0 − 2f1 + f2)/h²`.

use crate::boundary::BoundarySource;
use crate::error::{Error, Result};
use crate::field::{PhaseField, ScalarField};
use crate::grid::SpatialGrid;
use crate::quadrature::AngularQuadrature;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    Linf,
    /// `L²(Ω × S¹)` with the normalized angular measure.
    L2X,
    L2Omega,
    Lp(f64),
    /// `‖f‖_p + ‖∇f‖_p`, combined as an ℓᵖ sum of the component norms.
    W1p(f64),
    W2p(f64),
    /// `L∞_{dξ}(Γ₋)`.
    LdxiInfGamma,
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Norm::Linf => write!(f, "Linf"),
            Norm::L2X => write!(f, "L2_X"),
            Norm::L2Omega => write!(f, "L2_Omega"),
            Norm::Lp(p) => write!(f, "Lp_Omega(p={p})"),
            Norm::W1p(p) => write!(f, "W1p_discrete(p={p})"),
            Norm::W2p(p) => write!(f, "W2p_discrete(p={p})"),
            Norm::LdxiInfGamma => write!(f, "Ldxi_inf_Gamma"),
        }
    }
}

/// Any field a norm can be taken of.
#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    Scalar(&'a ScalarField),
    Phase(&'a PhaseField),
    Boundary(&'a BoundarySource),
}

/// Dispatches to the norm appropriate for the field kind. `quad` is needed
/// only for `L2X`.
pub fn discrete_norm(
    f: FieldRef<'_>,
    grid: &SpatialGrid,
    quad: Option<&AngularQuadrature>,
    norm: Norm,
) -> Result<f64> {
    match f {
        FieldRef::Scalar(s) => scalar_norm(s, grid, norm),
        FieldRef::Phase(u) => match quad {
            Some(q) => phase_norm(u, grid, q, norm),
            None if norm == Norm::Linf => Ok(u.max_abs()),
            None => Err(Error::Norm(format!("{norm} of a phase field needs the quadrature"))),
        },
        FieldRef::Boundary(g) => match norm {
            Norm::LdxiInfGamma | Norm::Linf => Ok(g.sup_norm()),
            other => Err(Error::Norm(format!("{other} is not defined on boundary sources"))),
        },
    }
}

fn check_p(p: f64, min: f64, norm: Norm) -> Result<()> {
    if !(p >= min) || !p.is_finite() {
        return Err(Error::Norm(format!("{norm} requires finite p >= {min}")));
    }
    Ok(())
}

fn lp_sum(values: &[f64], p: f64, area: f64) -> f64 {
    values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * area
}

pub fn scalar_norm(f: &ScalarField, grid: &SpatialGrid, norm: Norm) -> Result<f64> {
    f.check_grid(grid)?;
    let area = grid.cell_area();
    match norm {
        Norm::Linf => Ok(f.max_abs()),
        Norm::L2Omega => Ok(lp_sum(f.values(), 2.0, area).sqrt()),
        Norm::Lp(p) => {
            check_p(p, 1.0, norm)?;
            Ok(lp_sum(f.values(), p, area).powf(1.0 / p))
        }
        Norm::W1p(p) => {
            check_p(p, 1.0, norm)?;
            let (dx, dy) = gradient(f, grid);
            let s = lp_sum(f.values(), p, area) + lp_sum(&dx, p, area) + lp_sum(&dy, p, area);
            Ok(s.powf(1.0 / p))
        }
        Norm::W2p(p) => {
            if !(p > 2.0) || !p.is_finite() {
                return Err(Error::Norm(format!("{norm} requires finite p > 2")));
            }
            let (dx, dy) = gradient(f, grid);
            let dxx = second_derivative(f.values(), grid, Axis::X);
            let dyy = second_derivative(f.values(), grid, Axis::Y);
            let dxy = first_derivative(&dx, grid, Axis::Y);
            let s = [f.values(), &dx, &dy, &dxx, &dyy, &dxy]
                .iter()
                .map(|v| lp_sum(v, p, area))
                .sum::<f64>();
            Ok(s.powf(1.0 / p))
        }
        Norm::L2X | Norm::LdxiInfGamma => Err(Error::Norm(format!(
            "{norm} is not defined on scalar fields"
        ))),
    }
}

pub fn phase_norm(
    u: &PhaseField,
    grid: &SpatialGrid,
    quad: &AngularQuadrature,
    norm: Norm,
) -> Result<f64> {
    u.check_shape(grid, quad.len())?;
    match norm {
        Norm::Linf => Ok(u.max_abs()),
        Norm::L2X => {
            let mut s = 0.0;
            for k in 0..quad.len() {
                s += quad.weight(k) * u.block(k).iter().map(|v| v * v).sum::<f64>();
            }
            Ok((s * grid.cell_area()).sqrt())
        }
        other => Err(Error::Norm(format!("{other} is not defined on phase fields"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    X,
    Y,
}

fn first_derivative(f: &[f64], grid: &SpatialGrid, axis: Axis) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = vec![0.0; f.len()];
    let (n, h, stride) = match axis {
        Axis::X => (nx, grid.hx(), 1),
        Axis::Y => (ny, grid.hy(), nx),
    };
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            let pos = if axis == Axis::X { i } else { j };
            out[c] = if pos == 0 {
                (-3.0 * f[c] + 4.0 * f[c + stride] - f[c + 2 * stride]) / (2.0 * h)
            } else if pos == n - 1 {
                (3.0 * f[c] - 4.0 * f[c - stride] + f[c - 2 * stride]) / (2.0 * h)
            } else {
                (f[c + stride] - f[c - stride]) / (2.0 * h)
            };
        }
    }
    out
}

fn second_derivative(f: &[f64], grid: &SpatialGrid, axis: Axis) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = vec![0.0; f.len()];
    let (n, h, stride) = match axis {
        Axis::X => (nx, grid.hx(), 1),
        Axis::Y => (ny, grid.hy(), nx),
    };
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            let pos = if axis == Axis::X { i } else { j };
            out[c] = if pos == 0 {
                (f[c] - 2.0 * f[c + stride] + f[c + 2 * stride]) / (h * h)
            } else if pos == n - 1 {
                (f[c] - 2.0 * f[c - stride] + f[c - 2 * stride]) / (h * h)
            } else {
                (f[c + stride] - 2.0 * f[c] + f[c - stride]) / (h * h)
            };
        }
    }
    out
}

/// Discrete gradient `(∂x f, ∂y f)` with the stencils described above.
pub fn gradient(f: &ScalarField, grid: &SpatialGrid) -> (Vec<f64>, Vec<f64>) {
    (
        first_derivative(f.values(), grid, Axis::X),
        first_derivative(f.values(), grid, Axis::Y),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_field_has_zero_norms() {
        let g = SpatialGrid::unit_square(8).unwrap();
        let z = ScalarField::zeros(&g);
        for n in [Norm::Linf, Norm::L2Omega, Norm::Lp(4.0), Norm::W1p(4.0), Norm::W2p(4.0)] {
            assert_eq!(scalar_norm(&z, &g, n).unwrap(), 0.0);
        }
    }

    #[test]
    fn unit_constant_on_unit_square() {
        let g = SpatialGrid::unit_square(8).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert!((scalar_norm(&one, &g, Norm::L2Omega).unwrap() - 1.0).abs() < 1e-14);
        // derivatives of a constant vanish, so all Sobolev surrogates agree with Lp
        assert!((scalar_norm(&one, &g, Norm::W2p(4.0)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stencils_are_exact_on_quadratics() {
        let g = SpatialGrid::unit_square(9).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| x * x + 3.0 * x * y - y * y);
        let (dx, _) = gradient(&f, &g);
        let dxx = second_derivative(f.values(), &g, Axis::X);
        let dxy = first_derivative(&dx, &g, Axis::Y);
        for c in 0..g.ncells() {
            let (i, j) = g.coords(c);
            let [x, y] = g.center(i, j);
            assert!((dx[c] - (2.0 * x + 3.0 * y)).abs() < 1e-12);
            assert!((dxx[c] - 2.0).abs() < 1e-9);
            assert!((dxy[c] - 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unsupported_combinations_are_errors() {
        let g = SpatialGrid::unit_square(4).unwrap();
        let q = AngularQuadrature::uniform(4).unwrap();
        let s = ScalarField::zeros(&g);
        let u = PhaseField::zeros(&g, 4);
        assert!(scalar_norm(&s, &g, Norm::L2X).is_err());
        assert!(scalar_norm(&s, &g, Norm::W2p(2.0)).is_err());
        assert!(phase_norm(&u, &g, &q, Norm::W2p(4.0)).is_err());
        let b = BoundarySource::zeros(&g, &q);
        assert!(discrete_norm(FieldRef::Boundary(&b), &g, None, Norm::L2Omega).is_err());
    }

    proptest! {
        #[test]
        fn jensen_bound(seed in 0u64..500, half in 2usize..8) {
            let g = SpatialGrid::unit_square(5).unwrap();
            let q = AngularQuadrature::uniform(2 * half).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = PhaseField::from_fn(&g, &q, |_, _, _| rng.random_range(-1.0..1.0));
            let avg = crate::field::velocity_average(&u, &q).unwrap();
            let lhs = scalar_norm(&avg, &g, Norm::L2Omega).unwrap();
            let rhs = phase_norm(&u, &g, &q, Norm::L2X).unwrap();
            prop_assert!(lhs <= rhs);
        }
    }
}
