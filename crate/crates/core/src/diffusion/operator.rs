//! Cell-centred five-point discretization of `−∇·γ∇u + r u` with Dirichlet
//! data imposed at boundary faces, and a Jacobi-preconditioned CG solver.

use crate::boundary::BoundaryTrace;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{Side, SpatialGrid};

/// Matrix-free SPD operator. Interior faces carry the harmonic mean of the
/// neighbouring γ; a boundary face eliminates the ghost value, giving the
/// coupling `2γ_c/h²` to the face datum.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticOperator {
    nx: usize,
    ny: usize,
    /// x-face couplings, `(nx+1)·ny`, indexed `j·(nx+1) + i`.
    wx: Vec<f64>,
    /// y-face couplings, `nx·(ny+1)`, indexed `j·nx + i`.
    wy: Vec<f64>,
    reaction: Vec<f64>,
    diag: Vec<f64>,
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

impl EllipticOperator {
    pub fn new(grid: &SpatialGrid, gamma: &ScalarField, reaction: &ScalarField) -> Result<Self> {
        gamma.check_grid(grid)?;
        reaction.check_grid(grid)?;
        if !(gamma.min() > 0.0) || !gamma.is_finite() {
            return Err(Error::Coefficient(format!(
                "diffusion operator is not SPD: gamma must be positive, min is {}",
                gamma.min()
            )));
        }
        if !(reaction.min() >= 0.0) || !reaction.is_finite() {
            return Err(Error::Coefficient(format!(
                "diffusion operator is not SPD: reaction must be nonnegative, min is {}",
                reaction.min()
            )));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let (ax, ay) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
        let gm = gamma.values();
        let mut wx = vec![0.0; (nx + 1) * ny];
        for j in 0..ny {
            for i in 0..=nx {
                wx[j * (nx + 1) + i] = if i == 0 {
                    2.0 * gm[j * nx] * ax
                } else if i == nx {
                    2.0 * gm[j * nx + nx - 1] * ax
                } else {
                    harmonic(gm[j * nx + i - 1], gm[j * nx + i]) * ax
                };
            }
        }
        let mut wy = vec![0.0; nx * (ny + 1)];
        for j in 0..=ny {
            for i in 0..nx {
                wy[j * nx + i] = if j == 0 {
                    2.0 * gm[i] * ay
                } else if j == ny {
                    2.0 * gm[(ny - 1) * nx + i] * ay
                } else {
                    harmonic(gm[(j - 1) * nx + i], gm[j * nx + i]) * ay
                };
            }
        }
        let mut diag = reaction.values().to_vec();
        for j in 0..ny {
            for i in 0..nx {
                diag[j * nx + i] += wx[j * (nx + 1) + i]
                    + wx[j * (nx + 1) + i + 1]
                    + wy[j * nx + i]
                    + wy[(j + 1) * nx + i];
            }
        }
        Ok(Self {
            nx,
            ny,
            wx,
            wy,
            reaction: reaction.values().to_vec(),
            diag,
        })
    }

    /// The pure second-order part `A⁰` (no reaction term).
    pub fn pure(grid: &SpatialGrid, gamma: &ScalarField) -> Result<Self> {
        Self::new(grid, gamma, &ScalarField::zeros(grid))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn reaction(&self) -> &[f64] {
        &self.reaction
    }

    /// `y = A x` with homogeneous boundary data.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            for i in 0..nx {
                let c = j * nx + i;
                let mut v = self.diag[c] * x[c];
                if i > 0 {
                    v -= self.wx[j * (nx + 1) + i] * x[c - 1];
                }
                if i + 1 < nx {
                    v -= self.wx[j * (nx + 1) + i + 1] * x[c + 1];
                }
                if j > 0 {
                    v -= self.wy[j * nx + i] * x[c - nx];
                }
                if j + 1 < ny {
                    v -= self.wy[(j + 1) * nx + i] * x[c + nx];
                }
                y[c] = v;
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        y
    }

    /// Contribution of Dirichlet face data to the right-hand side.
    pub fn boundary_rhs(&self, grid: &SpatialGrid, g: &BoundaryTrace) -> Result<Vec<f64>> {
        g.check_grid(grid)?;
        let (nx, ny) = (self.nx, self.ny);
        let mut b = vec![0.0; nx * ny];
        for i in 0..nx {
            b[i] += self.wy[i] * g.get(grid.face_index(Side::Bottom, i));
            b[(ny - 1) * nx + i] += self.wy[ny * nx + i] * g.get(grid.face_index(Side::Top, i));
        }
        for j in 0..ny {
            b[j * nx] += self.wx[j * (nx + 1)] * g.get(grid.face_index(Side::Left, j));
            b[j * nx + nx - 1] += self.wx[j * (nx + 1) + nx] * g.get(grid.face_index(Side::Right, j));
        }
        Ok(b)
    }

    /// `A x − b(g)`: the operator with inhomogeneous Dirichlet data.
    pub fn apply_with_boundary(&self, grid: &SpatialGrid, x: &[f64], g: &BoundaryTrace) -> Result<Vec<f64>> {
        let b = self.boundary_rhs(grid, g)?;
        let mut y = self.apply(x);
        for (y, b) in y.iter_mut().zip(&b) {
            *y -= b;
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final `‖b − Ax‖₂ / ‖b‖₂`.
    pub residual: f64,
    /// `½xᵀAx − bᵀx` after each iteration.
    pub energy: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients to relative tolerance `tol`.
pub fn pcg(
    op: &EllipticOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport)> {
    let n = op.len();
    if b.len() != n {
        return Err(Error::Shape(format!("rhs has {} entries, operator {}", b.len(), n)));
    }
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], CgReport::default()));
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], |x| x.to_vec());
    let mut r = op.apply(&x);
    for (r, b) in r.iter_mut().zip(b) {
        *r = b - *r;
    }
    let inv_diag: Vec<f64> = op.diag.iter().map(|d| 1.0 / d).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut report = CgReport::default();
    let mut rnorm = dot(&r, &r).sqrt();
    while rnorm > tol * bnorm {
        if report.iterations >= max_iter {
            return Err(Error::NotConverged {
                solver: "conjugate gradients",
                iterations: report.iterations,
                residual: rnorm / bnorm,
            });
        }
        op.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Coefficient(format!(
                "diffusion operator is not SPD (pᵀAp = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rnorm = dot(&r, &r).sqrt();
        report.iterations += 1;
        let e = -0.5 * x.iter().zip(r.iter().zip(b)).map(|(x, (r, b))| x * (r + b)).sum::<f64>();
        report.energy.push(e);
    }
    report.residual = rnorm / bnorm;
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_op(seed: u64) -> (SpatialGrid, EllipticOperator) {
        let grid = SpatialGrid::new(7, 5, [0.0, 0.0], [1.0, 0.8], 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = ScalarField::from_fn(&grid, |_, _| rng.random_range(0.5..2.0));
        let reaction = ScalarField::from_fn(&grid, |_, _| rng.random_range(0.0..1.0));
        let op = EllipticOperator::new(&grid, &gamma, &reaction).unwrap();
        (grid, op)
    }

    #[test]
    fn operator_is_symmetric() {
        let (_, op) = random_op(1);
        let n = op.len();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = dot(&op.apply(&x), &y);
        let rhs = dot(&x, &op.apply(&y));
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn constants_see_only_reaction_in_the_interior() {
        let (grid, op) = random_op(2);
        let ones = vec![1.0; op.len()];
        let y = op.apply_with_boundary(&grid, &ones, &BoundaryTrace::constant(&grid, 1.0)).unwrap();
        for (a, r) in y.iter().zip(op.reaction()) {
            assert!((a - r).abs() < 1e-9);
        }
    }

    #[test]
    fn cg_energy_decreases() {
        let (_, op) = random_op(3);
        let b: Vec<f64> = (0..op.len()).map(|i| (i as f64).sin()).collect();
        let (x, rep) = pcg(&op, &b, None, 1e-12, 1000).unwrap();
        assert!(rep.residual <= 1e-12);
        for w in rep.energy.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
        let r: Vec<f64> = op.apply(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(dot(&r, &r).sqrt() <= 1e-11 * dot(&b, &b).sqrt());
    }

    #[test]
    fn rejects_nonpositive_gamma() {
        let grid = SpatialGrid::unit_square(4).unwrap();
        let gamma = ScalarField::constant(&grid, 0.0);
        assert!(EllipticOperator::pure(&grid, &gamma).is_err());
    }
}
