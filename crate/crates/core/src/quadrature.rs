//! Discrete ordinates on the unit circle and scattering kernels.

use crate::error::{Error, Result};
use std::f64::consts::PI;

const UNIT_TOL: f64 = 1e-14;
const KERNEL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    directions: Vec<[f64; 2]>,
    weights: Vec<f64>,
    opposite: Vec<usize>,
}

fn snap(c: f64) -> f64 {
    if c.abs() < 1e-15 {
        0.0
    } else {
        c
    }
}

impl AngularQuadrature {
    /// `n` equally spaced directions `theta_k = 2 pi k / n` with weights `1/n`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::uniform_offset(n, 0.0)
    }

    /// Equally spaced directions rotated by `offset` radians.
    pub fn uniform_offset(n: usize, offset: f64) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::Quadrature(format!(
                "direction count must be even and at least 4, got {n}"
            )));
        }
        let half = n / 2;
        let mut directions = Vec::with_capacity(n);
        for k in 0..half {
            let (s, c) = (offset + 2.0 * PI * k as f64 / n as f64).sin_cos();
            directions.push([snap(c), snap(s)]);
        }
        for k in 0..half {
            let [a, b] = directions[k];
            directions.push([-a, -b]);
        }
        Self::from_parts(directions, vec![1.0 / n as f64; n])
    }

    /// Arbitrary symmetric quadrature. Weights are taken as given and must sum to one.
    pub fn from_parts(directions: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if directions.len() != weights.len() || directions.is_empty() {
            return Err(Error::Quadrature("direction/weight length mismatch".into()));
        }
        for (k, v) in directions.iter().enumerate() {
            if (v[0].hypot(v[1]) - 1.0).abs() > UNIT_TOL {
                return Err(Error::Quadrature(format!("direction {k} is not a unit vector")));
            }
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Quadrature("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > UNIT_TOL {
            return Err(Error::Quadrature(format!("weights sum to {total}, expected 1")));
        }
        let mut opposite = Vec::with_capacity(directions.len());
        for v in &directions {
            let k = directions
                .iter()
                .position(|w| (w[0] + v[0]).abs() < UNIT_TOL && (w[1] + v[1]).abs() < UNIT_TOL)
                .ok_or_else(|| Error::Quadrature("direction set is not closed under v -> -v".into()))?;
            opposite.push(k);
        }
        Ok(Self {
            directions,
            weights,
            opposite,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn direction(&self, k: usize) -> [f64; 2] {
        self.directions[k]
    }

    pub fn directions(&self) -> &[[f64; 2]] {
        &self.directions
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn opposite(&self, k: usize) -> usize {
        self.opposite[k]
    }
}

/// Kernel `theta[k][j] = Θ(v_k, v_j)`, normalized so that both weighted row
/// and column sums equal one.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringKernel {
    n: usize,
    theta: Vec<f64>,
    isotropic: bool,
}

impl ScatteringKernel {
    pub fn isotropic(n: usize) -> Self {
        Self {
            n,
            theta: vec![1.0; n * n],
            isotropic: true,
        }
    }

    pub fn from_matrix(quad: &AngularQuadrature, theta: Vec<f64>) -> Result<Self> {
        let n = quad.len();
        if theta.len() != n * n {
            return Err(Error::Shape(format!(
                "kernel has {} entries, expected {}",
                theta.len(),
                n * n
            )));
        }
        if theta.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Kernel("negative or non-finite entry".into()));
        }
        let kernel = Self {
            n,
            isotropic: theta.iter().all(|t| *t == 1.0),
            theta,
        };
        let (row, col) = kernel.normalization_defect(quad);
        if row > KERNEL_TOL || col > KERNEL_TOL {
            return Err(Error::Kernel(format!(
                "row defect {row:.2e}, column defect {col:.2e}"
            )));
        }
        Ok(kernel)
    }

    /// Henyey-Greenstein-type kernel on the circle,
    /// `(1 - g^2) / (1 + g^2 - 2 g cos(angle))`, rebalanced by Sinkhorn
    /// scaling until both quadrature normalizations hold.
    pub fn henyey_greenstein(quad: &AngularQuadrature, asymmetry: f64) -> Result<Self> {
        if !(asymmetry.abs() < 1.0) {
            return Err(Error::Kernel(format!("asymmetry {asymmetry} must lie in (-1, 1)")));
        }
        let n = quad.len();
        let g = asymmetry;
        let mut theta = vec![0.0; n * n];
        for k in 0..n {
            let vk = quad.direction(k);
            for j in 0..n {
                let vj = quad.direction(j);
                let cos = (vk[0] * vj[0] + vk[1] * vj[1]).clamp(-1.0, 1.0);
                theta[k * n + j] = (1.0 - g * g) / (1.0 + g * g - 2.0 * g * cos);
            }
        }
        let w = quad.weights();
        for _ in 0..10_000 {
            for k in 0..n {
                let s: f64 = (0..n).map(|j| w[j] * theta[k * n + j]).sum();
                theta[k * n..(k + 1) * n].iter_mut().for_each(|t| *t /= s);
            }
            for j in 0..n {
                let s: f64 = (0..n).map(|k| w[k] * theta[k * n + j]).sum();
                (0..n).for_each(|k| theta[k * n + j] /= s);
            }
            let kernel = Self {
                n,
                theta: theta.clone(),
                isotropic: false,
            };
            let (row, col) = kernel.normalization_defect(quad);
            if row.max(col) < 1e-14 {
                return Ok(kernel);
            }
        }
        Err(Error::Kernel("Sinkhorn balancing did not settle".into()))
    }

    /// Largest deviation of weighted row and column sums from one.
    pub fn normalization_defect(&self, quad: &AngularQuadrature) -> (f64, f64) {
        let n = self.n;
        let w = quad.weights();
        let mut row: f64 = 0.0;
        let mut col: f64 = 0.0;
        for k in 0..n {
            let r: f64 = (0..n).map(|j| w[j] * self.theta[k * n + j]).sum();
            let c: f64 = (0..n).map(|j| w[j] * self.theta[j * n + k]).sum();
            row = row.max((r - 1.0).abs());
            col = col.max((c - 1.0).abs());
        }
        (row, col)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_isotropic(&self) -> bool {
        self.isotropic
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.theta[k * self.n + j]
    }
}

/// Quadrature plus kernel: everything the transport solvers need about S¹.
#[derive(Debug, Clone, PartialEq)]
pub struct Angular {
    pub quadrature: AngularQuadrature,
    pub kernel: ScatteringKernel,
}

impl Angular {
    pub fn new(quadrature: AngularQuadrature, kernel: ScatteringKernel) -> Result<Self> {
        if kernel.len() != quadrature.len() {
            return Err(Error::Shape(format!(
                "kernel built for {} directions, quadrature has {}",
                kernel.len(),
                quadrature.len()
            )));
        }
        Ok(Self { quadrature, kernel })
    }

    pub fn isotropic(n: usize) -> Result<Self> {
        Self::new(AngularQuadrature::uniform(n)?, ScatteringKernel::isotropic(n))
    }

    pub fn ndirs(&self) -> usize {
        self.quadrature.len()
    }
}
