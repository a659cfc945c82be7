//! Boundary data: inflow sources on Γ₋ for transport and Dirichlet traces
//! on ∂Ω for diffusion.

use crate::error::{Error, Result};
use crate::grid::{BoundaryFace, SpatialGrid};
use crate::quadrature::AngularQuadrature;

/// Inflow values indexed by (boundary face, direction), stored
/// direction-major. Pairs with `ν·v ≥ 0` are not on Γ₋ and hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySource {
    nfaces: usize,
    nv: usize,
    values: Vec<f64>,
    /// `dξ = |ν·v| · face length · w_k` on Γ₋, zero elsewhere.
    weights: Vec<f64>,
}

fn inflow_weight(face: &BoundaryFace, v: [f64; 2], w: f64) -> f64 {
    let nv = face.normal[0] * v[0] + face.normal[1] * v[1];
    if nv < 0.0 {
        -nv * face.length * w
    } else {
        0.0
    }
}

impl BoundarySource {
    /// Evaluates `f(point, v)` at the centre of every inflow face.
    pub fn from_fn(
        grid: &SpatialGrid,
        quad: &AngularQuadrature,
        f: impl Fn([f64; 2], [f64; 2]) -> f64,
    ) -> Self {
        let faces = grid.boundary_faces();
        let nfaces = faces.len();
        let nv = quad.len();
        let mut values = vec![0.0; nfaces * nv];
        let mut weights = vec![0.0; nfaces * nv];
        for k in 0..nv {
            let v = quad.direction(k);
            for (fi, face) in faces.iter().enumerate() {
                let w = inflow_weight(face, v, quad.weight(k));
                if w > 0.0 {
                    weights[k * nfaces + fi] = w;
                    values[k * nfaces + fi] = f(face.center, v);
                }
            }
        }
        Self {
            nfaces,
            nv,
            values,
            weights,
        }
    }

    pub fn constant(grid: &SpatialGrid, quad: &AngularQuadrature, value: f64) -> Self {
        Self::from_fn(grid, quad, |_, _| value)
    }

    pub fn zeros(grid: &SpatialGrid, quad: &AngularQuadrature) -> Self {
        Self::constant(grid, quad, 0.0)
    }

    /// Builds a source from raw values in storage order; entries off Γ₋ must be zero.
    pub fn from_values(grid: &SpatialGrid, quad: &AngularQuadrature, values: Vec<f64>) -> Result<Self> {
        let mut src = Self::zeros(grid, quad);
        if values.len() != src.values.len() {
            return Err(Error::Shape(format!(
                "boundary source has {} values, expected {} faces x {} directions",
                values.len(),
                src.nfaces,
                src.nv
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if src.weights[i] == 0.0 && *v != 0.0 {
                return Err(Error::Shape(format!(
                    "value {v} given at outflow pair (face {}, direction {})",
                    i % src.nfaces,
                    i / src.nfaces
                )));
            }
            if !v.is_finite() {
                return Err(Error::Shape(format!("non-finite boundary value {v}")));
            }
        }
        src.values = values;
        Ok(src)
    }

    pub fn nfaces(&self) -> usize {
        self.nfaces
    }

    pub fn ndirs(&self) -> usize {
        self.nv
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, face: usize, k: usize) -> f64 {
        self.values[k * self.nfaces + face]
    }

    #[inline]
    pub fn is_inflow(&self, face: usize, k: usize) -> bool {
        self.weights[k * self.nfaces + face] > 0.0
    }

    /// `(face, direction)` pairs on the discrete Γ₋.
    pub fn inflow_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.nv).flat_map(move |k| {
            (0..self.nfaces).filter_map(move |f| self.is_inflow(f, k).then_some((f, k)))
        })
    }

    pub fn check_shape(&self, grid: &SpatialGrid, nv: usize) -> Result<()> {
        if self.nfaces != grid.n_boundary_faces() || self.nv != nv {
            return Err(Error::Shape(format!(
                "boundary source is {} faces x {} directions, expected {} x {}",
                self.nfaces,
                self.nv,
                grid.n_boundary_faces(),
                nv
            )));
        }
        Ok(())
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `‖g‖_{L∞_{dξ}(Γ₋)}`: largest magnitude over pairs of positive measure.
    pub fn sup_norm(&self) -> f64 {
        self.inflow_pairs()
            .map(|(f, k)| self.get(f, k).abs())
            .fold(0.0, f64::max)
    }

    /// Infimum of g over the discrete Γ₋.
    pub fn inf(&self) -> f64 {
        self.inflow_pairs()
            .map(|(f, k)| self.get(f, k))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Dirichlet values on each boundary face, in the grid's face order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn from_fn(grid: &SpatialGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            values: grid.boundary_faces().iter().map(|face| f(face.center)).collect(),
        }
    }

    pub fn constant(grid: &SpatialGrid, value: f64) -> Self {
        Self {
            values: vec![value; grid.n_boundary_faces()],
        }
    }

    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_values(grid: &SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_boundary_faces() {
            return Err(Error::Shape(format!(
                "trace has {} values, grid has {} boundary faces",
                values.len(),
                grid.n_boundary_faces()
            )));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, face: usize) -> f64 {
        self.values[face]
    }

    pub fn check_grid(&self, grid: &SpatialGrid) -> Result<()> {
        if self.values.len() != grid.n_boundary_faces() {
            return Err(Error::Shape(format!(
                "trace has {} values, grid has {} boundary faces",
                self.values.len(),
                grid.n_boundary_faces()
            )));
        }
        Ok(())
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}
