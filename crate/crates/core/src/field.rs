//! Grid functions over Ω and over the phase space Ω × S¹.

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::quadrature::{Angular, AngularQuadrature};

/// Cell-centred values, row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &SpatialGrid, data: Vec<f64>) -> Result<Self> {
        Self::from_shape(grid.nx(), grid.ny(), data)
    }

    pub fn from_shape(nx: usize, ny: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny {
            return Err(Error::Shape(format!(
                "scalar field has {} values, grid has {} cells",
                data.len(),
                nx * ny
            )));
        }
        Ok(Self { nx, ny, data })
    }

    pub fn constant(grid: &SpatialGrid, value: f64) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            data: vec![value; grid.ncells()],
        }
    }

    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at cell centres.
    pub fn from_fn(grid: &SpatialGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.ncells());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let [x, y] = grid.center(i, j);
                data.push(f(x, y));
            }
        }
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            data,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx + i]
    }

    pub fn check_grid(&self, grid: &SpatialGrid) -> Result<()> {
        if self.nx != grid.nx() || self.ny != grid.ny() {
            return Err(Error::Shape(format!(
                "field is {}x{}, grid is {}x{}",
                self.nx,
                self.ny,
                grid.nx(),
                grid.ny()
            )));
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &ScalarField) -> Result<()> {
        if self.nx != other.nx || self.ny != other.ny {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.nx, self.ny, other.nx, other.ny
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination; panics on shape mismatch, so callers check first.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.data.len(), other.data.len(), "scalar field shape mismatch");
        Self {
            nx: self.nx,
            ny: self.ny,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_identically_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Angularly resolved values `u(x_cell, v_k)`, stored direction-major: all
/// cells of direction 0, then direction 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    nx: usize,
    ny: usize,
    nv: usize,
    data: Vec<f64>,
}

impl PhaseField {
    pub fn new(grid: &SpatialGrid, nv: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_shape(grid.nx(), grid.ny(), nv, data)
    }

    pub fn from_shape(nx: usize, ny: usize, nv: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny * nv {
            return Err(Error::Shape(format!(
                "phase field has {} values, expected {} cells x {} directions",
                data.len(),
                nx * ny,
                nv
            )));
        }
        Ok(Self { nx, ny, nv, data })
    }

    pub fn constant(grid: &SpatialGrid, nv: usize, value: f64) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            nv,
            data: vec![value; grid.ncells() * nv],
        }
    }

    pub fn zeros(grid: &SpatialGrid, nv: usize) -> Self {
        Self::constant(grid, nv, 0.0)
    }

    /// Samples `f(x, y, v)` at cell centres and quadrature directions.
    pub fn from_fn(
        grid: &SpatialGrid,
        quad: &AngularQuadrature,
        mut f: impl FnMut(f64, f64, [f64; 2]) -> f64,
    ) -> Self {
        let nv = quad.len();
        let mut data = Vec::with_capacity(grid.ncells() * nv);
        for k in 0..nv {
            let v = quad.direction(k);
            for j in 0..grid.ny() {
                for i in 0..grid.nx() {
                    let [x, y] = grid.center(i, j);
                    data.push(f(x, y, v));
                }
            }
        }
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            nv,
            data,
        }
    }

    /// Same value in every direction.
    pub fn broadcast(s: &ScalarField, nv: usize) -> Self {
        let mut data = Vec::with_capacity(s.len() * nv);
        for _ in 0..nv {
            data.extend_from_slice(s.values());
        }
        Self {
            nx: s.nx(),
            ny: s.ny(),
            nv,
            data,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn ncells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn ndirs(&self) -> usize {
        self.nv
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, cell: usize, k: usize) -> f64 {
        self.data[k * self.nx * self.ny + cell]
    }

    #[inline]
    pub fn set(&mut self, cell: usize, k: usize, value: f64) {
        let n = self.nx * self.ny;
        self.data[k * n + cell] = value;
    }

    /// All cells for direction `k`.
    pub fn block(&self, k: usize) -> &[f64] {
        let n = self.nx * self.ny;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn block_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.nx * self.ny;
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn check_shape(&self, grid: &SpatialGrid, nv: usize) -> Result<()> {
        if self.nx != grid.nx() || self.ny != grid.ny() || self.nv != nv {
            return Err(Error::Shape(format!(
                "phase field is {}x{}x{}, expected {}x{}x{}",
                self.nx,
                self.ny,
                self.nv,
                grid.nx(),
                grid.ny(),
                nv
            )));
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &PhaseField) -> Result<()> {
        if (self.nx, self.ny, self.nv) != (other.nx, other.ny, other.nv) {
            return Err(Error::Shape(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.nx, self.ny, self.nv, other.nx, other.ny, other.nv
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            nv: self.nv,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &PhaseField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.data.len(), other.data.len(), "phase field shape mismatch");
        Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            nx: self.nx,
            ny: self.ny,
            nv: self.nv,
        }
    }

    /// Multiplies every direction block by a scalar field.
    pub fn mul_scalar(&self, s: &ScalarField) -> Self {
        let n = self.ncells();
        assert_eq!(s.len(), n, "scalar field shape mismatch");
        let mut out = self.clone();
        for chunk in out.data.chunks_mut(n) {
            for (v, w) in chunk.iter_mut().zip(s.values()) {
                *v *= w;
            }
        }
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `⟨u⟩(x) = Σ_k w_k u(x, v_k)`.
pub fn velocity_average(u: &PhaseField, quad: &AngularQuadrature) -> Result<ScalarField> {
    if u.ndirs() != quad.len() {
        return Err(Error::Shape(format!(
            "phase field has {} directions, quadrature has {}",
            u.ndirs(),
            quad.len()
        )));
    }
    let n = u.ncells();
    let mut avg = vec![0.0; n];
    for k in 0..quad.len() {
        let w = quad.weight(k);
        for (a, v) in avg.iter_mut().zip(u.block(k)) {
            *a += w * v;
        }
    }
    ScalarField::from_shape(u.nx(), u.ny(), avg)
}

/// In-scattered part `Σ_j w_j Θ(v_k, v_j) u(x, v_j)`.
pub fn in_scatter(u: &PhaseField, angular: &Angular) -> Result<PhaseField> {
    let quad = &angular.quadrature;
    let kernel = &angular.kernel;
    if kernel.is_isotropic() {
        let avg = velocity_average(u, quad)?;
        return Ok(PhaseField::broadcast(&avg, quad.len()));
    }
    if u.ndirs() != quad.len() {
        return Err(Error::Shape(format!(
            "phase field has {} directions, quadrature has {}",
            u.ndirs(),
            quad.len()
        )));
    }
    let nv = quad.len();
    let mut out = PhaseField::from_shape(u.nx(), u.ny(), nv, vec![0.0; u.values().len()])?;
    for k in 0..nv {
        let dst = out.block_mut(k);
        for j in 0..nv {
            let c = quad.weight(j) * kernel.get(k, j);
            if c == 0.0 {
                continue;
            }
            for (d, s) in dst.iter_mut().zip(u.block(j)) {
                *d += c * s;
            }
        }
    }
    Ok(out)
}

/// Weighted column sums `Σ_j w_j Θ(v_j, v_k)`; equal to one up to the
/// kernel normalization tolerance.
pub fn out_scatter_rates(angular: &Angular) -> Vec<f64> {
    let quad = &angular.quadrature;
    let nv = quad.len();
    (0..nv)
        .map(|k| {
            if angular.kernel.is_isotropic() {
                1.0
            } else {
                (0..nv).map(|j| quad.weight(j) * angular.kernel.get(j, k)).sum()
            }
        })
        .collect()
}

/// Discrete scattering operator `K(u)_k = Σ_j w_j Θ_kj u_j − u_k Σ_j w_j Θ_jk`.
pub fn apply_scattering(u: &PhaseField, angular: &Angular) -> Result<PhaseField> {
    let mut out = in_scatter(u, angular)?;
    let rates = out_scatter_rates(angular);
    for (k, rate) in rates.iter().enumerate() {
        let src = u.block(k);
        for (o, s) in out.block_mut(k).iter_mut().zip(src) {
            *o -= rate * s;
        }
    }
    Ok(out)
}
