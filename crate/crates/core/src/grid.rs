//! Cell-centred rectangular grids and their boundary faces.
//!
//! Cells are indexed `j * nx + i` with `i` running along x. Boundary faces
//! are enumerated side by side: bottom (`i = 0..nx`), right (`j = 0..ny`),
//! top (`i = 0..nx`), left (`j = 0..ny`).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub side: Side,
    /// Cell adjacent to the face.
    pub cell: usize,
    pub center: [f64; 2],
    pub normal: [f64; 2],
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    extent: [f64; 2],
    hx: f64,
    hy: f64,
    boundary_layer_delta: f64,
}

impl SpatialGrid {
    pub fn new(
        nx: usize,
        ny: usize,
        origin: [f64; 2],
        extent: [f64; 2],
        boundary_layer_delta: f64,
    ) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::Grid(format!(
                "need at least 3 cells per direction, got {nx} x {ny}"
            )));
        }
        if !(extent[0] > 0.0 && extent[1] > 0.0) || !extent.iter().all(|e| e.is_finite()) {
            return Err(Error::Grid(format!("extent must be positive, got {extent:?}")));
        }
        if !origin.iter().all(|o| o.is_finite()) {
            return Err(Error::Grid(format!("origin must be finite, got {origin:?}")));
        }
        let half_min = 0.5 * extent[0].min(extent[1]);
        if !(boundary_layer_delta >= 0.0 && boundary_layer_delta < half_min) {
            return Err(Error::Grid(format!(
                "boundary layer width {boundary_layer_delta} must lie in [0, {half_min})"
            )));
        }
        Ok(Self {
            nx,
            ny,
            origin,
            extent,
            hx: extent[0] / nx as f64,
            hy: extent[1] / ny as f64,
            boundary_layer_delta,
        })
    }

    /// `n x n` cells on `[0, 1]^2` with no known boundary layer.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, [0.0, 0.0], [1.0, 1.0], 0.0)
    }

    pub fn with_boundary_layer(mut self, delta: f64) -> Result<Self> {
        let half_min = 0.5 * self.extent[0].min(self.extent[1]);
        if !(delta >= 0.0 && delta < half_min) {
            return Err(Error::Grid(format!(
                "boundary layer width {delta} must lie in [0, {half_min})"
            )));
        }
        self.boundary_layer_delta = delta;
        Ok(self)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }
    pub fn extent(&self) -> [f64; 2] {
        self.extent
    }
    pub fn boundary_layer_delta(&self) -> f64 {
        self.boundary_layer_delta
    }

    pub fn ncells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn area(&self) -> f64 {
        self.extent[0] * self.extent[1]
    }

    /// Largest cell width.
    pub fn h(&self) -> f64 {
        self.hx.max(self.hy)
    }

    pub fn diameter(&self) -> f64 {
        self.extent[0].hypot(self.extent[1])
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.hx,
            self.origin[1] + (j as f64 + 0.5) * self.hy,
        ]
    }

    pub fn upper(&self) -> [f64; 2] {
        [
            self.origin[0] + self.extent[0],
            self.origin[1] + self.extent[1],
        ]
    }

    fn slack(&self) -> f64 {
        1e-12 * self.extent[0].max(self.extent[1])
    }

    /// Closed-domain membership with a relative rounding allowance.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let up = self.upper();
        let s = self.slack();
        p[0] >= self.origin[0] - s && p[0] <= up[0] + s && p[1] >= self.origin[1] - s && p[1] <= up[1] + s
    }

    /// Distance from a point to the nearest side of the rectangle.
    pub fn distance_to_boundary(&self, p: [f64; 2]) -> f64 {
        let up = self.upper();
        (p[0] - self.origin[0])
            .min(up[0] - p[0])
            .min(p[1] - self.origin[1])
            .min(up[1] - p[1])
    }

    /// Cells whose centre lies strictly within `boundary_layer_delta` of the boundary.
    pub fn boundary_layer_mask(&self) -> Vec<bool> {
        let delta = self.boundary_layer_delta;
        (0..self.ncells())
            .map(|c| {
                let (i, j) = self.coords(c);
                self.distance_to_boundary(self.center(i, j)) < delta
            })
            .collect()
    }

    pub fn n_boundary_faces(&self) -> usize {
        2 * (self.nx + self.ny)
    }

    pub fn face_index(&self, side: Side, along: usize) -> usize {
        match side {
            Side::Bottom => along,
            Side::Right => self.nx + along,
            Side::Top => self.nx + self.ny + along,
            Side::Left => 2 * self.nx + self.ny + along,
        }
    }

    pub fn boundary_face(&self, face: usize) -> BoundaryFace {
        let (nx, ny) = (self.nx, self.ny);
        let up = self.upper();
        let (side, along) = if face < nx {
            (Side::Bottom, face)
        } else if face < nx + ny {
            (Side::Right, face - nx)
        } else if face < 2 * nx + ny {
            (Side::Top, face - nx - ny)
        } else {
            (Side::Left, face - 2 * nx - ny)
        };
        let (cell, center, length) = match side {
            Side::Bottom => (
                self.index(along, 0),
                [self.center(along, 0)[0], self.origin[1]],
                self.hx,
            ),
            Side::Top => (
                self.index(along, ny - 1),
                [self.center(along, 0)[0], up[1]],
                self.hx,
            ),
            Side::Left => (
                self.index(0, along),
                [self.origin[0], self.center(0, along)[1]],
                self.hy,
            ),
            Side::Right => (
                self.index(nx - 1, along),
                [up[0], self.center(0, along)[1]],
                self.hy,
            ),
        };
        BoundaryFace {
            side,
            cell,
            center,
            normal: side.outward_normal(),
            length,
        }
    }

    pub fn boundary_faces(&self) -> Vec<BoundaryFace> {
        (0..self.n_boundary_faces())
            .map(|f| self.boundary_face(f))
            .collect()
    }

    /// Boundary face containing a point on the boundary. At corners the
    /// lower face index wins.
    pub fn face_at(&self, p: [f64; 2]) -> Result<usize> {
        let up = self.upper();
        let s = self.slack();
        let ix = (((p[0] - self.origin[0]) / self.hx).floor().max(0.0) as usize).min(self.nx - 1);
        let jy = (((p[1] - self.origin[1]) / self.hy).floor().max(0.0) as usize).min(self.ny - 1);
        if !self.contains(p) {
            return Err(Error::OutsideDomain { x: p[0], y: p[1] });
        }
        let candidates = [
            ((p[1] - self.origin[1]).abs() <= s, self.face_index(Side::Bottom, ix)),
            ((p[0] - up[0]).abs() <= s, self.face_index(Side::Right, jy)),
            ((p[1] - up[1]).abs() <= s, self.face_index(Side::Top, ix)),
            ((p[0] - self.origin[0]).abs() <= s, self.face_index(Side::Left, jy)),
        ];
        candidates
            .iter()
            .filter(|(on, _)| *on)
            .map(|&(_, f)| f)
            .min()
            .ok_or(Error::OutsideDomain { x: p[0], y: p[1] })
    }

    /// All boundary faces whose closure contains `p`, in increasing index order.
    pub fn faces_at(&self, p: [f64; 2]) -> Vec<usize> {
        if !self.contains(p) {
            return Vec::new();
        }
        let up = self.upper();
        let s = self.slack();
        let fx = (p[0] - self.origin[0]) / self.hx;
        let fy = (p[1] - self.origin[1]) / self.hy;
        // indices of the faces touching p along each side, two at a face end
        let along = |t: f64, n: usize| -> Vec<usize> {
            let tol = 1e-9;
            let r = t.round();
            if (t - r).abs() <= tol {
                let r = r as i64;
                [r - 1, r]
                    .into_iter()
                    .filter(|&a| a >= 0 && (a as usize) < n)
                    .map(|a| a as usize)
                    .collect()
            } else {
                vec![(t.floor().max(0.0) as usize).min(n - 1)]
            }
        };
        let mut out = Vec::new();
        if (p[1] - self.origin[1]).abs() <= s {
            out.extend(along(fx, self.nx).into_iter().map(|i| self.face_index(Side::Bottom, i)));
        }
        if (p[0] - up[0]).abs() <= s {
            out.extend(along(fy, self.ny).into_iter().map(|j| self.face_index(Side::Right, j)));
        }
        if (p[1] - up[1]).abs() <= s {
            out.extend(along(fx, self.nx).into_iter().map(|i| self.face_index(Side::Top, i)));
        }
        if (p[0] - self.origin[0]).abs() <= s {
            out.extend(along(fy, self.ny).into_iter().map(|j| self.face_index(Side::Left, j)));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Backward exit distance: how far one travels along `-v` from `p`
    /// before leaving the rectangle.
    pub fn boundary_distance(&self, p: [f64; 2], v: [f64; 2]) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutsideDomain { x: p[0], y: p[1] });
        }
        let up = self.upper();
        let axis = |x: f64, lo: f64, hi: f64, vc: f64| -> f64 {
            if vc > 0.0 {
                ((x - lo) / vc).max(0.0)
            } else if vc < 0.0 {
                ((x - hi) / vc).max(0.0)
            } else {
                f64::INFINITY
            }
        };
        let tx = axis(p[0], self.origin[0], up[0], v[0]);
        let ty = axis(p[1], self.origin[1], up[1], v[1]);
        let t = tx.min(ty);
        if t.is_finite() {
            Ok(t)
        } else {
            Err(Error::Grid(format!("degenerate direction {v:?}")))
        }
    }
}

/// Free-function form of [`SpatialGrid::boundary_distance`].
pub fn boundary_distance(p: [f64; 2], v: [f64; 2], grid: &SpatialGrid) -> Result<f64> {
    grid.boundary_distance(p, v)
}
