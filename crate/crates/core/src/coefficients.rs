//! Optical coefficient fields and the standing bound assumptions.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::SpatialGrid;

/// Values of σ_a and σ_s declared known on the boundary layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownLayer {
    pub sigma_a: f64,
    pub sigma_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub grid: SpatialGrid,
    pub xi: ScalarField,
    pub sigma_a: ScalarField,
    pub sigma_b: ScalarField,
    pub sigma_s: ScalarField,
    pub gamma: ScalarField,
    /// Lower bound `c0`.
    pub lower: f64,
    /// Upper bound `C0`.
    pub upper: f64,
    pub known_layer: Option<KnownLayer>,
}

/// Constants derived from a validated coefficient set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientCertificate {
    pub c0: f64,
    pub c0_upper: f64,
    /// `ν = inf σ_a / (σ_a + σ_s)`.
    pub nu: f64,
    /// `σ̄ = sup (σ_a + σ_s)`.
    pub sigma_bar: f64,
    /// `C₂ = 1 / (ν c0)`.
    pub c2: f64,
}

impl CoefficientSet {
    /// Spatially constant coefficients with bounds `[lower, upper]`.
    #[allow(clippy::too_many_arguments)]
    pub fn constant(
        grid: &SpatialGrid,
        xi: f64,
        sigma_a: f64,
        sigma_b: f64,
        sigma_s: f64,
        gamma: f64,
        lower: f64,
        upper: f64,
    ) -> Self {
        Self {
            grid: grid.clone(),
            xi: ScalarField::constant(grid, xi),
            sigma_a: ScalarField::constant(grid, sigma_a),
            sigma_b: ScalarField::constant(grid, sigma_b),
            sigma_s: ScalarField::constant(grid, sigma_s),
            gamma: ScalarField::constant(grid, gamma),
            lower,
            upper,
            known_layer: None,
        }
    }

    pub fn with_xi(mut self, f: ScalarField) -> Self {
        self.xi = f;
        self
    }

    pub fn with_sigma_a(mut self, f: ScalarField) -> Self {
        self.sigma_a = f;
        self
    }

    pub fn with_sigma_b(mut self, f: ScalarField) -> Self {
        self.sigma_b = f;
        self
    }

    pub fn with_sigma_s(mut self, f: ScalarField) -> Self {
        self.sigma_s = f;
        self
    }

    pub fn with_gamma(mut self, f: ScalarField) -> Self {
        self.gamma = f;
        self
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn with_known_layer(mut self, layer: Option<KnownLayer>) -> Self {
        self.known_layer = layer;
        self
    }

    pub fn ncells(&self) -> usize {
        self.grid.ncells()
    }

    fn fields(&self) -> [(&'static str, &ScalarField); 5] {
        [
            ("xi", &self.xi),
            ("sigma_a", &self.sigma_a),
            ("sigma_b", &self.sigma_b),
            ("sigma_s", &self.sigma_s),
            ("gamma", &self.gamma),
        ]
    }

    fn check_shapes(&self) -> Result<()> {
        for (name, f) in self.fields() {
            f.check_grid(&self.grid)
                .map_err(|e| Error::Shape(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    /// Minimal requirements for the forward solvers: finite fields,
    /// σ_a and γ positive, σ_s and σ_b nonnegative.
    pub fn check_solvable(&self) -> Result<()> {
        self.check_shapes()?;
        for (name, f) in self.fields() {
            if !f.is_finite() {
                return Err(Error::Coefficient(format!("{name} has non-finite values")));
            }
        }
        if !(self.sigma_a.min() > 0.0) {
            return Err(Error::Coefficient(format!(
                "sigma_a must be positive, min is {}",
                self.sigma_a.min()
            )));
        }
        if !(self.gamma.min() > 0.0) {
            return Err(Error::Coefficient(format!(
                "gamma must be positive, min is {}",
                self.gamma.min()
            )));
        }
        for (name, f) in [("sigma_s", &self.sigma_s), ("sigma_b", &self.sigma_b)] {
            if !(f.min() >= 0.0) {
                return Err(Error::Coefficient(format!(
                    "{name} must be nonnegative, min is {}",
                    f.min()
                )));
            }
        }
        Ok(())
    }

    /// `σ̄ = max (σ_a + σ_s)`.
    pub fn sigma_bar(&self) -> f64 {
        self.sigma_a
            .values()
            .iter()
            .zip(self.sigma_s.values())
            .map(|(a, s)| a + s)
            .fold(0.0, f64::max)
    }

    /// `ν = min σ_a / (σ_a + σ_s)`.
    pub fn nu(&self) -> f64 {
        self.sigma_a
            .values()
            .iter()
            .zip(self.sigma_s.values())
            .map(|(a, s)| a / (a + s))
            .fold(f64::INFINITY, f64::min)
    }

    /// `C₂ = 1 / (ν c0)`.
    pub fn c2(&self) -> f64 {
        1.0 / (self.nu() * self.lower)
    }
}

/// Checks the bound assumptions and the boundary-layer declaration and
/// returns the derived constants. σ_s and σ_b may also be identically zero
/// (the non-scattering and purely linear special cases).
pub fn validate_coefficients(c: &CoefficientSet) -> Result<CoefficientCertificate> {
    c.check_shapes()?;
    let (lo, hi) = (c.lower, c.upper);
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::Coefficient(format!(
            "bounds must satisfy 0 < c0 <= C0, got c0 = {lo}, C0 = {hi}"
        )));
    }
    let in_bounds = |name: &str, f: &ScalarField| -> Result<()> {
        let (min, max) = (f.min(), f.max());
        if !(min >= lo && max <= hi) {
            return Err(Error::Coefficient(format!(
                "{name} ranges over [{min}, {max}], outside [{lo}, {hi}]"
            )));
        }
        Ok(())
    };
    in_bounds("xi", &c.xi)?;
    in_bounds("sigma_a", &c.sigma_a)?;
    in_bounds("gamma", &c.gamma)?;
    for (name, f) in [("sigma_s", &c.sigma_s), ("sigma_b", &c.sigma_b)] {
        if !f.is_identically_zero() {
            in_bounds(name, f)?;
        }
    }
    if let Some(layer) = c.known_layer {
        let mask = c.grid.boundary_layer_mask();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        for (cell, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
            let (sa, ss) = (c.sigma_a.values()[cell], c.sigma_s.values()[cell]);
            if !close(sa, layer.sigma_a) || !close(ss, layer.sigma_s) {
                let (i, j) = c.grid.coords(cell);
                return Err(Error::Coefficient(format!(
                    "cell ({i}, {j}) lies in the known boundary layer but has sigma_a = {sa}, sigma_s = {ss} (declared {}, {})",
                    layer.sigma_a, layer.sigma_s
                )));
            }
        }
    }
    let nu = c.nu();
    Ok(CoefficientCertificate {
        c0: lo,
        c0_upper: hi,
        nu,
        sigma_bar: c.sigma_bar(),
        c2: 1.0 / (nu * lo),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SpatialGrid {
        SpatialGrid::unit_square(6).unwrap()
    }

    #[test]
    fn equal_absorption_and_scattering() {
        let c = CoefficientSet::constant(&grid(), 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let cert = validate_coefficients(&c).unwrap();
        assert_eq!(cert.nu, 0.5);
        assert_eq!(cert.c2, 2.0);
    }

    #[test]
    fn weak_absorption_constants() {
        let c = CoefficientSet::constant(&grid(), 0.5, 0.1, 0.0, 0.9, 0.5, 0.1, 1.0);
        let cert = validate_coefficients(&c).unwrap();
        assert!((cert.nu - 0.1).abs() < 1e-15);
        assert_eq!(cert.sigma_bar, 1.0);
    }

    #[test]
    fn zero_absorption_is_rejected() {
        let g = grid();
        let mut sa = ScalarField::constant(&g, 1.0);
        sa.values_mut()[7] = 0.0;
        let c = CoefficientSet::constant(&g, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 2.0).with_sigma_a(sa);
        assert!(matches!(validate_coefficients(&c), Err(Error::Coefficient(_))));
        assert!(c.check_solvable().is_err());
    }

    #[test]
    fn boundary_layer_consistency() {
        let g = grid().with_boundary_layer(0.2).unwrap();
        let layer = Some(KnownLayer {
            sigma_a: 1.0,
            sigma_s: 1.0,
        });
        let ok = CoefficientSet::constant(&g, 1.0, 1.0, 0.0, 1.0, 1.0, 0.5, 2.0).with_known_layer(layer);
        assert!(validate_coefficients(&ok).is_ok());
        let mut sa = ScalarField::constant(&g, 1.0);
        sa.values_mut()[0] = 1.5;
        let bad = ok.clone().with_sigma_a(sa);
        assert!(validate_coefficients(&bad).is_err());
    }
}
