//! Photoacoustic internal data `H = Ξ(σ_a ⟨u⟩ + σ_b ⟨u⟩²)` and its first and
//! second linearizations, plus finite samplings of the data maps.

use crate::boundary::{BoundarySource, BoundaryTrace};
use crate::coefficients::CoefficientSet;
use crate::diffusion::{solve_semilinear_diffusion, DiffusionPicardOptions};
use crate::error::{Error, Result};
use crate::field::{velocity_average, PhaseField, ScalarField};
use crate::grid::SpatialGrid;
use crate::linearization::{
    linearize_diffusion, linearize_transport, DiffusionBundle, LinearizationBundle, Regime,
    TransportBundle,
};
use crate::quadrature::{Angular, AngularQuadrature};
use crate::transport::{solve_semilinear_rte, PicardOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct InternalData {
    /// Full nonlinear data, when a forward solve was run.
    pub h: Option<ScalarField>,
    pub h1: ScalarField,
    pub h2: ScalarField,
    pub regime: Regime,
    pub source_id: usize,
}

/// `Ξ(σ_a a + σ_b a²)` for a scalar density `a`.
fn absorbed(c: &CoefficientSet, a: &ScalarField) -> Result<ScalarField> {
    a.check_grid(&c.grid)?;
    let mut out = a.clone();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let u = *v;
        *v = c.xi.values()[i] * (c.sigma_a.values()[i] * u + c.sigma_b.values()[i] * u * u);
    }
    Ok(out)
}

/// `H_T = Ξ(σ_a⟨u⟩ + σ_b⟨u⟩²)`.
pub fn internal_data_transport(
    c: &CoefficientSet,
    quad: &AngularQuadrature,
    u: &PhaseField,
) -> Result<ScalarField> {
    u.check_shape(&c.grid, quad.len())?;
    absorbed(c, &velocity_average(u, quad)?)
}

/// `H_D = Ξ(σ_a u + σ_b u²)`.
pub fn internal_data_diffusion(c: &CoefficientSet, u: &ScalarField) -> Result<ScalarField> {
    absorbed(c, u)
}

/// `h1 = Ξσ_a a1`, `h2 = Ξ(σ_a a2 + 2σ_b a1²)` from scalar densities.
fn linearized_from(c: &CoefficientSet, a1: &ScalarField, a2: &ScalarField) -> (ScalarField, ScalarField) {
    let n = c.ncells();
    let (xi, sa, sb) = (c.xi.values(), c.sigma_a.values(), c.sigma_b.values());
    let mut h1 = a1.clone();
    let mut h2 = a2.clone();
    for i in 0..n {
        let (p, q) = (a1.values()[i], a2.values()[i]);
        h1.values_mut()[i] = xi[i] * sa[i] * p;
        h2.values_mut()[i] = xi[i] * (sa[i] * q + 2.0 * sb[i] * p * p);
    }
    (h1, h2)
}

pub fn linearized_data_transport(
    c: &CoefficientSet,
    quad: &AngularQuadrature,
    bundle: &TransportBundle,
) -> Result<InternalData> {
    bundle.u1.check_shape(&c.grid, quad.len())?;
    bundle.u2.check_shape(&c.grid, quad.len())?;
    let a1 = velocity_average(&bundle.u1, quad)?;
    let a2 = velocity_average(&bundle.u2, quad)?;
    let (h1, h2) = linearized_from(c, &a1, &a2);
    Ok(InternalData {
        h: None,
        h1,
        h2,
        regime: Regime::Transport,
        source_id: 0,
    })
}

pub fn linearized_data_diffusion(c: &CoefficientSet, bundle: &DiffusionBundle) -> Result<InternalData> {
    bundle.u1.check_grid(&c.grid)?;
    bundle.u2.check_grid(&c.grid)?;
    let (h1, h2) = linearized_from(c, &bundle.u1, &bundle.u2);
    Ok(InternalData {
        h: None,
        h1,
        h2,
        regime: Regime::Diffusion,
        source_id: 0,
    })
}

/// Dispatches on the bundle regime. Transport bundles need the quadrature.
pub fn linearized_data(
    c: &CoefficientSet,
    quad: Option<&AngularQuadrature>,
    bundle: &LinearizationBundle,
) -> Result<InternalData> {
    match bundle {
        LinearizationBundle::Transport(b) => match quad {
            Some(q) => linearized_data_transport(c, q, b),
            None => Err(Error::Precondition(
                "transport data need the angular quadrature".into(),
            )),
        },
        LinearizationBundle::Diffusion(b) => linearized_data_diffusion(c, b),
    }
}

/// Full and linearized data for each transport source. Failures are
/// reported per source.
pub fn sample_transport_data(
    c: &CoefficientSet,
    angular: &Angular,
    sources: &[BoundarySource],
    opts: &PicardOptions,
) -> Vec<Result<InternalData>> {
    sources
        .par_iter()
        .enumerate()
        .map(|(id, g)| {
            let u = solve_semilinear_rte(c, angular, g, opts)?.u;
            let h = internal_data_transport(c, &angular.quadrature, &u)?;
            let bundle = linearize_transport(c, angular, g, &opts.inner)?;
            let mut data = linearized_data_transport(c, &angular.quadrature, &bundle)?;
            data.h = Some(h);
            data.source_id = id;
            Ok(data)
        })
        .collect()
}

pub fn sample_diffusion_data(
    c: &CoefficientSet,
    sources: &[BoundaryTrace],
    opts: &DiffusionPicardOptions,
) -> Vec<Result<InternalData>> {
    sources
        .par_iter()
        .enumerate()
        .map(|(id, g)| {
            let u = solve_semilinear_diffusion(c, g, opts)?.u;
            let h = internal_data_diffusion(c, &u)?;
            let bundle = linearize_diffusion(c, g, &opts.inner)?;
            let mut data = linearized_data_diffusion(c, &bundle)?;
            data.h = Some(h);
            data.source_id = id;
            Ok(data)
        })
        .collect()
}

/// Adds i.i.d. `N(0, std²)` noise, reproducible from `seed`.
pub fn add_gaussian_noise(f: &ScalarField, std: f64, seed: u64) -> Result<ScalarField> {
    let normal = Normal::new(0.0, std)
        .map_err(|e| Error::Precondition(format!("invalid noise level {std}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = f.clone();
    for v in out.values_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}

/// Bilinear resampling of cell-centred values onto another grid covering
/// the same rectangle. Used to feed data generated at one resolution into
/// an inversion at another.
pub fn resample(f: &ScalarField, from: &SpatialGrid, to: &SpatialGrid) -> Result<ScalarField> {
    f.check_grid(from)?;
    let (nx, ny) = (from.nx(), from.ny());
    let o = from.origin();
    let v = f.values();
    Ok(ScalarField::from_fn(to, |x, y| {
        let sx = ((x - o[0]) / from.hx() - 0.5).clamp(0.0, (nx - 1) as f64);
        let sy = ((y - o[1]) / from.hy() - 0.5).clamp(0.0, (ny - 1) as f64);
        let i0 = (sx.floor() as usize).min(nx - 2);
        let j0 = (sy.floor() as usize).min(ny - 2);
        let (ax, ay) = (sx - i0 as f64, sy - j0 as f64);
        let at = |i: usize, j: usize| v[j * nx + i];
        (1.0 - ay) * ((1.0 - ax) * at(i0, j0) + ax * at(i0 + 1, j0))
            + ay * ((1.0 - ax) * at(i0, j0 + 1) + ax * at(i0 + 1, j0 + 1))
    }))
}
