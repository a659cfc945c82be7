use qpat::data::{sample_diffusion_data, sample_transport_data};
use qpat::diffusion::DiffusionPicardOptions;
use qpat::transport::PicardOptions;
use qpat::{Angular, BoundarySource, BoundaryTrace, CoefficientSet, ScalarField, SpatialGrid};

fn coefficients(n: usize) -> CoefficientSet {
    let grid = SpatialGrid::unit_square(n).unwrap();
    CoefficientSet::constant(&grid, 0.8, 1.0, 1.0, 0.4, 1.0, 0.5, 2.0)
        .with_sigma_b(ScalarField::from_fn(&grid, |x, y| 1.0 + 0.5 * x * y))
}

/// `‖h − h1 − h2/2‖_∞` with the linearized data taken at the scaled source.
fn cubic_remainder(h: &ScalarField, h1: &ScalarField, h2: &ScalarField) -> f64 {
    let mut worst: f64 = 0.0;
    for ((a, b), c) in h.values().iter().zip(h1.values()).zip(h2.values()) {
        worst = worst.max((a - b - 0.5 * c).abs());
    }
    worst
}

#[test]
fn transport_samples_follow_the_expansion() {
    let c = coefficients(14);
    let angular = Angular::isotropic(8).unwrap();
    let sources: Vec<BoundarySource> = [1e-2, 5e-3]
        .iter()
        .map(|&e| BoundarySource::from_fn(&c.grid, &angular.quadrature, |p, _| e * (1.0 + p[1])))
        .collect();
    let opts = PicardOptions::default();
    let data: Vec<_> = sample_transport_data(&c, &angular, &sources, &opts).into_iter().map(Result::unwrap).collect();
    let mut rem = Vec::new();
    for (id, d) in data.iter().enumerate() {
        assert_eq!(d.source_id, id);
        assert!(d.h1.min() > 0.0);
        rem.push(cubic_remainder(d.h.as_ref().unwrap(), &d.h1, &d.h2));
    }
    let ratio = rem[0] / rem[1];
    assert!((6.0..10.0).contains(&ratio), "{rem:?} ratio {ratio}");
}

#[test]
fn diffusion_samples_follow_the_expansion() {
    let c = coefficients(20);
    let sources: Vec<BoundaryTrace> =
        [1e-2, 5e-3].iter().map(|&e| BoundaryTrace::from_fn(&c.grid, |p| e * (1.0 + p[0]))).collect();
    let data: Vec<_> = sample_diffusion_data(&c, &sources, &DiffusionPicardOptions::default())
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let rem: Vec<f64> =
        data.iter().map(|d| cubic_remainder(d.h.as_ref().unwrap(), &d.h1, &d.h2)).collect();
    let ratio = rem[0] / rem[1];
    assert!((6.0..10.0).contains(&ratio), "{rem:?} ratio {ratio}");
}

#[test]
fn failures_are_reported_per_source() {
    let c = coefficients(10);
    let angular = Angular::isotropic(8).unwrap();
    let good = BoundarySource::constant(&c.grid, &angular.quadrature, 1e-2);
    let bad = BoundarySource::constant(&c.grid, &angular.quadrature, 10.0);
    let out = sample_transport_data(&c, &angular, &[good, bad], &PicardOptions::default());
    assert!(out[0].is_ok());
    assert!(out[1].as_ref().unwrap_err().is_precondition());
}
