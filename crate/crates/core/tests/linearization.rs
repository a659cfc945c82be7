use qpat::diffusion::DiffusionPicardOptions;
use qpat::linearization::{
    linearize_diffusion, linearize_transport, solve_u1_diffusion, verify_derivatives_diffusion,
    verify_derivatives_transport, DEFAULT_EPS,
};
use qpat::transport::PicardOptions;
use qpat::{Angular, BoundarySource, BoundaryTrace, CoefficientSet, ScalarField, SpatialGrid};

fn bump(grid: &SpatialGrid, base: f64, amp: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| {
        base + amp * (-((x - 0.55).powi(2) + (y - 0.45).powi(2)) / 0.02).exp()
    })
}

fn transport_case(sigma_b: f64) -> (CoefficientSet, Angular, BoundarySource) {
    let grid = SpatialGrid::unit_square(16).unwrap();
    let c = CoefficientSet::constant(&grid, 1.0, 1.0, 0.0, 0.5, 1.0, 0.5, 2.0)
        .with_sigma_a(bump(&grid, 1.0, 0.5))
        .with_sigma_b(if sigma_b == 0.0 { ScalarField::zeros(&grid) } else { bump(&grid, sigma_b, 0.5) });
    let angular = Angular::isotropic(8).unwrap();
    let g = BoundarySource::from_fn(&grid, &angular.quadrature, |p, _| 1.0 + 0.5 * p[0]);
    (c, angular, g)
}

#[test]
fn transport_remainders_are_first_order() {
    let (c, angular, g) = transport_case(1.0);
    let rep = verify_derivatives_transport(&c, &angular, &g, &DEFAULT_EPS, &PicardOptions::default()).unwrap();
    println!("{rep}");
    assert!(rep.passed, "{rep}");
}

#[test]
fn transport_without_two_photon_absorption_is_linear() {
    let (c, angular, g) = transport_case(0.0);
    let rep = verify_derivatives_transport(&c, &angular, &g, &DEFAULT_EPS, &PicardOptions::default()).unwrap();
    assert!(rep.linear && rep.passed, "{rep}");
    assert!(rep.r1.iter().all(|r| *r <= 1e-9));
}

#[test]
fn diffusion_remainders_are_first_order() {
    let grid = SpatialGrid::unit_square(24).unwrap();
    let c = CoefficientSet::constant(&grid, 1.0, 1.0, 1.0, 0.0, 1.0, 0.5, 2.0)
        .with_gamma(bump(&grid, 1.0, 0.3))
        .with_sigma_b(bump(&grid, 1.0, 0.5));
    let g = BoundaryTrace::from_fn(&grid, |p| 1.0 + p[1]);
    let rep = verify_derivatives_diffusion(&c, &g, &DEFAULT_EPS, &DiffusionPicardOptions::default()).unwrap();
    println!("{rep}");
    assert!(rep.passed, "{rep}");
}

#[test]
fn linearizations_scale_with_the_source() {
    let (c, angular, g) = transport_case(1.0);
    let opts = Default::default();
    let a = linearize_transport(&c, &angular, &g, &opts).unwrap();
    let b = linearize_transport(&c, &angular, &g.scale(3.0), &opts).unwrap();
    let tol = 1e-9;
    for (x, y) in a.u1.values().iter().zip(b.u1.values()) {
        assert!((3.0 * x - y).abs() <= tol * y.abs().max(1.0));
    }
    for (x, y) in a.u2.values().iter().zip(b.u2.values()) {
        assert!((9.0 * x - y).abs() <= tol * y.abs().max(1.0));
    }

    let grid = SpatialGrid::unit_square(12).unwrap();
    let c = CoefficientSet::constant(&grid, 1.0, 1.0, 1.0, 0.0, 1.0, 0.5, 2.0);
    let g = BoundaryTrace::from_fn(&grid, |p| 1.0 + p[0]);
    let a = linearize_diffusion(&c, &g, &Default::default()).unwrap();
    let b = linearize_diffusion(&c, &g.scale(2.0), &Default::default()).unwrap();
    for (x, y) in a.u2.values().iter().zip(b.u2.values()) {
        assert!((4.0 * x - y).abs() <= tol * y.abs().max(1.0));
    }
    let u1 = solve_u1_diffusion(&c, &BoundaryTrace::zeros(&grid), &Default::default()).unwrap();
    assert!(u1.is_identically_zero());
}
