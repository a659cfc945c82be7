use qpat::transport::{
    characteristics_oracle, positivity_bound_value, positivity_lower_bound, solve_linear_rte,
    solve_semilinear_rte, trace_ray, PicardOptions, TransportOptions,
};
use qpat::{Angular, BoundarySource, CoefficientSet, PhaseField, ScalarField, SpatialGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn smooth_inflow(p: [f64; 2]) -> f64 {
    (PI * p[0]).sin().powi(2) + (PI * p[1]).sin().powi(2)
}

/// Sup error of the pure-absorption solve against `g(foot) e^{−σ_a |x − foot|}`.
fn absorption_error(n: usize, ndirs: usize, sigma_a: f64, g_fn: fn([f64; 2]) -> f64) -> f64 {
    let grid = SpatialGrid::unit_square(n).unwrap();
    let c = CoefficientSet::constant(&grid, 1.0, sigma_a, 0.0, 0.0, 1.0, 0.5, 2.0);
    let angular = Angular::isotropic(ndirs).unwrap();
    let g = BoundarySource::from_fn(&grid, &angular.quadrature, |p, _| g_fn(p));
    let u = solve_linear_rte(&c, &angular, &g, None, &Default::default()).unwrap().u;
    let mut err: f64 = 0.0;
    for k in 0..ndirs {
        let v = angular.quadrature.direction(k);
        for cell in 0..grid.ncells() {
            let (i, j) = grid.coords(cell);
            let x = grid.center(i, j);
            let (_, foot) = trace_ray(&grid, x, [-v[0], -v[1]]).unwrap();
            let len = ((x[0] - foot[0]).powi(2) + (x[1] - foot[1]).powi(2)).sqrt();
            let exact = g_fn(foot) * (-sigma_a * len).exp();
            err = err.max((u.get(cell, k) - exact).abs());
        }
    }
    err
}

#[test]
fn pure_absorption_converges_at_first_order() {
    let errs: Vec<f64> = [32, 64, 128].iter().map(|&n| absorption_error(n, 12, 1.3, smooth_inflow)).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    println!("smooth inflow: errors {errs:?} orders {orders:?}");
    assert!(orders.iter().all(|&o| o >= 0.8), "{orders:?}");

    let flat: Vec<f64> = [32, 64, 128].iter().map(|&n| absorption_error(n, 16, 1.3, |_| 1.0)).collect();
    let flat_orders: Vec<f64> = flat.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    println!("constant inflow (corner kinks): errors {flat:?} orders {flat_orders:?}");
}

#[test]
fn oracle_agrees_with_the_sweep_under_scattering() {
    let grid = SpatialGrid::unit_square(24).unwrap();
    let c = CoefficientSet::constant(&grid, 1.0, 0.8, 0.0, 0.6, 1.0, 0.5, 2.0);
    let angular = Angular::isotropic(8).unwrap();
    let g = BoundarySource::constant(&grid, &angular.quadrature, 1.0);
    let opts = TransportOptions { tol: 1e-13, max_iter: 10_000 };
    let u = solve_linear_rte(&c, &angular, &g, None, &opts).unwrap().u;
    let fixed = characteristics_oracle(&c, &angular, &g, &u).unwrap();
    let gap = fixed.zip_map(&u, |a, b| a - b).max_abs();
    println!("oracle gap {gap:e}");
    assert!(gap <= 0.05, "{gap}");
}

fn random_set(rng: &mut ChaCha8Rng, grid: &SpatialGrid) -> CoefficientSet {
    let a0 = rng.random_range(0.3..1.2);
    let a1 = rng.random_range(0.0..0.6);
    let s0 = rng.random_range(0.0..0.8);
    let (cx, cy) = (rng.random_range(0.2..0.8), rng.random_range(0.2..0.8));
    let sigma_a = ScalarField::from_fn(grid, |x, y| a0 + a1 * (-((x - cx).powi(2) + (y - cy).powi(2)) / 0.03).exp());
    let sigma_s = ScalarField::from_fn(grid, |x, y| s0 * (1.0 + 0.5 * (PI * x).sin() * (PI * y).sin()));
    CoefficientSet::constant(grid, 1.0, 1.0, 0.0, 0.0, 1.0, 0.3, 2.0)
        .with_sigma_a(sigma_a)
        .with_sigma_s(sigma_s)
}

#[test]
fn well_posedness_bounds_on_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = SpatialGrid::unit_square(24).unwrap();
    let angular = Angular::isotropic(8).unwrap();
    let opts = TransportOptions { tol: 1e-13, max_iter: 10_000 };
    for trial in 0..20 {
        let c = random_set(&mut rng, &grid);
        let (lo, amp) = (rng.random_range(0.5..1.5), rng.random_range(0.0..1.0));
        let phase = rng.random_range(0.0..PI);
        let g = BoundarySource::from_fn(&grid, &angular.quadrature, |p, v| {
            lo + amp * (2.0 * PI * (p[0] + p[1]) + phase + v[0]).sin().powi(2)
        });
        let sol = solve_linear_rte(&c, &angular, &g, None, &opts).unwrap();
        let sup = g.sup_norm();
        assert_eq!(sol.report.sup_bound, Some(sup));
        assert!(sol.u.max() <= sup, "trial {trial}: {} > {sup}", sol.u.max());
        let eps = positivity_lower_bound(&c, &g).unwrap();
        let floor = eps - 2.0 * grid.h() * c.sigma_bar() * sup;
        assert!(sol.u.min() >= floor, "trial {trial}: {} < {floor}", sol.u.min());
        assert!(sol.u.min() >= eps, "trial {trial}: min {} below eps' {eps}", sol.u.min());
    }
}

#[test]
fn positivity_floor_example() {
    let grid = SpatialGrid::unit_square(4).unwrap();
    let eps = positivity_bound_value(1.0, grid.diameter(), 2.0);
    assert!((eps - 0.05916).abs() < 1e-4, "{eps}");
}

fn picard_case(epsilon: f64) -> (CoefficientSet, Angular, BoundarySource) {
    let grid = SpatialGrid::unit_square(20).unwrap();
    let c = CoefficientSet::constant(&grid, 1.0, 1.0, 1.0, 0.5, 1.0, 0.5, 2.0)
        .with_sigma_b(ScalarField::from_fn(&grid, |x, y| 1.0 + (PI * x).sin() * (PI * y).sin()));
    let angular = Angular::isotropic(12).unwrap();
    let g = BoundarySource::constant(&grid, &angular.quadrature, epsilon);
    (c, angular, g)
}

#[test]
fn picard_ratios_respect_the_certificate() {
    for epsilon in [1e-2, 5e-3] {
        let (c, angular, g) = picard_case(epsilon);
        let sol = solve_semilinear_rte(&c, &angular, &g, &PicardOptions::default()).unwrap();
        let cert = sol.report.contraction.unwrap();
        let worst = sol.report.picard_ratios.iter().copied().fold(0.0, f64::max);
        println!("eps {epsilon}: certified {:.4} observed {worst:.4}", cert.certified_ratio);
        assert!(cert.certified_ratio < 1.0);
        assert!(worst <= cert.certified_ratio, "{worst} > {}", cert.certified_ratio);
    }
}

#[test]
fn large_amplitude_is_refused() {
    let (c, angular, g) = picard_case(0.2);
    let err = solve_semilinear_rte(&c, &angular, &g, &PicardOptions::default()).unwrap_err();
    assert!(err.is_precondition(), "{err}");
}

#[test]
fn zero_two_photon_absorption_is_the_linear_solve() {
    let (c, angular, g) = picard_case(1e-2);
    let zero = ScalarField::zeros(&c.grid);
    let c = c.with_sigma_b(zero);
    let opts = PicardOptions::default();
    let semi = solve_semilinear_rte(&c, &angular, &g, &opts).unwrap().u;
    let lin = solve_linear_rte(&c, &angular, &g, None, &opts.inner).unwrap().u;
    let bits = |u: &PhaseField| u.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&semi), bits(&lin));
}

#[test]
fn solution_is_linear_in_the_inflow() {
    let (c, angular, g) = picard_case(1.0);
    let zero = ScalarField::zeros(&c.grid);
    let c = c.with_sigma_b(zero);
    let opts = TransportOptions { tol: 1e-14, max_iter: 10_000 };
    let u1 = solve_linear_rte(&c, &angular, &g, None, &opts).unwrap().u;
    let u3 = solve_linear_rte(&c, &angular, &g.scale(3.0), None, &opts).unwrap().u;
    let gap = u3.zip_map(&u1, |a, b| a - 3.0 * b).max_abs();
    assert!(gap <= 1e-12, "{gap}");
}
