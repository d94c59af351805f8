//! Prior covariance structure on grids of increasing size.

use backscatter_rti::geometry::{build_grid, Point3};
use backscatter_rti::solver::{covariance_matrix, RtiParams};

#[test]
fn symmetric_unit_diagonal_and_factorizable() {
    let params = RtiParams::default();
    for (n_u, n_v, cell) in [(2, 2, 0.5), (10, 10, 0.1), (32, 16, 0.1), (40, 25, 0.05)] {
        let grid = build_grid(Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 0.0, 1.0), n_u, n_v, cell)
            .unwrap();
        let c = covariance_matrix(&grid, &params).unwrap();
        let v = c.values();
        for i in 0..c.n() {
            assert_eq!(v[(i, i)], 0.25);
            for j in 0..i {
                assert!((v[(i, j)] - v[(j, i)]).abs() <= 1e-12);
                assert!(v[(i, j)] > 0.0 && v[(i, j)] < 0.25);
            }
        }
        assert!(c.cholesky().is_ok(), "{n_u}x{n_v}");
    }
}

#[test]
fn correlation_length_controls_decay() {
    let grid = build_grid(Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0), 5, 1, 1.0).unwrap();
    let near = covariance_matrix(&grid, &RtiParams { delta_corr_m: 0.5, ..Default::default() }).unwrap();
    let far = covariance_matrix(&grid, &RtiParams::default()).unwrap();
    assert!((far.values()[(0, 1)] - 0.25 * (-1.0f64 / 3.0).exp()).abs() < 1e-15);
    assert!(near.values()[(0, 4)] < far.values()[(0, 4)]);
}
