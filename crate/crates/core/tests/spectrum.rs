use std::f64::consts::PI;

use ovalwig_core::geometry::{build_mask, DomainMask, Grid2D, OvalShape};
use ovalwig_core::helmholtz::{solve_masked, EigenSettings};

/// J_n(x) by its power series (fine for x < 10)
fn bessel_j(n: u32, x: f64) -> f64 {
    let mut term = (0.5 * x).powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..60 {
        term *= -(0.25 * x * x) / (m as f64 * (m + n) as f64);
        sum += term;
    }
    sum
}

fn first_zero(n: u32, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    assert!(bessel_j(n, a) * bessel_j(n, b) < 0.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if bessel_j(n, a) * bessel_j(n, m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

fn disk_errors(h: f64, staircase: bool) -> [f64; 2] {
    let j01 = first_zero(0, 2.0, 3.0);
    let j11 = first_zero(1, 3.5, 4.2);
    let disk = OvalShape::new(1.0, 1.0, 0.0).unwrap();
    let grid = Grid2D::covering(&disk.bounding_box(), h, 1).unwrap();
    let mut mask = build_mask(&disk, &grid).unwrap();
    if staircase {
        mask = mask.staircase();
    }
    let modes = solve_masked(&mask, &disk, 3, None, &EigenSettings::default()).unwrap();
    // j11 is doubly degenerate
    assert!((modes[1].k() - modes[2].k()).abs() < 1e-6);
    [modes[0].k() / j01 - 1.0, modes[1].k() / j11 - 1.0]
}

#[test]
fn bessel_zeros() {
    assert!((first_zero(0, 2.0, 3.0) - 2.404826).abs() < 1e-6);
    assert!((first_zero(1, 3.5, 4.2) - 3.831706).abs() < 1e-6);
}

#[test]
fn disk_wavenumbers_converge_at_second_order() {
    let coarse = disk_errors(1.0 / 32.0, false);
    let fine = disk_errors(1.0 / 64.0, false);
    for (c, f) in coarse.iter().zip(&fine) {
        assert!(f.abs() < 5e-3);
        let order = (c / f).abs().log2();
        assert!(order > 1.7, "order {order}");
    }
}

#[test]
fn staircase_boundary_is_first_order() {
    let coarse = disk_errors(1.0 / 32.0, true);
    let fine = disk_errors(1.0 / 64.0, true);
    let order = (coarse[0] / fine[0]).abs().log2();
    assert!(order > 0.7 && order < 1.5, "order {order}");
}

#[test]
fn unit_square_lowest_five() {
    let n = 64;
    let h = 1.0 / n as f64;
    let grid = Grid2D::new(h, h, h, h, n - 1, n - 1).unwrap();
    let mask = DomainMask::rectangle(grid).unwrap();
    let shape = OvalShape::new(1.0, 1.0, 0.0).unwrap();
    let modes = solve_masked(&mask, &shape, 5, None, &EigenSettings::default()).unwrap();
    let mut exact: Vec<f64> = (1..5).flat_map(|m| (1..5).map(move |k| (m * m + k * k) as f64)).collect();
    exact.sort_by(f64::total_cmp);
    for (mode, e) in modes.iter().zip(&exact) {
        let lambda = mode.k() * mode.k();
        assert!((lambda / (PI * PI * e) - 1.0).abs() < 5e-3, "{lambda} vs {e}");
    }
}
