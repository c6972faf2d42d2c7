//! Prints one parity sector's wavenumbers across a deformation range.
//!
//! usage: scan even|odd a b theta0 theta1 samples h count [k_lo k_hi]

use ovalwig_core::geometry::{Grid2D, OvalShape};
use ovalwig_core::helmholtz::{solve_parity, EigenSettings, Parity};

fn main() {
    let parity = match std::env::args().nth(1).as_deref() {
        Some("even") => Parity::Even,
        Some("odd") => Parity::Odd,
        _ => panic!("usage: scan even|odd a b theta0 theta1 samples h count [k_lo k_hi]"),
    };
    let args: Vec<f64> = std::env::args().skip(2).map(|s| s.parse().expect("numeric argument")).collect();
    let (a, b, t0, t1, n, h, count) = (args[0], args[1], args[2], args[3], args[4] as usize, args[5], args[6] as usize);
    let theta = |i: usize| t0 + (t1 - t0) * i as f64 / (n.max(2) - 1) as f64;
    let mut bb = OvalShape::new(a, b, t0).unwrap().bounding_box();
    for i in 0..n {
        bb = bb.union(&OvalShape::new(a, b, theta(i)).unwrap().bounding_box());
    }
    let grid = Grid2D::covering_symmetric(&bb, h, 1).unwrap();
    let window = args.get(7).map(|&lo| (lo, args[8]));
    for i in 0..n {
        let shape = OvalShape::new(a, b, theta(i)).unwrap();
        let modes = solve_parity(&shape, &grid, parity, count, window, &EigenSettings::default()).unwrap();
        let ks: Vec<String> = modes.iter().map(|m| format!("{:.5}", m.k())).collect();
        println!("{:.4} {}", theta(i), ks.join(" "));
    }
}
