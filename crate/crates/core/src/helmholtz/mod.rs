//! Dirichlet eigenmodes of the oval billiard, `(∇² + k²)ψ = 0`, on a masked
//! finite-difference grid, plus the overlap machinery used to follow modes
//! through a deformation sweep.

pub mod banded;
pub mod eigensolver;
pub mod operator;
pub mod tracking;

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::geometry::{build_mask, BoundingBox, DomainMask, Grid2D, OvalShape};
use crate::quadrature::pairwise_sum_by;

pub use eigensolver::EigenSettings;
pub use operator::{assemble_operator, assemble_sector, LaplaceOperator, Parity};
pub use tracking::{
    align_gauge, detect_avoided_crossing, gap_local_minima, gap_minimum, track_branches, AvoidedCrossing, BranchSample,
    SpectrumBranch, TrackedMode,
};

/// Real wavefunction that can be sampled anywhere in the plane.
pub trait Wavefunction {
    fn value(&self, x: f64, y: f64) -> f64;
    /// Box outside of which the wavefunction vanishes (or is negligible).
    fn support(&self) -> BoundingBox;
}

/// One eigenpair on a grid. `psi` covers every grid node and is zero off
/// the interior.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenMode {
    k: f64,
    psi: Vec<f64>,
    shape: OvalShape,
    grid: Grid2D,
    residual: f64,
}

impl EigenMode {
    /// Wraps nodal values, rescaling them to unit discrete L² norm.
    pub fn from_values(k: f64, mut psi: Vec<f64>, shape: OvalShape, grid: Grid2D) -> Result<Self> {
        if psi.len() != grid.len() {
            return Err(CoreError::GridMismatch(alloc::format!("{} values for {} nodes", psi.len(), grid.len())));
        }
        let norm2 = pairwise_sum_by(psi.len(), |i| psi[i] * psi[i]) * grid.cell_area();
        if !(norm2 > 0.0) {
            return Err(CoreError::InvalidArgument("wavefunction vanishes identically".into()));
        }
        let scale = 1.0 / libm::sqrt(norm2);
        psi.iter_mut().for_each(|v| *v *= scale);
        Ok(Self { k, psi, shape, grid, residual: 0.0 })
    }

    /// Wraps values verbatim (already normalized, e.g. read back from disk).
    pub fn from_raw_parts(k: f64, psi: Vec<f64>, shape: OvalShape, grid: Grid2D, residual: f64) -> Result<Self> {
        if psi.len() != grid.len() {
            return Err(CoreError::GridMismatch(alloc::format!("{} values for {} nodes", psi.len(), grid.len())));
        }
        Ok(Self { k, psi, shape, grid, residual })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn shape(&self) -> &OvalShape {
        &self.shape
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Relative eigen-residual `‖(A - k²)ψ‖ / (k²‖ψ‖)` reported by the solver.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn norm_squared(&self) -> f64 {
        pairwise_sum_by(self.psi.len(), |i| self.psi[i] * self.psi[i]) * self.grid.cell_area()
    }

    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.psi.iter_mut().for_each(|v| *v = -*v);
        out
    }

    /// Sign of `∑ ψ(x, y) ψ(x, -y)`: `+1` even, `-1` odd in `y`.
    /// Requires a grid symmetric about `y = 0`.
    pub fn y_parity(&self) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for j in 0..g.ny {
            let jm = g.ny - 1 - j;
            for i in 0..g.nx {
                acc += self.psi[g.index(i, j)] * self.psi[g.index(i, jm)];
            }
        }
        if acc >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl Wavefunction for EigenMode {
    /// Bilinear interpolation inside the billiard, zero outside the wall.
    fn value(&self, x: f64, y: f64) -> f64 {
        if self.shape.is_inside(x, y) {
            self.grid.interpolate(&self.psi, x, y)
        } else {
            0.0
        }
    }

    fn support(&self) -> BoundingBox {
        BoundingBox {
            x_min: self.grid.x_min,
            x_max: self.grid.x_max(),
            y_min: self.grid.y_min,
            y_max: self.grid.y_max(),
        }
    }
}

/// Discrete `∑ ψ_a ψ_b dx dy`.
pub fn overlap(a: &EigenMode, b: &EigenMode) -> Result<f64> {
    if !a.grid.same_as(&b.grid) {
        return Err(CoreError::GridMismatch("overlap of modes on different grids".into()));
    }
    Ok(pairwise_sum_by(a.psi.len(), |i| a.psi[i] * b.psi[i]) * a.grid.cell_area())
}

/// The `count` lowest modes with `k >= k_window.0` (and `<= k_window.1`),
/// ascending in `k`.
pub fn solve_modes(
    shape: &OvalShape,
    grid: &Grid2D,
    count: usize,
    k_window: Option<(f64, f64)>,
    settings: &EigenSettings,
) -> Result<Vec<EigenMode>> {
    let mask = build_mask(shape, grid)?;
    solve_masked(&mask, shape, count, k_window, settings)
}

/// As [`solve_modes`] on a prepared mask.
pub fn solve_masked(
    mask: &DomainMask,
    shape: &OvalShape,
    count: usize,
    k_window: Option<(f64, f64)>,
    settings: &EigenSettings,
) -> Result<Vec<EigenMode>> {
    solve_operator(mask, &assemble_operator(mask), shape, count, k_window, settings)
}

/// As [`solve_modes`], restricted to one reflection sector about `y = 0`.
/// The grid must be symmetric about the axis with an even number of rows
/// (see [`Grid2D::covering_symmetric`]).
pub fn solve_parity(
    shape: &OvalShape,
    grid: &Grid2D,
    parity: Parity,
    count: usize,
    k_window: Option<(f64, f64)>,
    settings: &EigenSettings,
) -> Result<Vec<EigenMode>> {
    let mask = build_mask(shape, grid)?;
    let op = assemble_sector(&mask, parity)?;
    solve_operator(&mask, &op, shape, count, k_window, settings)
}

fn solve_operator(
    mask: &DomainMask,
    op: &LaplaceOperator,
    shape: &OvalShape,
    count: usize,
    k_window: Option<(f64, f64)>,
    settings: &EigenSettings,
) -> Result<Vec<EigenMode>> {
    if count == 0 {
        return Err(CoreError::InvalidArgument("count must be at least 1".into()));
    }
    let shift = match k_window {
        Some((lo, hi)) => {
            if !(lo >= 0.0 && hi > lo) {
                return Err(CoreError::InvalidArgument(alloc::format!("bad k window [{lo}, {hi}]")));
            }
            lo * lo
        }
        None => 0.0,
    };
    let pairs = eigensolver::lowest_above(op, shift, count, settings)?;
    let grid = *mask.grid();
    let mut modes = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let k = libm::sqrt(pair.value);
        if let Some((_, hi)) = k_window {
            if k > hi {
                break;
            }
        }
        let mut psi = mask.scatter(&op.to_interior(&pair.vector));
        // fix the sign: largest-magnitude entry positive
        let mut pivot = 0;
        for (i, v) in psi.iter().enumerate() {
            if v.abs() > psi[pivot].abs() {
                pivot = i;
            }
        }
        if psi[pivot] < 0.0 {
            psi.iter_mut().for_each(|v| *v = -*v);
        }
        let mut mode = EigenMode::from_values(k, psi, *shape, grid)?;
        mode.residual = pair.residual;
        modes.push(mode);
    }
    Ok(modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainMask, Grid2D};
    use core::f64::consts::PI;

    #[test]
    fn parity_sectors_reproduce_full_spectrum() {
        let shape = OvalShape::new(1.2, 1.0, 0.35).unwrap();
        let grid = Grid2D::covering_symmetric(&shape.bounding_box(), 0.05, 1).unwrap();
        let settings = EigenSettings::default();
        let full = solve_modes(&shape, &grid, 8, None, &settings).unwrap();
        let even = solve_parity(&shape, &grid, Parity::Even, 5, None, &settings).unwrap();
        let odd = solve_parity(&shape, &grid, Parity::Odd, 5, None, &settings).unwrap();
        for m in &full {
            let pool = if m.y_parity() > 0.0 { &even } else { &odd };
            let twin = pool.iter().find(|s| (s.k() - m.k()).abs() < 1e-9 * m.k()).unwrap();
            assert!((overlap(m, twin).unwrap().abs() - 1.0).abs() < 1e-8);
            assert_eq!(twin.y_parity(), m.y_parity());
        }
        let asym = Grid2D::covering(&shape.bounding_box(), 0.05, 1).unwrap();
        if asym.ny % 2 == 1 {
            assert!(solve_parity(&shape, &asym, Parity::Even, 1, None, &settings).is_err());
        }
    }

    #[test]
    fn unit_square_fundamental() {
        let h = 1.0 / 64.0;
        let grid = Grid2D::new(h, h, h, h, 63, 63).unwrap();
        let mask = DomainMask::rectangle(grid).unwrap();
        let shape = OvalShape::new(1.0, 1.0, 0.0).unwrap();
        let modes = solve_masked(&mask, &shape, 1, None, &EigenSettings::default()).unwrap();
        let k = modes[0].k();
        assert!((k - PI * libm::sqrt(2.0)).abs() / k < 1e-3, "{k}");
        assert!((modes[0].norm_squared() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn overlap_examples() {
        let shape = OvalShape::new(1.2, 1.0, 0.2).unwrap();
        let grid = Grid2D::covering(&shape.bounding_box(), 0.05, 1).unwrap();
        let modes = solve_modes(&shape, &grid, 3, None, &EigenSettings::default()).unwrap();
        let m = &modes[0];
        assert!((overlap(m, m).unwrap() - 1.0).abs() < 1e-12);
        assert!((overlap(m, &m.negated()).unwrap() + 1.0).abs() < 1e-12);
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(overlap(&modes[i], &modes[j]).unwrap().abs() < 1e-8);
            }
        }
        let other = Grid2D::covering(&shape.bounding_box(), 0.06, 1).unwrap();
        let m2 = solve_modes(&shape, &other, 1, None, &EigenSettings::default()).unwrap();
        assert!(matches!(overlap(m, &m2[0]), Err(CoreError::GridMismatch(_))));
    }

    #[test]
    fn modes_vanish_off_interior() {
        let shape = OvalShape::new(1.2, 1.0, 0.4).unwrap();
        let grid = Grid2D::covering(&shape.bounding_box(), 0.06, 1).unwrap();
        let mask = build_mask(&shape, &grid).unwrap();
        let modes = solve_masked(&mask, &shape, 2, None, &EigenSettings::default()).unwrap();
        for m in &modes {
            for (v, &inside) in m.psi().iter().zip(mask.inside()) {
                if !inside {
                    assert_eq!(*v, 0.0);
                }
            }
            assert!(m.residual() < 1e-8);
        }
    }

    #[test]
    fn window_returns_modes_above_start() {
        let shape = OvalShape::new(1.2, 1.0, 0.0).unwrap();
        let grid = Grid2D::covering(&shape.bounding_box(), 0.05, 1).unwrap();
        let all = solve_modes(&shape, &grid, 8, None, &EigenSettings::default()).unwrap();
        let lo = 0.5 * (all[4].k() + all[5].k());
        let win = solve_modes(&shape, &grid, 3, Some((lo, 100.0)), &EigenSettings::default()).unwrap();
        for (w, a) in win.iter().zip(&all[5..8]) {
            assert!((w.k() - a.k()).abs() < 1e-9);
        }
        let narrow = solve_modes(&shape, &grid, 3, Some((lo, all[5].k() + 1e-6)), &EigenSettings::default()).unwrap();
        assert_eq!(narrow.len(), 1);
    }
}
