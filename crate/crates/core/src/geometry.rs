//! Oval billiard boundary `x²/a² + (1 + θx)·y²/b² = 1`, uniform grids, and
//! the interior masks the eigensolver discretizes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// Nodes with `f >= 1 - ON_BOUNDARY` are classified outside.
pub const ON_BOUNDARY: f64 = 1e-12;

/// Boundary distances below this fraction of a cell are clamped.
pub const MIN_ARM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvalShape {
    a: f64,
    b: f64,
    theta: f64,
}

impl OvalShape {
    pub fn new(a: f64, b: f64, theta: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
            return Err(CoreError::InvalidShape(alloc::format!("semi-axes must be positive, got a = {a}, b = {b}")));
        }
        if !theta.is_finite() || theta.abs() * a >= 1.0 {
            return Err(CoreError::InvalidShape(alloc::format!(
                "deformation |theta| = {} must stay below 1/a = {}",
                theta.abs(),
                1.0 / a
            )));
        }
        Ok(Self { a, b, theta })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.a, self.b, theta)
    }

    /// `f(x, y)`; below 1 inside, 1 on the wall, above 1 outside.
    pub fn boundary_value(&self, x: f64, y: f64) -> Result<f64> {
        let stretch = 1.0 + self.theta * x;
        if stretch <= 0.0 {
            return Err(CoreError::Domain(stretch));
        }
        Ok(x * x / (self.a * self.a) + stretch * y * y / (self.b * self.b))
    }

    pub fn is_inside(&self, x: f64, y: f64) -> bool {
        matches!(self.boundary_value(x, y), Ok(f) if f < 1.0)
    }

    /// Classification used for grid nodes (nodes on the wall are outside).
    pub fn is_interior_node(&self, x: f64, y: f64) -> bool {
        matches!(self.boundary_value(x, y), Ok(f) if f < 1.0 - ON_BOUNDARY)
    }

    /// Half-height of the wall above abscissa `x`, zero outside `[-a, a]`.
    pub fn half_height(&self, x: f64) -> f64 {
        let ratio = 1.0 - x * x / (self.a * self.a);
        let stretch = 1.0 + self.theta * x;
        if ratio <= 0.0 || stretch <= 0.0 {
            0.0
        } else {
            self.b * libm::sqrt(ratio / stretch)
        }
    }

    /// Abscissa of the widest vertical chord.
    ///
    /// Stationary point of `(1 - x²/a²)/(1 + θx)`, the root of
    /// `θx² + 2x + θa² = 0` inside `(-a, a)`, written in cancellation-free form.
    pub fn widest_abscissa(&self) -> f64 {
        let t = self.theta;
        let a2 = self.a * self.a;
        -t * a2 / (1.0 + libm::sqrt(1.0 - t * t * a2))
    }

    pub fn bounding_box(&self) -> BoundingBox {
        let y_max = self.half_height(self.widest_abscissa());
        BoundingBox { x_min: -self.a, x_max: self.a, y_min: -y_max, y_max }
    }

    /// Fraction `t ∈ (0, 1]` along `from -> to` where the wall is crossed.
    /// `from` must be an interior node and `to` an exterior one.
    fn crossing_fraction(&self, from: (f64, f64), to: (f64, f64)) -> f64 {
        let outside = |t: f64| {
            let x = from.0 + t * (to.0 - from.0);
            let y = from.1 + t * (to.1 - from.1);
            !self.is_interior_node(x, y)
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if outside(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (0.5 * (lo + hi)).max(MIN_ARM)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.min(other.x_min),
            x_max: self.x_max.max(other.x_max),
            y_min: self.y_min.min(other.y_min),
            y_max: self.y_max.max(other.y_max),
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Uniform tensor grid, node `(i, j)` at `(x_min + i·dx, y_min + j·dy)`,
/// stored with `i` fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub x_min: f64,
    pub y_min: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(x_min: f64, y_min: f64, dx: f64, dy: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(dx > 0.0 && dy > 0.0) || !dx.is_finite() || !dy.is_finite() {
            return Err(CoreError::InvalidGrid(alloc::format!("spacings must be positive, got dx = {dx}, dy = {dy}")));
        }
        if nx == 0 || ny == 0 || nx * ny < 4 {
            return Err(CoreError::InvalidGrid(alloc::format!("need at least 4 nodes, got {nx} x {ny}")));
        }
        if !x_min.is_finite() || !y_min.is_finite() {
            return Err(CoreError::InvalidGrid("non-finite origin".into()));
        }
        Ok(Self { x_min, y_min, dx, dy, nx, ny })
    }

    /// Grid with spacing `h` whose nodes are symmetric about the box centre
    /// and extend `pad` cells beyond the box on every side.
    pub fn covering(bbox: &BoundingBox, h: f64, pad: usize) -> Result<Self> {
        if !(h > 0.0) {
            return Err(CoreError::InvalidGrid(alloc::format!("spacing {h} must be positive")));
        }
        let cells = |extent: f64| libm::ceil(extent / h - 1e-9).max(0.0) as usize;
        let nx = cells(bbox.width()) + 1 + 2 * pad;
        let ny = cells(bbox.height()) + 1 + 2 * pad;
        let cx = 0.5 * (bbox.x_min + bbox.x_max);
        let cy = 0.5 * (bbox.y_min + bbox.y_max);
        Self::new(cx - 0.5 * (nx - 1) as f64 * h, cy - 0.5 * (ny - 1) as f64 * h, h, h, nx, ny)
    }

    /// Like [`Grid2D::covering`] but centred on `y = 0` with an even number
    /// of rows, so no node row lies on the axis. Used by parity sectors.
    pub fn covering_symmetric(bbox: &BoundingBox, h: f64, pad: usize) -> Result<Self> {
        let half = bbox.y_max.abs().max(bbox.y_min.abs());
        let sym = BoundingBox { y_min: -half, y_max: half, ..*bbox };
        let mut grid = Self::covering(&sym, h, pad)?;
        if grid.ny % 2 == 1 {
            grid.ny += 1;
        }
        grid.y_min = -0.5 * (grid.ny - 1) as f64 * h;
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.dy
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.ny - 1)
    }

    pub fn same_as(&self, other: &Grid2D) -> bool {
        self == other
    }

    /// Bilinear interpolation of nodal `values`; zero outside the grid.
    pub fn interpolate(&self, values: &[f64], x: f64, y: f64) -> f64 {
        let fx = (x - self.x_min) / self.dx;
        let fy = (y - self.y_min) / self.dy;
        if !(fx >= 0.0 && fy >= 0.0) || fx > (self.nx - 1) as f64 || fy > (self.ny - 1) as f64 {
            return 0.0;
        }
        let i = fx as usize;
        let j = fy as usize;
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let at = |i: usize, j: usize| {
            if i < self.nx && j < self.ny {
                values[self.index(i, j)]
            } else {
                0.0
            }
        };
        (at(i, j) * (1.0 - tx) + at(i + 1, j) * tx) * (1.0 - ty)
            + (at(i, j + 1) * (1.0 - tx) + at(i + 1, j + 1) * tx) * ty
    }
}

/// Distances from an interior node to the wall along `-x, +x, -y, +y`, in
/// units of the grid spacing. `1.0` means the neighbour is interior or the
/// wall sits on the neighbouring node.
pub type Arms = [f64; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    grid: Grid2D,
    inside: Vec<bool>,
    interior_nodes: Vec<usize>,
    node_to_interior: Vec<usize>,
    arms: Vec<Arms>,
}

pub(crate) const EXTERIOR: usize = usize::MAX;

impl DomainMask {
    /// Mask from explicit flags. Walls sit on the first exterior node
    /// (plain five-point stencil with couplings dropped).
    pub fn from_flags(grid: Grid2D, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.len() {
            return Err(CoreError::InvalidGrid(alloc::format!("{} flags for {} nodes", inside.len(), grid.len())));
        }
        let mut node_to_interior = vec![EXTERIOR; grid.len()];
        let mut interior_nodes = Vec::new();
        for (node, &flag) in inside.iter().enumerate() {
            if flag {
                node_to_interior[node] = interior_nodes.len();
                interior_nodes.push(node);
            }
        }
        if interior_nodes.is_empty() {
            return Err(CoreError::EmptyInterior);
        }
        let arms = vec![[1.0; 4]; interior_nodes.len()];
        Ok(Self { grid, inside, interior_nodes, node_to_interior, arms })
    }

    /// Every node of `grid` interior; walls one spacing beyond the edges.
    pub fn rectangle(grid: Grid2D) -> Result<Self> {
        Self::from_flags(grid, vec![true; grid.len()])
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn interior_count(&self) -> usize {
        self.interior_nodes.len()
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior_nodes
    }

    /// Interior index of a grid node, if it is interior.
    pub fn interior_index(&self, node: usize) -> Option<usize> {
        match self.node_to_interior[node] {
            EXTERIOR => None,
            k => Some(k),
        }
    }

    pub fn arms(&self) -> &[Arms] {
        &self.arms
    }

    /// Same interior set with every wall moved onto the neighbouring node.
    pub fn staircase(&self) -> DomainMask {
        let mut out = self.clone();
        out.arms.iter_mut().for_each(|a| *a = [1.0; 4]);
        out
    }

    /// Scatter interior values onto the full grid (zero outside).
    pub fn scatter(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.grid.len()];
        for (&node, &v) in self.interior_nodes.iter().zip(interior) {
            full[node] = v;
        }
        full
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.interior_nodes.iter().map(|&n| full[n]).collect()
    }
}

/// Flags the grid nodes strictly inside `shape` and records sub-cell wall
/// distances for the boundary-adjacent ones.
pub fn build_mask(shape: &OvalShape, grid: &Grid2D) -> Result<DomainMask> {
    let mut inside = vec![false; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            inside[grid.index(i, j)] = shape.is_interior_node(grid.x(i), grid.y(j));
        }
    }
    let mut mask = DomainMask::from_flags(*grid, inside)?;
    for (k, &node) in mask.interior_nodes.iter().enumerate() {
        let (i, j) = (node % grid.nx, node / grid.nx);
        let here = (grid.x(i), grid.y(j));
        let neighbours = [
            (i.wrapping_sub(1), j, (here.0 - grid.dx, here.1)),
            (i + 1, j, (here.0 + grid.dx, here.1)),
            (i, j.wrapping_sub(1), (here.0, here.1 - grid.dy)),
            (i, j + 1, (here.0, here.1 + grid.dy)),
        ];
        for (dir, &(ni, nj, there)) in neighbours.iter().enumerate() {
            let interior = ni < grid.nx && nj < grid.ny && mask.inside[grid.index(ni, nj)];
            if !interior {
                mask.arms[k][dir] = shape.crossing_fraction(here, there);
            }
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle() -> OvalShape {
        OvalShape::new(1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn boundary_value_examples() {
        assert_eq!(circle().boundary_value(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(circle().boundary_value(0.0, 0.0).unwrap(), 0.0);
        let s = OvalShape::new(1.0, 0.5, 0.2).unwrap();
        assert!((s.boundary_value(0.5, 0.25).unwrap() - 0.525).abs() < 1e-15);
    }

    #[test]
    fn boundary_value_domain_error() {
        let s = OvalShape::new(1.0, 1.0, 0.5).unwrap();
        assert!(matches!(s.boundary_value(-2.0, 0.0), Err(CoreError::Domain(_))));
        assert!(!s.is_inside(-2.0, 0.0));
    }

    #[test]
    fn is_inside_examples() {
        assert!(circle().is_inside(0.99, 0.0));
        assert!(!circle().is_inside(1.01, 0.0));
        let s = OvalShape::new(1.0, 1.0, 0.5).unwrap();
        assert!((s.boundary_value(-0.9, 0.5).unwrap() - 0.9475).abs() < 1e-15);
        assert!(s.is_inside(-0.9, 0.5));
    }

    #[test]
    fn shape_invariants_enforced() {
        assert!(OvalShape::new(0.0, 1.0, 0.0).is_err());
        assert!(OvalShape::new(1.0, -1.0, 0.0).is_err());
        assert!(OvalShape::new(1.2, 1.0, 1.0 / 1.2).is_err());
        assert!(OvalShape::new(1.2, 1.0, 0.8).is_ok());
    }

    #[test]
    fn ellipse_bounding_box() {
        let s = OvalShape::new(1.3, 0.7, 0.0).unwrap();
        let bb = s.bounding_box();
        assert_eq!((bb.x_min, bb.x_max, bb.y_min, bb.y_max), (-1.3, 1.3, -0.7, 0.7));
    }

    #[test]
    fn bounding_box_continuous_at_zero() {
        let s = OvalShape::new(1.0, 1.0, -1e-9).unwrap();
        assert!((s.bounding_box().y_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounding_box_matches_dense_scan() {
        // dense-scan oracle, 10^6 samples
        let s = OvalShape::new(1.0, 1.0, 0.5).unwrap();
        let n = 1_000_000;
        let mut best = 0.0f64;
        for k in 0..=n {
            let x = -1.0 + 2.0 * k as f64 / n as f64;
            let g = (1.0 - x * x) / (1.0 + 0.5 * x);
            if g > best {
                best = g;
            }
        }
        let scan = libm::sqrt(best);
        let y = s.bounding_box().y_max;
        assert!(y >= scan - 1e-12);
        assert!((y - scan).abs() / scan < 1e-10, "{y} vs {scan}");
        // the scan itself resolves the optimum to ~1e-12
        assert!((y - 1.0352761804100830).abs() < 1e-9);
    }

    #[test]
    fn circle_mask_by_hand() {
        let grid = Grid2D::new(-1.0, -1.0, 0.5, 0.5, 5, 5).unwrap();
        let mask = build_mask(&circle(), &grid).unwrap();
        let mut expect = 0;
        for j in 0..5 {
            for i in 0..5 {
                let (x, y) = (grid.x(i), grid.y(j));
                let inside = x * x + y * y < 1.0;
                assert_eq!(mask.inside()[grid.index(i, j)], inside);
                expect += inside as usize;
            }
        }
        assert_eq!(mask.interior_count(), expect);
        assert_eq!(expect, 9);
        // (0.5, 0.5): wall along +x at sqrt(0.75)
        let k = mask.interior_index(grid.index(3, 3)).unwrap();
        let arm = mask.arms()[k][1];
        assert!((arm - (libm::sqrt(0.75) - 0.5) / 0.5).abs() < 1e-10);
    }

    #[test]
    fn empty_interior_error() {
        let grid = Grid2D::new(5.0, 5.0, 1e-3, 1e-3, 2, 2).unwrap();
        assert_eq!(build_mask(&circle(), &grid), Err(CoreError::EmptyInterior));
    }

    #[test]
    fn area_converges_to_monte_carlo() {
        use rand_chacha::ChaCha8Rng;
        use rand_core::{RngCore, SeedableRng};
        let s = OvalShape::new(1.2, 1.0, 0.4).unwrap();
        let bb = s.bounding_box();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples = 10_000_000u64;
        let mut hits = 0u64;
        let unit = |r: u64| (r >> 11) as f64 / (1u64 << 53) as f64;
        for _ in 0..samples {
            let x = bb.x_min + bb.width() * unit(rng.next_u64());
            let y = bb.y_min + bb.height() * unit(rng.next_u64());
            hits += s.is_inside(x, y) as u64;
        }
        let mc = bb.width() * bb.height() * hits as f64 / samples as f64;
        let grid = Grid2D::covering(&bb, 1.0 / 256.0, 1).unwrap();
        let mask = build_mask(&s, &grid).unwrap();
        let area = mask.interior_count() as f64 * grid.cell_area();
        assert!((area - mc).abs() / mc < 2e-3, "grid {area} vs mc {mc}");
    }

    #[test]
    fn covering_is_symmetric() {
        let s = OvalShape::new(1.2, 1.0, 0.3).unwrap();
        let g = Grid2D::covering(&s.bounding_box(), 0.05, 1).unwrap();
        let cy = 0.5 * (s.bounding_box().y_min + s.bounding_box().y_max);
        assert!((g.y_min + g.y_max() - 2.0 * cy).abs() < 1e-12);
        assert!(g.x_min < -1.2 && g.x_max() > 1.2);
    }

    #[test]
    fn interpolation_reproduces_bilinear() {
        let g = Grid2D::new(0.0, 0.0, 0.5, 0.25, 4, 5).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|k| {
                let (i, j) = (k % g.nx, k / g.nx);
                1.0 + 2.0 * g.x(i) - 3.0 * g.y(j) + g.x(i) * g.y(j)
            })
            .collect();
        for &(x, y) in &[(0.3, 0.7), (1.5, 1.0), (0.0, 0.0), (1.2, 0.9)] {
            let f = 1.0 + 2.0 * x - 3.0 * y + x * y;
            assert!((g.interpolate(&vals, x, y) - f).abs() < 1e-12);
        }
        assert_eq!(g.interpolate(&vals, -0.1, 0.5), 0.0);
        assert_eq!(g.interpolate(&vals, 1.6, 0.5), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reflection_symmetric_in_y(a in 0.3f64..2.0, b in 0.3f64..2.0, t in -0.95f64..0.95,
                                         x in -2.0f64..2.0, y in -2.0f64..2.0) {
                let s = OvalShape::new(a, b, t / a).unwrap();
                prop_assert_eq!(s.is_inside(x, y), s.is_inside(x, -y));
            }

            #[test]
            fn reduces_to_ellipse(a in 0.3f64..2.0, b in 0.3f64..2.0, x in -2.0f64..2.0, y in -2.0f64..2.0) {
                let s = OvalShape::new(a, b, 0.0).unwrap();
                prop_assert_eq!(s.is_inside(x, y), x * x / (a * a) + y * y / (b * b) < 1.0);
            }

            #[test]
            fn monotone_in_abs_y(t in -0.9f64..0.9, x in -1.0f64..1.0, y1 in 0.0f64..2.0, dy in 0.0f64..1.0) {
                let s = OvalShape::new(1.0, 1.0, t).unwrap();
                let f1 = s.boundary_value(x, y1).unwrap();
                let f2 = s.boundary_value(x, -(y1 + dy)).unwrap();
                prop_assert!(f2 >= f1);
            }
        }
    }
}
