//! Real Wigner function of a real wavefunction on a 4D phase-space grid
//! (ħ = 1):
//!
//! `W(r, p) = (2π)⁻² ∫ d²s e^{i p·s} ψ(r - s/2) ψ(r + s/2)`.
//!
//! The displacement grid is conjugate to the momentum grid, `ds = 2π/(n·dp)`,
//! so summing `W` over momenta returns `ψ(r)²` to rounding. Phases are taken
//! from exact twiddle tables indexed by `q·m mod n`, which makes
//! `W(r, p) = W(r, -p)` hold bit for bit.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;

use crate::error::{CoreError, Result};
use crate::geometry::{BoundingBox, Grid2D};
use crate::helmholtz::Wavefunction;
use crate::quadrature::{pairwise_sum, pairwise_sum_by};

/// Largest tolerated `|∑ψ² dx dy - 1|` after resampling onto the Wigner
/// position grid.
pub const DRIFT_LIMIT: f64 = 1e-4;

/// Centred momentum grid `p_q = (q - n/2)·dp`, `q = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumGrid {
    pub np_x: usize,
    pub np_y: usize,
    pub dp_x: f64,
    pub dp_y: f64,
}

impl MomentumGrid {
    pub fn new(np_x: usize, np_y: usize, dp_x: f64, dp_y: f64) -> Result<Self> {
        for n in [np_x, np_y] {
            if n < 2 || n % 2 != 0 {
                return Err(CoreError::InvalidGrid(alloc::format!(
                    "momentum sizes must be positive and even, got {n}"
                )));
            }
        }
        if !(dp_x > 0.0 && dp_y > 0.0 && dp_x.is_finite() && dp_y.is_finite()) {
            return Err(CoreError::InvalidGrid("momentum spacing must be positive".into()));
        }
        Ok(Self { np_x, np_y, dp_x, dp_y })
    }

    /// `n × n` grid covering `[-p_max, p_max)` on both axes.
    pub fn window(n: usize, p_max: f64) -> Result<Self> {
        Self::new(n, n, 2.0 * p_max / n as f64, 2.0 * p_max / n as f64)
    }

    pub fn p_x(&self, q: usize) -> f64 {
        (q as f64 - (self.np_x / 2) as f64) * self.dp_x
    }

    pub fn p_y(&self, q: usize) -> f64 {
        (q as f64 - (self.np_y / 2) as f64) * self.dp_y
    }

    pub fn ds_x(&self) -> f64 {
        2.0 * PI / (self.np_x as f64 * self.dp_x)
    }

    pub fn ds_y(&self) -> f64 {
        2.0 * PI / (self.np_y as f64 * self.dp_y)
    }

    pub fn len(&self) -> usize {
        self.np_x * self.np_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dp_x * self.dp_y
    }

    /// Index of `-p` for momentum index `q` of an `n`-point axis, if it is
    /// on the grid (`q = 0` has no partner).
    pub fn mirror(n: usize, q: usize) -> Option<usize> {
        if q == 0 {
            None
        } else {
            Some(n - q)
        }
    }
}

/// Position grid, momentum grid and drift tolerance for one family of fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerPlan {
    pub positions: Grid2D,
    pub momentum: MomentumGrid,
    pub drift_limit: f64,
}

impl WignerPlan {
    /// Checks that the displacement span `2π/dp` covers twice the extent of
    /// `support` on each axis, as required for `ψ(r ± s/2)` to be sampled
    /// over the whole correlation.
    pub fn new(positions: Grid2D, momentum: MomentumGrid, support: &BoundingBox) -> Result<Self> {
        for (axis, dp, extent) in [('x', momentum.dp_x, support.width()), ('y', momentum.dp_y, support.height())] {
            let limit = PI / extent;
            if dp > limit * (1.0 + 1e-12) {
                return Err(CoreError::MomentumResolution { axis, dp, limit });
            }
        }
        Ok(Self { positions, momentum, drift_limit: DRIFT_LIMIT })
    }

    /// Cell-centred `n_r × n_r` positions over `support`, and an `n_p × n_p`
    /// momentum window `|p| <= p_max`.
    pub fn covering(support: &BoundingBox, n_r: usize, n_p: usize, p_max: f64) -> Result<Self> {
        let positions = cell_centred(support, n_r, n_r)?;
        Self::new(positions, MomentumGrid::window(n_p, p_max)?, support)
    }

    /// Positions on every `stride`-th node of `mode_grid` inside `support`,
    /// with the sub-lattice offset chosen to sit as symmetrically as
    /// possible about the centre of `support`. Mode values are then read at
    /// nodes without interpolation, so the resampled norm is a sub-lattice
    /// Riemann sum of the nodal norm.
    pub fn aligned(mode_grid: &Grid2D, support: &BoundingBox, stride: usize, momentum: MomentumGrid) -> Result<Self> {
        if stride == 0 {
            return Err(CoreError::InvalidGrid("stride must be positive".into()));
        }
        let axis = |origin: f64, h: f64, n: usize, lo: f64, hi: f64| -> Result<(f64, usize)> {
            let centre = 0.5 * (lo + hi);
            let mut best: Option<(f64, f64, usize)> = None;
            for r in 0..stride {
                let nodes: Vec<f64> =
                    (r..n).step_by(stride).map(|i| origin + i as f64 * h).filter(|&c| c > lo && c < hi).collect();
                if let (Some(&first), Some(&last)) = (nodes.first(), nodes.last()) {
                    let skew = (0.5 * (first + last) - centre).abs();
                    if best.map_or(true, |b| skew < b.0 - 1e-9 * h) {
                        best = Some((skew, first, nodes.len()));
                    }
                }
            }
            best.map(|b| (b.1, b.2)).ok_or(CoreError::EmptyInterior)
        };
        let g = mode_grid;
        let (x0, nx) = axis(g.x_min, g.dx, g.nx, support.x_min, support.x_max)?;
        let (y0, ny) = axis(g.y_min, g.dy, g.ny, support.y_min, support.y_max)?;
        let s = stride as f64;
        let positions = Grid2D::new(x0, y0, s * g.dx, s * g.dy, nx, ny)?;
        Self::new(positions, momentum, support)
    }

    pub fn with_drift_limit(mut self, limit: f64) -> Self {
        self.drift_limit = limit;
        self
    }

    /// `∑ ψ(r)² dx dy` on the position grid.
    pub fn norm_squared<W: Wavefunction + ?Sized>(&self, psi: &W) -> f64 {
        let g = &self.positions;
        pairwise_sum_by(g.len(), |n| {
            let v = psi.value(g.x(n % g.nx), g.y(n / g.nx));
            v * v
        }) * g.cell_area()
    }

    /// Resampled norm, or the drift error if it strays from 1.
    pub fn checked_norm<W: Wavefunction + ?Sized>(&self, psi: &W) -> Result<f64> {
        let norm = self.norm_squared(psi);
        let drift = (norm - 1.0).abs();
        if !(drift <= self.drift_limit) {
            return Err(CoreError::NormalizationDrift {
                drift,
                limit: self.drift_limit,
                dx: self.positions.dx,
                dy: self.positions.dy,
            });
        }
        Ok(norm)
    }

    /// Values per position node.
    pub fn block(&self) -> usize {
        self.momentum.len()
    }
}

/// `nx × ny` nodes at the centres of a regular tiling of `bbox`.
pub fn cell_centred(bbox: &BoundingBox, nx: usize, ny: usize) -> Result<Grid2D> {
    if nx == 0 || ny == 0 {
        return Err(CoreError::InvalidGrid("position grid needs at least one node".into()));
    }
    let dx = bbox.width() / nx as f64;
    let dy = bbox.height() / ny as f64;
    Grid2D::new(bbox.x_min + 0.5 * dx, bbox.y_min + 0.5 * dy, dx, dy, nx, ny)
}

/// Sampled 4D field, row-major in `(x, y, p_x, p_y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerField {
    values: Vec<f64>,
    positions: Grid2D,
    momentum: MomentumGrid,
    drift: f64,
    imag_residual: f64,
}

impl WignerField {
    /// Wraps values already in `(x, y, p_x, p_y)` order, e.g. from a dump.
    pub fn from_values(values: Vec<f64>, positions: Grid2D, momentum: MomentumGrid) -> Result<Self> {
        if values.len() != positions.len() * momentum.len() {
            return Err(CoreError::GridMismatch(alloc::format!(
                "{} values for a {}x{}x{}x{} field",
                values.len(),
                positions.nx,
                positions.ny,
                momentum.np_x,
                momentum.np_y
            )));
        }
        Ok(Self { values, positions, momentum, drift: 0.0, imag_residual: 0.0 })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn positions(&self) -> &Grid2D {
        &self.positions
    }

    pub fn momentum(&self) -> &MomentumGrid {
        &self.momentum
    }

    /// `|∑ψ² dx dy - 1|` before renormalization on the position grid.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Largest imaginary part of the transform relative to `max |W|`.
    pub fn imag_residual(&self) -> f64 {
        self.imag_residual
    }

    pub fn cell_volume(&self) -> f64 {
        self.positions.cell_area() * self.momentum.cell_area()
    }

    pub fn index(&self, i: usize, j: usize, qx: usize, qy: usize) -> usize {
        ((j * self.positions.nx + i) * self.momentum.np_x + qx) * self.momentum.np_y + qy
    }

    pub fn at(&self, i: usize, j: usize, qx: usize, qy: usize) -> f64 {
        self.values[self.index(i, j, qx, qy)]
    }

    pub fn same_grids(&self, other: &WignerField) -> bool {
        self.positions == other.positions && self.momentum == other.momentum
    }

    /// `∑ W dV`.
    pub fn integral(&self) -> f64 {
        pairwise_sum_by(self.values.len(), |n| self.values[n]) * self.cell_volume()
    }
}

/// Phase tables for one axis: `cos(2π t/n)` and `sin(2π t/n)` with the
/// reflections `t -> n - t` exact.
struct Twiddles {
    cos: Vec<f64>,
    sin: Vec<f64>,
    n: usize,
}

impl Twiddles {
    fn new(n: usize) -> Self {
        let mut cos = vec![0.0; n];
        let mut sin = vec![0.0; n];
        for t in 0..=n / 2 {
            let phase = 2.0 * PI * t as f64 / n as f64;
            cos[t] = libm::cos(phase);
            sin[t] = libm::sin(phase);
            if t > 0 && t < n - t {
                cos[n - t] = cos[t];
                sin[n - t] = -sin[t];
            }
        }
        if n % 2 == 0 {
            sin[n / 2] = 0.0;
        }
        Self { cos, sin, n }
    }

    /// Table slot of `p_q·s_m`, with both indices centred.
    fn slot(&self, q: usize, m: usize) -> usize {
        let h = (self.n / 2) as i64;
        let prod = (q as i64 - h) * (m as i64 - h);
        prod.rem_euclid(self.n as i64) as usize
    }
}

/// Full 4D field for a normalized wavefunction. The resampled norm on the
/// position grid must be within `plan.drift_limit` of one; the field is
/// then rescaled so that `∑ W dV = 1` holds to rounding.
pub fn wigner_transform<W: Wavefunction + ?Sized>(psi: &W, plan: &WignerPlan) -> Result<WignerField> {
    let norm = plan.checked_norm(psi)?;
    let g = plan.positions;
    let mut values = vec![0.0; g.len() * plan.block()];
    let imag = transform_rows(psi, plan, norm, 0..g.len(), &mut values);
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(WignerField {
        values,
        positions: g,
        momentum: plan.momentum,
        drift: (norm - 1.0).abs(),
        imag_residual: if peak > 0.0 { imag / peak } else { 0.0 },
    })
}

/// Computes the position nodes `nodes` (flat indices, `i` fastest) into
/// `out`, which holds `plan.block()` values per node. Returns the largest
/// absolute imaginary part seen. Disjoint node ranges may be filled
/// independently.
pub fn transform_rows<W: Wavefunction + ?Sized>(
    psi: &W,
    plan: &WignerPlan,
    norm: f64,
    nodes: Range<usize>,
    out: &mut [f64],
) -> f64 {
    let m = plan.momentum;
    let (nx, ny) = (m.np_x, m.np_y);
    assert_eq!(out.len(), nodes.len() * nx * ny, "output block size");
    let tx = Twiddles::new(nx);
    let ty = Twiddles::new(ny);
    let slot_x: Vec<usize> = (0..nx * nx).map(|k| tx.slot(k / nx, k % nx)).collect();
    let slot_y: Vec<usize> = (0..ny * ny).map(|k| ty.slot(k / ny, k % ny)).collect();
    let (dsx, dsy) = (m.ds_x(), m.ds_y());
    let scale = dsx * dsy / (4.0 * PI * PI) / norm;
    let half_x: Vec<f64> = (0..nx).map(|a| 0.5 * (a as f64 - (nx / 2) as f64) * dsx).collect();
    let half_y: Vec<f64> = (0..ny).map(|b| 0.5 * (b as f64 - (ny / 2) as f64) * dsy).collect();

    let g = plan.positions;
    let mut corr = vec![0.0; nx * ny];
    let mut ac = vec![0.0; nx * ny];
    let mut asn = vec![0.0; nx * ny];
    let mut worst_imag = 0.0f64;
    for (slot, node) in nodes.enumerate() {
        let (x, y) = (g.x(node % g.nx), g.y(node / g.nx));
        let mut any = false;
        for a in 0..nx {
            for b in 0..ny {
                let (hx, hy) = (half_x[a], half_y[b]);
                let c = psi.value(x - hx, y - hy) * psi.value(x + hx, y + hy);
                any |= c != 0.0;
                corr[a * ny + b] = c;
            }
        }
        let block = &mut out[slot * nx * ny..(slot + 1) * nx * ny];
        if !any {
            block.iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        // transform over s_y for every s_x
        for a in 0..nx {
            let row = &corr[a * ny..(a + 1) * ny];
            for qy in 0..ny {
                let (mut sc, mut ss) = (0.0, 0.0);
                for (b, &c) in row.iter().enumerate() {
                    let t = slot_y[qy * ny + b];
                    sc += c * ty.cos[t];
                    ss += c * ty.sin[t];
                }
                ac[a * ny + qy] = sc;
                asn[a * ny + qy] = ss;
            }
        }
        // then over s_x, keeping the real part
        for qx in 0..nx {
            for qy in 0..ny {
                let (mut re, mut im) = (0.0, 0.0);
                for a in 0..nx {
                    let t = slot_x[qx * nx + a];
                    let (c, s) = (tx.cos[t], tx.sin[t]);
                    re += c * ac[a * ny + qy] - s * asn[a * ny + qy];
                    im += s * ac[a * ny + qy] + c * asn[a * ny + qy];
                }
                block[qx * ny + qy] = re * scale;
                worst_imag = worst_imag.max((im * scale).abs());
            }
        }
    }
    worst_imag
}

/// Which 2D section of phase space a slice shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceAxis {
    /// `W(x, y = 0, p_x, p_y = 0)`
    X,
    /// `W(x = 0, y, p_x = 0, p_y)`
    Y,
}

/// Section of the Wigner function through the origin of the transverse pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerSlice {
    pub axis: SliceAxis,
    /// coordinates along the cut
    pub coords: Vec<f64>,
    /// momenta conjugate to the cut coordinate
    pub momenta: Vec<f64>,
    /// row-major `(coordinate, momentum)`
    pub values: Vec<f64>,
}

impl WignerSlice {
    pub fn at(&self, i: usize, q: usize) -> f64 {
        self.values[i * self.momenta.len() + q]
    }
}

/// Slice at `points` positions along the cut (end to end over the plan's
/// position range) and `momenta` momenta over the plan's momentum window. The transverse displacement integral uses the
/// plan's transverse sampling and the normalization is the plan's resampled
/// norm, so at matching resolution the slice reproduces the section of the
/// full field.
pub fn wigner_slice<W: Wavefunction + ?Sized>(
    psi: &W,
    plan: &WignerPlan,
    axis: SliceAxis,
    points: usize,
    momenta: usize,
) -> Result<WignerSlice> {
    if points < 2 || momenta < 2 || momenta % 2 != 0 {
        return Err(CoreError::InvalidGrid(alloc::format!(
            "slice needs at least 2 points and an even momentum count, got {points} x {momenta}"
        )));
    }
    let resolution = momenta;
    let g = plan.positions;
    let m = plan.momentum;
    let (lo, hi, across_lo, across_hi, n_along, dp_along, n_across, ds_across) = match axis {
        SliceAxis::X => (g.x_min, g.x_max(), g.y_min, g.y_max(), m.np_x, m.dp_x, m.np_y, m.ds_y()),
        SliceAxis::Y => (g.y_min, g.y_max(), g.x_min, g.x_max(), m.np_y, m.dp_y, m.np_x, m.ds_x()),
    };
    if !(across_lo <= 0.0 && across_hi >= 0.0) {
        return Err(CoreError::EmptyCut);
    }
    let norm = plan.checked_norm(psi)?;
    // keep the plan's momentum window; the displacement step follows from it
    let dp = dp_along * n_along as f64 / resolution as f64;
    let ds = 2.0 * PI / (resolution as f64 * dp);
    let tw = Twiddles::new(resolution);
    let coords: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let momenta: Vec<f64> = (0..resolution).map(|q| (q as f64 - (resolution / 2) as f64) * dp).collect();
    let half_across: Vec<f64> = (0..n_across).map(|b| 0.5 * (b as f64 - (n_across / 2) as f64) * ds_across).collect();
    let scale = ds * ds_across / (4.0 * PI * PI) / norm;

    let sample = |u: f64, v: f64| match axis {
        SliceAxis::X => psi.value(u, v),
        SliceAxis::Y => psi.value(v, u),
    };
    let mut values = vec![0.0; points * resolution];
    let mut reduced = vec![0.0; resolution];
    let mut any = false;
    for (i, &u) in coords.iter().enumerate() {
        for (a, r) in reduced.iter_mut().enumerate() {
            let h = 0.5 * (a as f64 - (resolution / 2) as f64) * ds;
            let mut acc = 0.0;
            for &hv in &half_across {
                acc += sample(u - h, -hv) * sample(u + h, hv);
            }
            *r = acc;
            any |= acc != 0.0;
        }
        for q in 0..resolution {
            let mut re = 0.0;
            for (a, &r) in reduced.iter().enumerate() {
                re += r * tw.cos[tw.slot(q, a)];
            }
            values[i * resolution + q] = re * scale;
        }
    }
    if !any {
        return Err(CoreError::EmptyCut);
    }
    Ok(WignerSlice { axis, coords, momenta, values })
}

/// Position density `∫W d²p` (per position node, `i` fastest) and momentum
/// density `∫W d²r` (per momentum node, `p_y` fastest).
pub fn marginals(field: &WignerField) -> (Vec<f64>, Vec<f64>) {
    let g = field.positions;
    let m = field.momentum;
    let block = m.len();
    let v = &field.values;
    let position = (0..g.len()).map(|n| pairwise_sum_by(block, |k| v[n * block + k]) * m.cell_area()).collect();
    let momentum = (0..block).map(|k| pairwise_sum_by(g.len(), |n| v[n * block + k]) * g.cell_area()).collect();
    (position, momentum)
}

/// `(2π)² ∑ W² dV`, equal to one for a pure state.
pub fn purity(field: &WignerField) -> f64 {
    let v = &field.values;
    4.0 * PI * PI * pairwise_sum_by(v.len(), |n| v[n] * v[n]) * field.cell_volume()
}

/// Largest `|W(r, p) - W(r, -p)|` over the grid.
pub fn inversion_asymmetry(field: &WignerField) -> f64 {
    let g = field.positions;
    let m = field.momentum;
    let mut worst = 0.0f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            for qx in 1..m.np_x {
                for qy in 1..m.np_y {
                    let a = field.at(i, j, qx, qy);
                    let b = field.at(i, j, m.np_x - qx, m.np_y - qy);
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    worst
}

/// Deviations of one field from the exact Wigner identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldIntegrity {
    /// `|∑ W dV - 1|`
    pub integral_error: f64,
    pub inversion_asymmetry: f64,
    pub purity: f64,
    /// max-abs gap between `∫ W dp` and the resampled `|ψ|²`
    pub marginal_error: Option<f64>,
}

/// Pairwise `(∑ w, ∑ w²)` in a single sweep.
fn moments(w: &[f64]) -> (f64, f64) {
    if w.len() <= 64 {
        w.iter().fold((0.0, 0.0), |(s, q), &v| (s + v, q + v * v))
    } else {
        let (lo, hi) = w.split_at(w.len() / 2);
        let (a, b) = (moments(lo), moments(hi));
        (a.0 + b.0, a.1 + b.1)
    }
}

/// Integrity suite for `field` in one pass over the position blocks; the
/// position marginal is compared with `psi` when given.
pub fn field_integrity<W: Wavefunction + ?Sized>(field: &WignerField, psi: Option<&W>) -> FieldIntegrity {
    let g = field.positions;
    let m = field.momentum;
    let (npx, npy) = (m.np_x, m.np_y);
    let block = npx * npy;
    let mut sums = Vec::with_capacity(g.len());
    let mut squares = Vec::with_capacity(g.len());
    let mut asymmetry = 0.0f64;
    for w in field.values.chunks_exact(block) {
        let (sum, square) = moments(w);
        sums.push(sum);
        squares.push(square);
        // each pair once, except along the p_x = 0 row
        for qx in 1..=npx / 2 {
            let row = &w[qx * npy..(qx + 1) * npy];
            let mirror = &w[(npx - qx) * npy..(npx - qx + 1) * npy];
            for qy in 1..npy {
                asymmetry = asymmetry.max((row[qy] - mirror[npy - qy]).abs());
            }
        }
    }
    let marginal_error = psi.map(|psi| {
        let rho: Vec<f64> = (0..g.len())
            .map(|n| {
                let v = psi.value(g.x(n % g.nx), g.y(n / g.nx));
                v * v
            })
            .collect();
        let norm = pairwise_sum(&rho) * g.cell_area();
        let dp = m.cell_area();
        sums.iter().zip(&rho).fold(0.0f64, |worst, (s, r)| worst.max((s * dp - r / norm).abs()))
    });
    let cell = field.cell_volume();
    FieldIntegrity {
        integral_error: (pairwise_sum(&sums) * cell - 1.0).abs(),
        inversion_asymmetry: asymmetry,
        purity: 4.0 * PI * PI * pairwise_sum(&squares) * cell,
        marginal_error,
    }
}
