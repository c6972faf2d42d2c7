//! Five-point negative Laplacian on the interior nodes of a mask.
//!
//! Boundary-adjacent rows use the symmetric ghost-node closure: a wall at
//! fraction `t` of a cell along one direction contributes `1/(t·h²)` to the
//! diagonal instead of coupling to the neighbour. With `t = 1` this is the
//! plain dropped-coupling stencil. The operator stays symmetric positive
//! definite and varies continuously as the wall moves across nodes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::geometry::{DomainMask, EXTERIOR};

/// Reflection sector about `y = 0` for shapes symmetric in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Sparse symmetric operator in a bandwidth-reducing node ordering.
#[derive(Debug, Clone)]
pub struct LaplaceOperator {
    /// operator index -> mask interior index
    order: Vec<usize>,
    /// mask interior index -> operator index (`EXTERIOR` outside a sector)
    rank: Vec<usize>,
    /// for sector operators: mirror interior index of each operator row, and sign
    mirror: Option<(Vec<usize>, f64)>,
    interior_len: usize,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    bandwidth: usize,
}

pub fn assemble_operator(mask: &DomainMask) -> LaplaceOperator {
    assemble(mask, None)
}

/// Operator restricted to the `y > 0` half of a mask, with the lower half
/// reconstructed by reflection. The grid must be mirror-symmetric about `y = 0`
/// with no node row on the axis.
pub fn assemble_sector(mask: &DomainMask, parity: Parity) -> Result<LaplaceOperator> {
    let g = mask.grid();
    let scale = g.dy * g.ny as f64;
    if g.ny % 2 != 0 || (g.y_min + g.y_max()).abs() > 1e-9 * scale {
        return Err(CoreError::InvalidGrid(
            "parity sectors need an even row count placed symmetrically about y = 0".into(),
        ));
    }
    for &node in mask.interior_nodes() {
        let (i, j) = (node % g.nx, node / g.nx);
        if mask.interior_index(g.index(i, g.ny - 1 - j)).is_none() {
            return Err(CoreError::InvalidGrid("mask is not symmetric about y = 0".into()));
        }
    }
    Ok(assemble(mask, Some(parity)))
}

fn assemble(mask: &DomainMask, sector: Option<Parity>) -> LaplaceOperator {
    let grid = mask.grid();
    let total = mask.interior_count();
    let (ix, iy) = (1.0 / (grid.dx * grid.dx), 1.0 / (grid.dy * grid.dy));
    let half = grid.ny / 2;
    let kept = |k: usize| sector.is_none() || mask.interior_nodes()[k] / grid.nx >= half;

    // interior nodes are stored row-major; try column-major as well
    let row_major: Vec<usize> = (0..total).filter(|&k| kept(k)).collect();
    let n = row_major.len();
    let mut col_major = row_major.clone();
    col_major.sort_by_key(|&k| {
        let node = mask.interior_nodes()[k];
        (node % grid.nx, node / grid.nx)
    });
    let neighbours = |k: usize| -> [(Option<usize>, f64); 4] {
        let node = mask.interior_nodes()[k];
        let (i, j) = (node % grid.nx, node / grid.nx);
        let probe = |ni: usize, nj: usize| {
            if ni < grid.nx && nj < grid.ny {
                mask.interior_index(grid.index(ni, nj))
            } else {
                None
            }
        };
        [
            (probe(i.wrapping_sub(1), j), ix),
            (probe(i + 1, j), ix),
            (probe(i, j.wrapping_sub(1)), iy),
            (probe(i, j + 1), iy),
        ]
    };
    let bandwidth_of = |order: &[usize]| {
        let mut rank = vec![EXTERIOR; total];
        for (r, &k) in order.iter().enumerate() {
            rank[k] = r;
        }
        let mut w = 0;
        for &k in order {
            for (nb, _) in neighbours(k) {
                if let Some(m) = nb {
                    if rank[m] != EXTERIOR {
                        w = w.max(rank[k].abs_diff(rank[m]));
                    }
                }
            }
        }
        (w, rank)
    };
    let (w_row, rank_row) = bandwidth_of(&row_major);
    let (w_col, rank_col) = bandwidth_of(&col_major);
    let (order, rank, bandwidth) =
        if w_col < w_row { (col_major, rank_col, w_col) } else { (row_major, rank_row, w_row) };
    let sign = sector.map_or(1.0, Parity::sign);

    let mut diag = vec![0.0; n];
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(4 * n);
    let mut vals = Vec::with_capacity(4 * n);
    row_ptr.push(0);
    for (r, &k) in order.iter().enumerate() {
        let arms = mask.arms()[k];
        let mut d = 0.0;
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(4);
        for (dir, (nb, inv_h2)) in neighbours(k).into_iter().enumerate() {
            match nb {
                Some(m) if rank[m] != EXTERIOR => {
                    d += inv_h2;
                    row.push((rank[m], -inv_h2));
                }
                // reflected partner across the axis: couples to this node itself
                Some(_) => d += inv_h2 * (1.0 - sign),
                None => d += inv_h2 / arms[dir],
            }
        }
        row.sort_by_key(|e| e.0);
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        diag[r] = d;
        row_ptr.push(cols.len());
    }
    let mirror = sector.map(|p| {
        let images = order
            .iter()
            .map(|&k| {
                let node = mask.interior_nodes()[k];
                let (i, j) = (node % grid.nx, node / grid.nx);
                mask.interior_index(grid.index(i, grid.ny - 1 - j)).unwrap_or(EXTERIOR)
            })
            .collect();
        (images, p.sign())
    });
    LaplaceOperator { order, rank, mirror, interior_len: total, diag, row_ptr, cols, vals, bandwidth }
}

impl LaplaceOperator {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn diagonal(&self, r: usize) -> f64 {
        self.diag[r]
    }

    /// Off-diagonal entries of row `r` as `(column, value)`, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        if r == c {
            return self.diag[r];
        }
        self.row(r).find(|&(col, _)| col == c).map_or(0.0, |(_, v)| v)
    }

    /// `y = A x` in operator ordering.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.dim() {
            let mut acc = self.diag[r] * x[r];
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|r| (0..n).map(|c| self.entry(r, c)).collect()).collect()
    }

    /// Operator-ordered vector -> mask interior ordering. Sector operators
    /// fill the mirrored half by reflection.
    pub fn to_interior(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.interior_len];
        for (r, &k) in self.order.iter().enumerate() {
            out[k] = x[r];
        }
        if let Some((images, sign)) = &self.mirror {
            for (r, &m) in images.iter().enumerate() {
                if m != EXTERIOR && self.rank[m] == EXTERIOR {
                    out[m] = sign * x[r];
                }
            }
        }
        out
    }

    /// Mask interior ordering -> operator ordering (sector operators keep the
    /// `y > 0` half).
    pub fn from_interior(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (k, &r) in self.rank.iter().enumerate() {
            if r != EXTERIOR {
                out[r] = x[k];
            }
        }
        out
    }

    /// Gershgorin upper bound on the spectrum.
    pub fn spectral_bound(&self) -> f64 {
        (0..self.dim()).map(|r| self.diag[r] + self.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}
