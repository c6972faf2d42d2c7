//! Complex Wigner entropy, negative volume and the sign-resolved channels
//! `W = Z₊P₊ - Z₋P₋`.
//!
//! All integrals are pairwise Riemann sums over the full grid.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::quadrature::pairwise_sum_by;
use crate::wigner::WignerField;

/// Cells with `|W|` below this contribute nothing to `h_r` (`t ln t -> 0`).
pub const LOG_FLOOR: f64 = 1e-300;

/// Below this negative mass the negative channel has no shape.
pub const DEGENERATE_MASS: f64 = 1e-12;

/// Relative agreement required between the two `h_i` routes.
pub const ROUTE_TOL: f64 = 1e-10;

/// `ℋ[W] = h_r + i h_i`, with `h_i = πN`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEntropy {
    pub h_r: f64,
    pub h_i: f64,
    /// negative volume
    pub n: f64,
}

/// `∑_{W<0} |W| dV`.
pub fn negative_volume_of(values: &[f64], cell: f64) -> f64 {
    pairwise_sum_by(values.len(), |i| if values[i] < 0.0 { -values[i] } else { 0.0 }) * cell
}

pub fn negative_volume(field: &WignerField) -> f64 {
    negative_volume_of(field.values(), field.cell_volume())
}

/// `∑ |W| dV`; for a normalized field `N = (∑|W| dV - 1)/2`.
pub fn absolute_volume_of(values: &[f64], cell: f64) -> f64 {
    pairwise_sum_by(values.len(), |i| values[i].abs()) * cell
}

/// Entropy of sampled values. `h_i` is π times the negative volume; the
/// principal-branch route `Im(-W ln W)` is evaluated independently and
/// must agree to [`ROUTE_TOL`].
pub fn complex_entropy_of(values: &[f64], cell: f64) -> Result<ComplexEntropy> {
    let h_r = -pairwise_sum_by(values.len(), |i| {
        let w = values[i];
        if w.abs() < LOG_FLOOR {
            0.0
        } else {
            w * libm::log(w.abs())
        }
    }) * cell;
    let n = negative_volume_of(values, cell);
    let h_i = core::f64::consts::PI * n;
    let arg = pairwise_sum_by(values.len(), |i| {
        let w = values[i];
        if w < 0.0 {
            let z = Complex64::new(w, 0.0);
            (-z * z.ln()).im
        } else {
            0.0
        }
    }) * cell;
    if (arg - h_i).abs() > ROUTE_TOL * h_i {
        return Err(CoreError::RouteMismatch { pi_n: h_i, arg });
    }
    Ok(ComplexEntropy { h_r, h_i, n })
}

pub fn complex_entropy(field: &WignerField) -> Result<ComplexEntropy> {
    complex_entropy_of(field.values(), field.cell_volume())
}

/// Channel masses over borrowed values; the shapes `P±` are evaluated on
/// demand.
#[derive(Debug, Clone, Copy)]
pub struct ChannelDecomposition<'a> {
    values: &'a [f64],
    cell: f64,
    z_plus: f64,
    z_minus: f64,
}

/// Split of sampled values. Fails with [`CoreError::DegenerateChannel`]
/// when `Z₋ < 1e-12`.
pub fn split_values(values: &[f64], cell: f64) -> Result<ChannelDecomposition<'_>> {
    let z_plus = pairwise_sum_by(values.len(), |i| values[i].max(0.0)) * cell;
    let z_minus = negative_volume_of(values, cell);
    if z_minus < DEGENERATE_MASS {
        return Err(CoreError::DegenerateChannel(z_minus));
    }
    if !(z_plus > 0.0) {
        return Err(CoreError::DegenerateChannel(z_plus));
    }
    Ok(ChannelDecomposition { values, cell, z_plus, z_minus })
}

pub fn split_channels(field: &WignerField) -> Result<ChannelDecomposition<'_>> {
    split_values(field.values(), field.cell_volume())
}

impl<'a> ChannelDecomposition<'a> {
    pub fn z_plus(&self) -> f64 {
        self.z_plus
    }

    pub fn z_minus(&self) -> f64 {
        self.z_minus
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    /// `P₊ = max(W, 0)/Z₊`.
    pub fn p_plus(&self, i: usize) -> f64 {
        self.values[i].max(0.0) / self.z_plus
    }

    /// `P₋ = max(-W, 0)/Z₋`.
    pub fn p_minus(&self, i: usize) -> f64 {
        (-self.values[i]).max(0.0) / self.z_minus
    }

    pub fn in_plus(&self, i: usize) -> bool {
        self.values[i] > 0.0
    }

    pub fn in_minus(&self, i: usize) -> bool {
        self.values[i] < 0.0
    }

    pub fn plus(&self) -> ChannelDensity<'_, 'a> {
        ChannelDensity { split: self, negative: false }
    }

    pub fn minus(&self) -> ChannelDensity<'_, 'a> {
        ChannelDensity { split: self, negative: true }
    }

    /// `Z₊P₊ - Z₋P₋` at cell `i`.
    pub fn reassemble(&self, i: usize) -> f64 {
        self.z_plus * self.p_plus(i) - self.z_minus * self.p_minus(i)
    }
}

/// Pointwise density on a flat grid.
pub trait Density {
    fn len(&self) -> usize;
    fn at(&self, i: usize) -> f64;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Density for [f64] {
    fn len(&self) -> usize {
        <[f64]>::len(self)
    }
    fn at(&self, i: usize) -> f64 {
        self[i]
    }
}

impl Density for alloc::vec::Vec<f64> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn at(&self, i: usize) -> f64 {
        self[i]
    }
}

/// One channel shape `P±` of a decomposition.
#[derive(Debug, Clone, Copy)]
pub struct ChannelDensity<'s, 'a> {
    split: &'s ChannelDecomposition<'a>,
    negative: bool,
}

impl Density for ChannelDensity<'_, '_> {
    fn len(&self) -> usize {
        self.split.len()
    }
    fn at(&self, i: usize) -> f64 {
        if self.negative {
            self.split.p_minus(i)
        } else {
            self.split.p_plus(i)
        }
    }
}
