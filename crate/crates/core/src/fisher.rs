//! Channel Fisher informations from a central-difference triple of fields
//! at `θ - δ, θ, θ + δ`.
//!
//! The negative channel is handled through the score `S = ∂_θ ln|W|` on a
//! mask shared by all three fields: its `P₋`-mean is `∂_θ ln N`, its
//! variance is `F₋` and its second moment is `F̃₋`. Computing all three
//! from one set of weights makes `F̃₋ = F₋ + E[S]²` and the Cauchy–Schwarz
//! control `|dh_i/dθ| <= πN sqrt(F̃₋)` hold for the discrete numbers
//! themselves.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{CoreError, Result};
use crate::negativity::{split_channels, Density};
use crate::quadrature::pairwise_sum_by;
use crate::wigner::WignerField;

/// Default score floor, relative to `max |W|` of the central field.
pub const SCORE_FLOOR: f64 = 1e-6;

/// Masked share of channel mass above which a warning is logged.
pub const MASK_WARNING: f64 = 0.05;

/// `∂_θ ln|W|` on the shared negative support, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreField {
    values: Vec<f64>,
    mask: Vec<bool>,
    count: usize,
}

impl ScoreField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Number of cells on the mask.
    pub fn count(&self) -> usize {
        self.count
    }
}

fn peak<D: Density + ?Sized>(d: &D) -> f64 {
    (0..d.len()).fold(0.0f64, |m, i| m.max(d.at(i).abs()))
}

fn check_lengths(a: usize, b: usize, c: usize) -> Result<()> {
    if a != b || b != c {
        return Err(CoreError::GridMismatch(alloc::format!("field lengths {a}, {b}, {c} differ")));
    }
    Ok(())
}

fn check_step(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(CoreError::InvalidArgument(alloc::format!("finite-difference step {delta} must be positive")));
    }
    Ok(())
}

/// Score of signed fields. The mask keeps cells negative in all three
/// fields whose flanking magnitudes exceed `tau · max|W(θ)|`.
pub fn score_field(lower: &[f64], center: &[f64], upper: &[f64], delta: f64, tau: f64) -> Result<ScoreField> {
    check_lengths(lower.len(), center.len(), upper.len())?;
    check_step(delta)?;
    let floor = tau * peak(center);
    let mut values = vec![0.0; center.len()];
    let mut mask = vec![false; center.len()];
    let mut count = 0;
    for i in 0..center.len() {
        let (l, c, u) = (lower[i], center[i], upper[i]);
        if l < 0.0 && c < 0.0 && u < 0.0 && -l > floor && -u > floor {
            values[i] = (libm::log(-u) - libm::log(-l)) / (2.0 * delta);
            mask[i] = true;
            count += 1;
        }
    }
    if count == 0 {
        return Err(CoreError::EmptyMask);
    }
    Ok(ScoreField { values, mask, count })
}

/// Weighted moments of the score under `P₋` renormalized on the mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreMoments {
    /// `E[S]`
    pub mean: f64,
    /// `E[(S - E[S])²]`
    pub variance: f64,
    /// `E[S²]`
    pub second: f64,
    /// `P₋` mass on the mask (before renormalization), in units of the cell volume
    pub mask_mass: f64,
}

pub fn score_moments<D: Density + ?Sized>(score: &ScoreField, p_minus: &D) -> ScoreMoments {
    let n = score.values.len();
    let w = |i: usize| if score.mask[i] { p_minus.at(i) } else { 0.0 };
    let mass = pairwise_sum_by(n, w);
    let mean = pairwise_sum_by(n, |i| w(i) * score.values[i]) / mass;
    let second = pairwise_sum_by(n, |i| w(i) * score.values[i] * score.values[i]) / mass;
    let variance = pairwise_sum_by(n, |i| {
        let d = score.values[i] - mean;
        w(i) * d * d
    }) / mass;
    ScoreMoments { mean, variance, second, mask_mass: mass }
}

/// `F̃₋ = E_{P₋}[S²]`, with `P₋` renormalized on the score mask.
pub fn noncentered_fisher<D: Density + ?Sized>(score: &ScoreField, p_minus: &D) -> f64 {
    score_moments(score, p_minus).second
}

/// Fisher information of one channel shape plus the share of its mass
/// left out by the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelFisher {
    pub value: f64,
    pub masked_fraction: f64,
}

/// `∑ P_θ ([ln P_{θ+δ} - ln P_{θ-δ}]/2δ)² dV` over cells where all three
/// densities exceed `tau · max P_θ`.
pub fn channel_fisher<D: Density + ?Sized>(
    lower: &D,
    center: &D,
    upper: &D,
    delta: f64,
    tau: f64,
    cell: f64,
) -> Result<ChannelFisher> {
    check_lengths(lower.len(), center.len(), upper.len())?;
    check_step(delta)?;
    let n = center.len();
    let floor = tau * peak(center);
    let keep = |i: usize| lower.at(i) > floor && center.at(i) > floor && upper.at(i) > floor;
    let kept = pairwise_sum_by(n, |i| if keep(i) { center.at(i) } else { 0.0 });
    if !(kept > 0.0) {
        return Err(CoreError::EmptyMask);
    }
    let total = pairwise_sum_by(n, |i| center.at(i));
    let value = pairwise_sum_by(n, |i| {
        if keep(i) {
            let s = (libm::log(upper.at(i)) - libm::log(lower.at(i))) / (2.0 * delta);
            center.at(i) * s * s
        } else {
            0.0
        }
    }) * cell;
    let masked_fraction = if total > 0.0 { (1.0 - kept / total).max(0.0) } else { 0.0 };
    if masked_fraction > MASK_WARNING {
        log::warn!("channel Fisher floor excludes {:.1}% of the channel mass", 100.0 * masked_fraction);
    }
    Ok(ChannelFisher { value, masked_fraction })
}

/// Everything computed from one `(θ - δ, θ, θ + δ)` triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherReport {
    pub delta: f64,
    pub z_plus: f64,
    /// negative volume of the central field
    pub n: f64,
    pub f_plus: f64,
    /// `Var_{P₋}(S)`
    pub f_minus: f64,
    pub f_tilde_minus: f64,
    /// `E_{P₋}[S]`
    pub mean_score: f64,
    /// `[N(θ+δ) - N(θ-δ)]/2δ`
    pub dn_dtheta: f64,
    /// `N · E_{P₋}[S]`
    pub dn_dtheta_score: f64,
    /// `π dN/dθ`, central-difference route
    pub dhi_fd: f64,
    /// `π N E_{P₋}[S]`, mask-consistent route
    pub dhi_score: f64,
    /// `π N sqrt(F̃₋)`
    pub bound_rhs: f64,
    pub slack: f64,
    /// `F̃₋ - F₋ - E[S]²`
    pub decomposition_residual: f64,
    /// share of `P₋` mass excluded from the score mask
    pub masked_fraction: f64,
    pub masked_fraction_plus: f64,
    /// `F₋` through the `ln P₋` channel route, for comparison with the variance route
    pub f_minus_log_route: f64,
}

/// Fisher report for three gauge-aligned fields on identical grids.
pub fn fisher_report(
    lower: &WignerField,
    center: &WignerField,
    upper: &WignerField,
    delta: f64,
    tau: f64,
) -> Result<FisherReport> {
    if !center.same_grids(lower) || !center.same_grids(upper) {
        return Err(CoreError::GridMismatch("Fisher triple fields live on different grids".into()));
    }
    let cell = center.cell_volume();
    let (sl, sc, su) = (split_channels(lower)?, split_channels(center)?, split_channels(upper)?);
    let score = score_field(lower.values(), center.values(), upper.values(), delta, tau)?;
    let minus = sc.minus();
    let m = score_moments(&score, &minus);
    let masked_fraction = (1.0 - m.mask_mass * cell).max(0.0);
    if masked_fraction > MASK_WARNING {
        log::warn!("score floor excludes {:.1}% of the negative mass", 100.0 * masked_fraction);
    }
    let plus = channel_fisher(&sl.plus(), &sc.plus(), &su.plus(), delta, tau, cell)?;
    let minus_log = channel_fisher(&sl.minus(), &minus, &su.minus(), delta, tau, cell)?;

    let n = sc.z_minus();
    let dn_dtheta = (su.z_minus() - sl.z_minus()) / (2.0 * delta);
    let dn_dtheta_score = n * m.mean;
    let bound_rhs = PI * n * libm::sqrt(m.second);
    let dhi_score = PI * dn_dtheta_score;
    Ok(FisherReport {
        delta,
        z_plus: sc.z_plus(),
        n,
        f_plus: plus.value,
        f_minus: m.variance,
        f_tilde_minus: m.second,
        mean_score: m.mean,
        dn_dtheta,
        dn_dtheta_score,
        dhi_fd: PI * dn_dtheta,
        dhi_score,
        bound_rhs,
        slack: bound_rhs - dhi_score.abs(),
        decomposition_residual: m.second - m.variance - m.mean * m.mean,
        masked_fraction,
        masked_fraction_plus: plus.masked_fraction,
        f_minus_log_route: minus_log.value,
    })
}

/// `F̃₋ - F₋ - (dN/dθ / N)²` with the mask-consistent derivative.
pub fn verify_decomposition(report: &FisherReport) -> f64 {
    let growth = report.dn_dtheta_score / report.n;
    report.f_tilde_minus - report.f_minus - growth * growth
}

/// `πN sqrt(F̃₋) - |dh_i/dθ|` with the mask-consistent derivative.
pub fn fisher_bound_check(report: &FisherReport) -> f64 {
    report.bound_rhs - report.dhi_score.abs()
}

/// Per-sample input to [`ac_center_diagnostics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterSample {
    pub theta: f64,
    pub h_i: f64,
    pub mean_score: f64,
    pub f_minus: f64,
    pub f_tilde_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterReport {
    /// sample index of the largest interior local maximum of `h_i`
    pub index: usize,
    pub theta: f64,
    /// vertex of the parabola through the three samples around `index`
    pub theta_refined: f64,
    /// `|E[S]| / sqrt(F̃₋)`
    pub mean_score_ratio: f64,
    /// `|F̃₋ - F₋| / F̃₋`
    pub centering: f64,
}

/// Locates the `h_i` maximum among interior samples and reports how close
/// the score is to being centred there.
pub fn ac_center_diagnostics(samples: &[CenterSample]) -> Result<CenterReport> {
    let h: Vec<f64> = samples.iter().map(|s| s.h_i).collect();
    let index = interior_maximum(&h).ok_or_else(|| {
        log::warn!("h_i has no interior local maximum over the supplied samples");
        CoreError::NoExtremum
    })?;
    let s = samples[index];
    let theta_refined = parabola_vertex(
        [samples[index - 1].theta, s.theta, samples[index + 1].theta],
        [h[index - 1], h[index], h[index + 1]],
    );
    Ok(CenterReport {
        index,
        theta: s.theta,
        theta_refined,
        mean_score_ratio: s.mean_score.abs() / libm::sqrt(s.f_tilde_minus),
        centering: (s.f_tilde_minus - s.f_minus).abs() / s.f_tilde_minus,
    })
}

/// Index of the largest interior sample that is at least as large as both
/// neighbours (and strictly larger than one).
pub fn interior_maximum(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 1..values.len().saturating_sub(1) {
        let (a, b, c) = (values[i - 1], values[i], values[i + 1]);
        if b >= a && b >= c && (b > a || b > c) && best.map_or(true, |j| b > values[j]) {
            best = Some(i);
        }
    }
    best
}

/// Abscissa of the extremum of the parabola through three points; the
/// middle abscissa if they are collinear.
pub fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curv = (d2 - d1) / (x[2] - x[0]);
    if curv == 0.0 || !curv.is_finite() {
        return x[1];
    }
    0.5 * (x[0] + x[1]) - d1 / (2.0 * curv)
}
