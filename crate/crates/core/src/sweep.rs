//! The deformation sweep: solve, track, transform and report at every
//! sample of a θ range, then summarize where the avoided crossing sits
//! relative to the entropy and Fisher extrema.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::fisher::{ac_center_diagnostics, fisher_report, interior_maximum, CenterReport, CenterSample, SCORE_FLOOR};
use crate::geometry::{BoundingBox, Grid2D, OvalShape};
use crate::helmholtz::{
    align_gauge, gap_minimum, overlap, solve_parity, track_branches, AvoidedCrossing, EigenMode, EigenSettings, Parity,
};
use crate::negativity::{absolute_volume_of, complex_entropy};
use crate::wigner::{wigner_transform, MomentumGrid, WignerField, WignerPlan};

/// Records whose negative volume falls below this are marked degenerate.
pub const DEGENERATE_N: f64 = 1e-8;

/// Gap minima narrower than this many eigenvalue tolerances count as true
/// crossings.
pub const CROSSING_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub a: f64,
    pub b: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub samples: usize,
    /// Fisher step; half the sample spacing when `None`.
    pub delta: Option<f64>,
    /// solver grid spacing
    pub h: f64,
    /// reflection sector holding the tracked branches
    pub parity: Parity,
    /// modes solved per sector and sample
    pub mode_count: usize,
    /// branches are the modes inside this window at `theta_min`
    pub k_window: (f64, f64),
    /// Wigner positions sit on every `wigner_stride`-th solver node
    pub wigner_stride: usize,
    pub momentum_points: usize,
    /// `p_max = momentum_factor * k_window.1`
    pub momentum_factor: f64,
    pub slice_points: usize,
    pub slice_momenta: usize,
    pub tau: f64,
    /// bisections allowed per sample interval when tracking fails
    pub max_halvings: usize,
    pub eigen: EigenSettings,
    /// Test hook: every shape is built at θ = 0.
    pub freeze_shape: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            a: 1.2,
            b: 1.0,
            theta_min: 0.50,
            theta_max: 0.70,
            samples: 41,
            delta: None,
            h: 1.0 / 64.0,
            parity: Parity::Odd,
            mode_count: 14,
            k_window: (8.7, 9.45),
            wigner_stride: 3,
            momentum_points: 48,
            momentum_factor: 2.5,
            slice_points: 96,
            slice_momenta: 96,
            tau: SCORE_FLOOR,
            max_halvings: 4,
            eigen: EigenSettings::default(),
            freeze_shape: false,
        }
    }
}

impl SweepConfig {
    pub fn spacing(&self) -> f64 {
        (self.theta_max - self.theta_min) / (self.samples.max(2) - 1) as f64
    }

    pub fn fisher_step(&self) -> f64 {
        self.delta.unwrap_or(0.5 * self.spacing())
    }

    pub fn thetas(&self) -> Vec<f64> {
        let d = self.spacing();
        (0..self.samples)
            .map(|i| if i + 1 == self.samples { self.theta_max } else { self.theta_min + i as f64 * d })
            .collect()
    }

    pub fn p_max(&self) -> f64 {
        self.momentum_factor * self.k_window.1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(CoreError::InvalidConfig(m));
        if self.samples < 2 {
            return bad(alloc::format!("need at least 2 theta samples, got {}", self.samples));
        }
        if !(self.theta_max > self.theta_min) {
            return bad(alloc::format!("empty theta interval [{}, {}]", self.theta_min, self.theta_max));
        }
        let delta = self.fisher_step();
        if !(delta > 0.0 && delta < self.spacing()) {
            return bad(alloc::format!("Fisher step {delta} must lie in (0, {}) (the sample spacing)", self.spacing()));
        }
        for theta in [self.theta_min - delta, self.theta_max + delta] {
            OvalShape::new(self.a, self.b, theta).map_err(|e| CoreError::InvalidConfig(alloc::format!("{e}")))?;
        }
        let positive = [("h", self.h), ("momentum_factor", self.momentum_factor), ("eigen tolerance", self.eigen.tol)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(alloc::format!("{name} must be positive, got {v}"));
            }
        }
        let counts = [
            ("mode_count", self.mode_count),
            ("wigner_stride", self.wigner_stride),
            ("momentum_points", self.momentum_points),
            ("slice_points", self.slice_points),
            ("slice_momenta", self.slice_momenta),
        ];
        for (name, v) in counts {
            if v == 0 {
                return bad(alloc::format!("{name} must be positive"));
            }
        }
        let (lo, hi) = self.k_window;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return bad(alloc::format!("bad k window [{lo}, {hi}]"));
        }
        if !(self.tau >= 0.0 && self.tau < 1.0) {
            return bad(alloc::format!("score floor must lie in [0, 1), got {}", self.tau));
        }
        Ok(())
    }

    fn shape_at(&self, theta: f64) -> Result<OvalShape> {
        OvalShape::new(self.a, self.b, if self.freeze_shape { 0.0 } else { theta })
    }
}

/// Resolutions a record was computed at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub h: f64,
    pub wigner_stride: usize,
    pub positions: (usize, usize),
    pub momentum_points: usize,
    pub p_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub theta: f64,
    pub branch: usize,
    pub k: f64,
    pub h_r: f64,
    pub h_i: f64,
    pub n: f64,
    pub z_plus: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub f_tilde_minus: f64,
    pub mean_score: f64,
    pub dhi_fd: f64,
    pub dhi_score: f64,
    pub bound_rhs: f64,
    pub slack: f64,
    pub decomposition_residual: f64,
    pub masked_fraction: f64,
    /// `N < DEGENERATE_N`; Fisher columns are zero
    pub degenerate: bool,
    pub resolution: Resolution,
}

/// Interior gap minimum between sorted neighbours of one sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectedCrossing {
    pub parity: Parity,
    /// lower mode's position in the sector's ascending spectrum
    pub index: usize,
    pub theta_star: f64,
    pub gap: f64,
}

/// Endpoint overlaps of the crossing pair, `|⟨ψ_i(θ_min), ψ_j(θ_max)⟩|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exchange {
    pub lower_self: f64,
    pub upper_self: f64,
    /// lower branch at `θ_min` against upper branch at `θ_max`
    pub lower_to_upper: f64,
    pub upper_to_lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLabel {
    ThetaMin,
    ThetaStar,
    ThetaMax,
}

impl PointLabel {
    pub fn name(self) -> &'static str {
        match self {
            PointLabel::ThetaMin => "theta_min",
            PointLabel::ThetaStar => "theta_star",
            PointLabel::ThetaMax => "theta_max",
        }
    }
}

/// What the observer sees for each analysed sample and branch.
pub struct PointView<'a> {
    pub sample: usize,
    pub branch: usize,
    pub labels: &'a [PointLabel],
    pub mode: &'a EigenMode,
    pub lower_mode: &'a EigenMode,
    pub upper_mode: &'a EigenMode,
    pub plan: &'a WignerPlan,
    pub lower: &'a WignerField,
    pub center: &'a WignerField,
    pub upper: &'a WignerField,
    pub record: &'a SweepRecord,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchSummary {
    pub branch: usize,
    /// largest interior local maximum of `h_i`
    pub h_i_max_theta: Option<f64>,
    /// local minimum of `|dh_i/dθ|` (score route) nearest the `h_i` maximum
    pub dhi_min_theta: Option<f64>,
    /// global minimum of `|dh_i/dθ|` over the branch
    pub dhi_global_min_theta: Option<f64>,
    pub f_minus_peak_theta: Option<f64>,
    pub f_plus_peak_theta: Option<f64>,
    pub h_i_offset: Option<f64>,
    pub f_minus_offset: Option<f64>,
    pub f_plus_offset: Option<f64>,
    /// `F₋/F₊` at the sample nearest `θ*`
    pub f_ratio_at_star: Option<f64>,
    /// `F₋ > F₊` on every non-degenerate record
    pub f_minus_exceeds_plus: bool,
    pub center: Option<CenterReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub spacing: f64,
    pub theta_star: Option<f64>,
    pub gap: Option<f64>,
    pub branches: Vec<BranchSummary>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub config: SweepConfig,
    pub grid: Grid2D,
    pub resolution: Resolution,
    /// `records[branch][sample]`
    pub records: Vec<Vec<SweepRecord>>,
    pub crossing: Option<AvoidedCrossing>,
    /// branches forming `crossing`, lower first
    pub crossing_branches: Option<(usize, usize)>,
    /// every interior gap minimum inside the k window, both sectors
    pub detected: Vec<DetectedCrossing>,
    pub exchange: Option<Exchange>,
    pub summary: Option<SweepSummary>,
    /// extra samples inserted by step halving
    pub halvings: usize,
}

/// Grid and Wigner plan shared by every sample of a sweep.
#[derive(Debug, Clone)]
pub struct SweepSetup {
    pub config: SweepConfig,
    pub grid: Grid2D,
    pub support: BoundingBox,
    pub plan: WignerPlan,
    pub thetas: Vec<f64>,
    pub delta: f64,
}

impl SweepSetup {
    pub fn new(config: &SweepConfig) -> Result<Self> {
        config.validate()?;
        let thetas = config.thetas();
        let delta = config.fisher_step();
        let mut support = config.shape_at(config.theta_min - delta)?.bounding_box();
        for &t in &thetas {
            for theta in [t - delta, t, t + delta] {
                support = support.union(&config.shape_at(theta)?.bounding_box());
            }
        }
        let grid = Grid2D::covering_symmetric(&support, config.h, 1)?;
        let momentum = MomentumGrid::window(config.momentum_points, config.p_max())?;
        let plan = WignerPlan::aligned(&grid, &support, config.wigner_stride, momentum)?;
        Ok(Self { config: *config, grid, support, plan, thetas, delta })
    }

    pub fn resolution(&self) -> Resolution {
        Resolution {
            h: self.config.h,
            wigner_stride: self.config.wigner_stride,
            positions: (self.plan.positions.nx, self.plan.positions.ny),
            momentum_points: self.config.momentum_points,
            p_max: self.config.p_max(),
        }
    }

    pub fn solve(&self, theta: f64, parity: Parity) -> Result<Vec<EigenMode>> {
        let shape = self.config.shape_at(theta)?;
        solve_parity(&shape, &self.grid, parity, self.config.mode_count, None, &self.config.eigen)
            .map_err(|e| e.at_theta(theta))
    }

    /// Follows `previous` (modes at `from`) to `to`, bisecting the interval
    /// when consecutive overlaps are too weak.
    fn follow(
        &self,
        previous: &[EigenMode],
        from: f64,
        to: f64,
        candidates: Vec<EigenMode>,
        depth: usize,
        halvings: &mut usize,
    ) -> Result<Vec<EigenMode>> {
        match track_branches(&[(from, previous.to_vec()), (to, candidates.clone())]) {
            Ok(branches) => Ok(branches.into_iter().map(|mut b| b.samples.pop().unwrap().mode).collect()),
            Err(CoreError::TrackingFailure { .. } | CoreError::AmbiguousGauge(_))
                if depth < self.config.max_halvings =>
            {
                let mid = 0.5 * (from + to);
                log::info!("tracking step {from} -> {to} halved at {mid}");
                *halvings += 1;
                let at_mid = self.solve(mid, self.config.parity)?;
                let middle = self.follow(previous, from, mid, at_mid, depth + 1, halvings)?;
                self.follow(&middle, mid, to, candidates, depth + 1, halvings)
            }
            Err(e) => Err(e.at_theta(to)),
        }
    }

    fn check_cover(&self, modes: &[EigenMode], theta: f64) -> Result<()> {
        let top = modes.last().map_or(0.0, |m| m.k());
        if top < self.config.k_window.1 {
            return Err(CoreError::InvalidConfig(alloc::format!(
                "mode_count = {} reaches only k = {top} at theta = {theta}, below the window top {}",
                self.config.mode_count,
                self.config.k_window.1
            )));
        }
        Ok(())
    }

    /// Fresh flank solves, gauge-aligned to the central branch modes, and
    /// the records they give.
    fn analyze<F: FnMut(&PointView<'_>)>(
        &self,
        sample: usize,
        centers: &[EigenMode],
        labels: &[PointLabel],
        observer: &mut F,
    ) -> Result<Vec<SweepRecord>> {
        let theta = self.thetas[sample];
        let (lo_theta, hi_theta) = (theta - self.delta, theta + self.delta);
        let lower_modes = self.solve(lo_theta, self.config.parity)?;
        let upper_modes = self.solve(hi_theta, self.config.parity)?;
        let lower = match_flanks(centers, &lower_modes).map_err(|e| e.at_theta(lo_theta))?;
        let upper = match_flanks(centers, &upper_modes).map_err(|e| e.at_theta(hi_theta))?;
        let resolution = self.resolution();
        let mut out = Vec::with_capacity(centers.len());
        for (branch, mode) in centers.iter().enumerate() {
            let at = |e: CoreError| e.at_theta(theta);
            let wl = wigner_transform(&lower[branch], &self.plan).map_err(at)?;
            let wc = wigner_transform(mode, &self.plan).map_err(at)?;
            let wu = wigner_transform(&upper[branch], &self.plan).map_err(at)?;
            let entropy = complex_entropy(&wc).map_err(at)?;
            let mut record = SweepRecord {
                theta,
                branch,
                k: mode.k(),
                h_r: entropy.h_r,
                h_i: entropy.h_i,
                n: entropy.n,
                z_plus: 0.0,
                f_plus: 0.0,
                f_minus: 0.0,
                f_tilde_minus: 0.0,
                mean_score: 0.0,
                dhi_fd: 0.0,
                dhi_score: 0.0,
                bound_rhs: 0.0,
                slack: 0.0,
                decomposition_residual: 0.0,
                masked_fraction: 0.0,
                degenerate: entropy.n < DEGENERATE_N,
                resolution,
            };
            if record.degenerate {
                log::warn!("branch {branch} at theta = {theta}: N = {:e} is degenerate", entropy.n);
                record.z_plus = absolute_volume_of(wc.values(), wc.cell_volume()) - entropy.n;
            } else {
                let r = fisher_report(&wl, &wc, &wu, self.delta, self.config.tau).map_err(at)?;
                record.z_plus = r.z_plus;
                record.f_plus = r.f_plus;
                record.f_minus = r.f_minus;
                record.f_tilde_minus = r.f_tilde_minus;
                record.mean_score = r.mean_score;
                record.dhi_fd = r.dhi_fd;
                record.dhi_score = r.dhi_score;
                record.bound_rhs = r.bound_rhs;
                record.slack = r.slack;
                record.decomposition_residual = r.decomposition_residual;
                record.masked_fraction = r.masked_fraction;
            }
            observer(&PointView {
                sample,
                branch,
                labels,
                mode,
                lower_mode: &lower[branch],
                upper_mode: &upper[branch],
                plan: &self.plan,
                lower: &wl,
                center: &wc,
                upper: &wu,
                record: &record,
            });
            out.push(record);
        }
        Ok(out)
    }
}

/// For each centre mode, the flank mode of largest |overlap|, sign-aligned.
fn match_flanks(centers: &[EigenMode], flank: &[EigenMode]) -> Result<Vec<EigenMode>> {
    let mut taken = vec![false; flank.len()];
    let mut out = Vec::with_capacity(centers.len());
    for (sample, c) in centers.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, m) in flank.iter().enumerate() {
            let o = overlap(c, m)?.abs();
            if best.map_or(true, |b| o > b.1) {
                best = Some((j, o));
            }
        }
        let (j, o) = best.ok_or(CoreError::TrackingFailure { sample, overlap: 0.0 })?;
        if taken[j] {
            return Err(CoreError::TrackingFailure { sample, overlap: o });
        }
        taken[j] = true;
        out.push(align_gauge(c, &flank[j])?);
    }
    Ok(out)
}

/// Interior local minima of sorted-neighbour gaps with both modes inside
/// the window.
fn scan_sector(parity: Parity, thetas: &[f64], ks: &[Vec<f64>], window: (f64, f64), tol: f64) -> Vec<DetectedCrossing> {
    let levels = ks.iter().map(Vec::len).min().unwrap_or(0);
    let inside = |k: f64| k >= window.0 && k <= window.1;
    let mut out = Vec::new();
    for i in 0..levels.saturating_sub(1) {
        let gaps: Vec<f64> = ks.iter().map(|k| k[i + 1] - k[i]).collect();
        for s in 1..thetas.len().saturating_sub(1) {
            let (a, b, c) = (gaps[s - 1], gaps[s], gaps[s + 1]);
            if !(b <= a && b <= c && (b < a || b < c)) || !(inside(ks[s][i]) && inside(ks[s][i + 1])) {
                continue;
            }
            if b <= CROSSING_MARGIN * tol * ks[s][i + 1] {
                log::info!("modes {i}/{} of the {parity:?} sector cross at theta = {}", i + 1, thetas[s]);
                continue;
            }
            let series: Vec<(f64, f64)> = (s - 1..=s + 1).map(|t| (thetas[t], gaps[t])).collect();
            let refined = gap_minimum(&series).map_or((thetas[s], b), |ac| (ac.theta_star, ac.gap));
            out.push(DetectedCrossing { parity, index: i, theta_star: refined.0, gap: refined.1 });
        }
    }
    out
}

fn other(parity: Parity) -> Parity {
    match parity {
        Parity::Even => Parity::Odd,
        Parity::Odd => Parity::Even,
    }
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    run_sweep_with(config, |_| {})
}

/// [`run_sweep`] with a callback invoked once per sample and branch, in
/// sample order, while the Wigner fields are alive.
pub fn run_sweep_with<F: FnMut(&PointView<'_>)>(config: &SweepConfig, mut observer: F) -> Result<SweepOutput> {
    let setup = SweepSetup::new(config)?;
    let cfg = &setup.config;
    let thetas = &setup.thetas;
    let (k_lo, k_hi) = cfg.k_window;

    let mut tracked_ks = Vec::with_capacity(thetas.len());
    let mut other_ks = Vec::with_capacity(thetas.len());
    let mut branch_modes: Vec<Vec<EigenMode>> = Vec::with_capacity(thetas.len());
    let mut halvings = 0;
    for (s, &theta) in thetas.iter().enumerate() {
        log::info!("solving sample {}/{} at theta = {theta}", s + 1, thetas.len());
        let modes = setup.solve(theta, cfg.parity)?;
        setup.check_cover(&modes, theta)?;
        let rest = setup.solve(theta, other(cfg.parity))?;
        setup.check_cover(&rest, theta)?;
        tracked_ks.push(modes.iter().map(EigenMode::k).collect::<Vec<_>>());
        other_ks.push(rest.iter().map(EigenMode::k).collect::<Vec<_>>());
        let next = if s == 0 {
            let chosen: Vec<EigenMode> = modes.into_iter().filter(|m| m.k() >= k_lo && m.k() <= k_hi).collect();
            if chosen.is_empty() {
                return Err(CoreError::InvalidConfig(alloc::format!(
                    "no {:?} mode inside the k window [{k_lo}, {k_hi}] at theta = {theta}",
                    cfg.parity
                )));
            }
            chosen
        } else {
            setup.follow(&branch_modes[s - 1], thetas[s - 1], theta, modes, 0, &mut halvings)?
        };
        branch_modes.push(next);
    }
    let n_branches = branch_modes[0].len();
    log::info!("tracking {n_branches} branches ({halvings} halvings)");

    let mut crossing: Option<(AvoidedCrossing, (usize, usize))> = None;
    for b in 0..n_branches.saturating_sub(1) {
        let gaps: Vec<(f64, f64)> =
            thetas.iter().zip(&branch_modes).map(|(&t, m)| (t, (m[b + 1].k() - m[b].k()).abs())).collect();
        if let Ok(ac) = gap_minimum(&gaps) {
            let k_ref = branch_modes[ac.index][b + 1].k();
            if ac.gap > CROSSING_MARGIN * cfg.eigen.tol * k_ref && crossing.map_or(true, |c| ac.gap < c.0.gap) {
                crossing = Some((ac, (b, b + 1)));
            }
        }
    }
    let mut detected = scan_sector(cfg.parity, thetas, &tracked_ks, cfg.k_window, cfg.eigen.tol);
    detected.extend(scan_sector(other(cfg.parity), thetas, &other_ks, cfg.k_window, cfg.eigen.tol));

    let last = thetas.len() - 1;
    let exchange = match crossing {
        Some((_, (l, u))) => {
            let (first, end) = (&branch_modes[0], &branch_modes[last]);
            Some(Exchange {
                lower_self: overlap(&first[l], &end[l])?.abs(),
                upper_self: overlap(&first[u], &end[u])?.abs(),
                lower_to_upper: overlap(&first[l], &end[u])?.abs(),
                upper_to_lower: overlap(&first[u], &end[l])?.abs(),
            })
        }
        None => None,
    };
    let star = crossing.map(|(ac, _)| nearest(thetas, ac.theta_star));

    let mut records = vec![Vec::with_capacity(thetas.len()); n_branches];
    for (s, centers) in branch_modes.iter().enumerate() {
        let mut labels = Vec::new();
        if s == 0 {
            labels.push(PointLabel::ThetaMin);
        }
        if Some(s) == star {
            labels.push(PointLabel::ThetaStar);
        }
        if s == last {
            labels.push(PointLabel::ThetaMax);
        }
        log::info!("analysing sample {}/{} at theta = {}", s + 1, thetas.len(), thetas[s]);
        for r in setup.analyze(s, centers, &labels, &mut observer)? {
            records[r.branch].push(r);
        }
    }
    let summary = if thetas.len() >= 5 { Some(summarize(&records)?) } else { None };
    Ok(SweepOutput {
        config: *cfg,
        grid: setup.grid,
        resolution: setup.resolution(),
        records,
        crossing: crossing.map(|c| c.0),
        crossing_branches: crossing.map(|c| c.1),
        detected,
        exchange,
        summary,
        halvings,
    })
}

fn nearest(thetas: &[f64], theta: f64) -> usize {
    let mut best = 0;
    for (i, &t) in thetas.iter().enumerate() {
        if (t - theta).abs() < (thetas[best] - theta).abs() {
            best = i;
        }
    }
    best
}

fn argmax_by(records: &[&SweepRecord], f: impl Fn(&SweepRecord) -> f64) -> Option<f64> {
    let mut best: Option<&SweepRecord> = None;
    for r in records {
        if best.map_or(true, |b| f(r) > f(b)) {
            best = Some(r);
        }
    }
    best.map(|r| r.theta)
}

/// Per-branch extrema locations and their offsets from the gap minimum.
pub fn summarize(records: &[Vec<SweepRecord>]) -> Result<SweepSummary> {
    if records.is_empty() || records.iter().any(|b| b.len() < 5) {
        return Err(CoreError::InvalidArgument("summary needs at least 5 records per branch".into()));
    }
    let thetas: Vec<f64> = records[0].iter().map(|r| r.theta).collect();
    let spacing = thetas[1] - thetas[0];
    let mut star: Option<AvoidedCrossing> = None;
    for pair in records.windows(2) {
        let gaps: Vec<(f64, f64)> = pair[0].iter().zip(&pair[1]).map(|(a, b)| (a.theta, (b.k - a.k).abs())).collect();
        if let Ok(ac) = gap_minimum(&gaps) {
            if star.map_or(true, |s| ac.gap < s.gap) {
                star = Some(ac);
            }
        }
    }
    let theta_star = star.map(|s| s.theta_star);
    let offset = |t: Option<f64>| t.zip(theta_star).map(|(t, s)| t - s);

    let mut branches = Vec::with_capacity(records.len());
    for (branch, recs) in records.iter().enumerate() {
        let good: Vec<&SweepRecord> = recs.iter().filter(|r| !r.degenerate).collect();
        let h: Vec<f64> = recs.iter().map(|r| r.h_i).collect();
        let h_max = interior_maximum(&h);
        let slope: Vec<f64> = recs.iter().map(|r| r.dhi_score.abs()).collect();
        let dhi_min = h_max.and_then(|m| {
            (1..slope.len() - 1)
                .filter(|&i| slope[i] <= slope[i - 1] && slope[i] <= slope[i + 1])
                .min_by_key(|&i| i.abs_diff(m))
        });
        let f_ratio_at_star = theta_star.map(|t| {
            let r = &recs[nearest(&thetas, t)];
            r.f_minus / r.f_plus
        });
        let samples: Vec<CenterSample> = good
            .iter()
            .map(|r| CenterSample {
                theta: r.theta,
                h_i: r.h_i,
                mean_score: r.mean_score,
                f_minus: r.f_minus,
                f_tilde_minus: r.f_tilde_minus,
            })
            .collect();
        let h_i_max_theta = h_max.map(|i| recs[i].theta);
        let f_minus_peak_theta = argmax_by(&good, |r| r.f_minus);
        let f_plus_peak_theta = argmax_by(&good, |r| r.f_plus);
        branches.push(BranchSummary {
            branch,
            h_i_max_theta,
            dhi_min_theta: dhi_min.map(|i| recs[i].theta),
            dhi_global_min_theta: argmax_by(&good, |r| -r.dhi_score.abs()),
            f_minus_peak_theta,
            f_plus_peak_theta,
            h_i_offset: offset(h_i_max_theta),
            f_minus_offset: offset(f_minus_peak_theta),
            f_plus_offset: offset(f_plus_peak_theta),
            f_ratio_at_star,
            f_minus_exceeds_plus: !good.is_empty() && good.iter().all(|r| r.f_minus > r.f_plus),
            center: ac_center_diagnostics(&samples).ok(),
        });
    }
    Ok(SweepSummary { spacing, theta_star, gap: star.map(|s| s.gap), branches })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(theta: f64, branch: usize) -> SweepRecord {
        SweepRecord {
            theta,
            branch,
            k: 1.0,
            h_r: 0.0,
            h_i: 0.0,
            n: 0.1,
            z_plus: 1.1,
            f_plus: 1.0,
            f_minus: 1.0,
            f_tilde_minus: 1.0,
            mean_score: 0.0,
            dhi_fd: 0.0,
            dhi_score: 0.0,
            bound_rhs: 0.0,
            slack: 0.0,
            decomposition_residual: 0.0,
            masked_fraction: 0.0,
            degenerate: false,
            resolution: Resolution { h: 0.1, wigner_stride: 1, positions: (1, 1), momentum_points: 2, p_max: 1.0 },
        }
    }

    fn synthetic(n: usize) -> Vec<Vec<SweepRecord>> {
        // two branches 0.5 ± sqrt(t² + g²) around t = θ - 0.3
        (0..2)
            .map(|b| {
                (0..n)
                    .map(|i| {
                        let theta = i as f64 * 0.05;
                        let t = theta - 0.3;
                        let mut r = record(theta, b);
                        let split = libm::sqrt(t * t + 0.01);
                        r.k = if b == 0 { 5.0 - split } else { 5.0 + split };
                        r.h_i = 1.0 - t * t;
                        r.dhi_score = -2.0 * t;
                        r.f_plus = 1.0 + libm::exp(-t * t / 0.01);
                        r.f_minus = 2.0 * r.f_plus;
                        r
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn summary_of_a_synthetic_crossing() {
        let s = summarize(&synthetic(13)).unwrap();
        assert!((s.theta_star.unwrap() - 0.3).abs() < 1e-12);
        assert!((s.spacing - 0.05).abs() < 1e-15);
        for b in &s.branches {
            assert!((b.h_i_max_theta.unwrap() - 0.3).abs() < 1e-12);
            assert!((b.dhi_min_theta.unwrap() - 0.3).abs() < 1e-12);
            assert!(b.h_i_offset.unwrap().abs() < 1e-12);
            assert!((b.f_minus_peak_theta.unwrap() - 0.3).abs() < 1e-12);
            assert!((b.f_plus_peak_theta.unwrap() - 0.3).abs() < 1e-12);
            assert!(b.f_minus_exceeds_plus);
            assert_eq!(b.f_ratio_at_star, Some(2.0));
            let c = b.center.unwrap();
            assert!((c.theta_refined - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn summary_flags_dominant_positive_channel() {
        let mut recs = synthetic(9);
        for r in recs.iter_mut().flatten() {
            r.f_minus = 0.5 * r.f_plus;
        }
        let s = summarize(&recs).unwrap();
        assert!(s.branches.iter().all(|b| !b.f_minus_exceeds_plus));
    }

    #[test]
    fn summary_needs_five_records() {
        assert!(summarize(&synthetic(4)).is_err());
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn monotone_entropy_has_no_maximum() {
        let mut recs = synthetic(9);
        for r in recs.iter_mut().flatten() {
            r.h_i = r.theta;
        }
        let s = summarize(&recs).unwrap();
        assert!(s.branches[0].h_i_max_theta.is_none());
        assert!(s.branches[0].center.is_none());
    }

    #[test]
    fn fisher_step_must_be_below_spacing() {
        let mut c = SweepConfig::default();
        c.delta = Some(c.spacing());
        assert!(matches!(c.validate(), Err(CoreError::InvalidConfig(_))));
        c.delta = Some(0.5 * c.spacing());
        assert!(c.validate().is_ok());
        c.delta = Some(-1e-3);
        assert!(c.validate().is_err());
    }

    #[test]
    fn interval_must_respect_convexity_limit() {
        let c = SweepConfig { theta_max: 0.84, ..SweepConfig::default() };
        assert!(matches!(c.validate(), Err(CoreError::InvalidConfig(_))));
        let c = SweepConfig { samples: 1, ..SweepConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn sample_grid_hits_both_ends() {
        let t = SweepConfig::default().thetas();
        assert_eq!(t.len(), 41);
        assert_eq!(t[0], 0.5);
        assert_eq!(t[40], 0.7);
        assert!((t[1] - t[0] - 0.005).abs() < 1e-15);
    }

    #[test]
    fn sector_scan_skips_true_crossings_and_window_exits() {
        let thetas = [0.0, 1.0, 2.0, 3.0, 4.0];
        // levels 0/1 avoid at θ = 2 (gap 0.2); levels 1/2 touch at θ = 3
        let ks: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0, 3.5],
            vec![1.3, 1.8, 3.2],
            vec![1.5, 1.7, 2.9],
            vec![1.3, 1.8, 1.8],
            vec![1.0, 2.0, 3.1],
        ];
        let found = scan_sector(Parity::Even, &thetas, &ks, (0.0, 10.0), 1e-8);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].index, 0);
        assert!((found[0].theta_star - 2.0).abs() < 1e-12);
        assert!(scan_sector(Parity::Even, &thetas, &ks, (1.6, 10.0), 1e-8).is_empty());
    }

    #[test]
    fn frozen_two_sample_sweep_is_parameter_independent() {
        let config = SweepConfig {
            a: 1.0,
            b: 1.0,
            theta_min: 0.1,
            theta_max: 0.2,
            samples: 2,
            h: 1.0 / 24.0,
            parity: Parity::Even,
            mode_count: 4,
            k_window: (3.0, 5.0),
            wigner_stride: 1,
            momentum_points: 24,
            momentum_factor: 1.5,
            freeze_shape: true,
            ..SweepConfig::default()
        };
        let out = run_sweep(&config).unwrap();
        assert!(out.crossing.is_none());
        assert!(out.summary.is_none());
        for branch in &out.records {
            assert_eq!(branch.len(), 2);
            for r in branch {
                assert!(!r.degenerate);
                assert!(r.f_minus.abs() < 1e-9 && r.f_tilde_minus.abs() < 1e-9 && r.f_plus.abs() < 1e-9);
                assert!((r.h_i - branch[0].h_i).abs() < 1e-6);
            }
        }
    }
}
