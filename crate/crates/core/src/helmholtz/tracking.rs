//! Following eigenmodes through a parameter sweep by wavefunction
//! continuity, and locating the avoided crossing between two branches.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{overlap, EigenMode};
use crate::error::{CoreError, Result};

/// Eigenvalues closer than this (in `k²`) are treated as one eigenspace.
pub const DEGENERACY_TOL: f64 = 1e-6;

/// |overlap| required between consecutive members of a branch.
pub const MIN_OVERLAP: f64 = 0.5;

/// What the tracker needs from a mode.
pub trait TrackedMode: Clone {
    /// Label used for crossing detection (the wavenumber for billiard modes).
    fn k(&self) -> f64;
    /// Eigenvalue of the underlying operator.
    fn eigenvalue(&self) -> f64;
    fn inner(&self, other: &Self) -> Result<f64>;
    fn negated(&self) -> Self;
    /// Orthonormal combination `∑ cᵢ mᵢ` carrying eigenvalue `eigenvalue`.
    fn combine(parts: &[(f64, &Self)], eigenvalue: f64) -> Self;
}

impl TrackedMode for EigenMode {
    fn k(&self) -> f64 {
        self.k
    }

    fn eigenvalue(&self) -> f64 {
        self.k * self.k
    }

    fn inner(&self, other: &Self) -> Result<f64> {
        overlap(self, other)
    }

    fn negated(&self) -> Self {
        EigenMode::negated(self)
    }

    fn combine(parts: &[(f64, &Self)], eigenvalue: f64) -> Self {
        let first = parts[0].1;
        let mut psi = vec![0.0; first.psi.len()];
        for &(c, m) in parts {
            psi.iter_mut().zip(&m.psi).for_each(|(a, b)| *a += c * b);
        }
        let residual = parts.iter().map(|(_, m)| m.residual).fold(0.0, f64::max);
        EigenMode { k: libm::sqrt(eigenvalue), psi, shape: first.shape, grid: first.grid, residual }
    }
}

#[derive(Debug, Clone)]
pub struct BranchSample<M> {
    pub theta: f64,
    pub k: f64,
    pub mode: M,
}

#[derive(Debug, Clone)]
pub struct SpectrumBranch<M = EigenMode> {
    pub label: usize,
    pub samples: Vec<BranchSample<M>>,
}

impl<M: TrackedMode> SpectrumBranch<M> {
    pub fn thetas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.theta).collect()
    }

    pub fn ks(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.k).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidedCrossing {
    pub theta_star: f64,
    pub gap: f64,
    /// sample index of the discrete minimum
    pub index: usize,
}

/// Returns `mode` or `-mode`, whichever has nonnegative overlap with
/// `reference`.
pub fn align_gauge<M: TrackedMode>(reference: &M, mode: &M) -> Result<M> {
    let o = reference.inner(mode)?;
    if !(o.abs() > MIN_OVERLAP) {
        return Err(CoreError::AmbiguousGauge(o.abs()));
    }
    Ok(if o < 0.0 { mode.negated() } else { mode.clone() })
}

/// Rotates each near-degenerate cluster of `candidates` (sorted by
/// eigenvalue) onto the span of the `previous` modes that project into it.
fn disambiguate<M: TrackedMode>(previous: &[&M], candidates: &[M]) -> Result<Vec<M>> {
    let mut out = Vec::with_capacity(candidates.len());
    let mut start = 0;
    while start < candidates.len() {
        let mut end = start + 1;
        while end < candidates.len()
            && (candidates[end].eigenvalue() - candidates[end - 1].eigenvalue()).abs() < DEGENERACY_TOL
        {
            end += 1;
        }
        let cluster = &candidates[start..end];
        let c = cluster.len();
        if c == 1 {
            out.push(cluster[0].clone());
            start = end;
            continue;
        }
        let mut proj = DMatrix::<f64>::zeros(c, previous.len());
        for (i, m) in cluster.iter().enumerate() {
            for (j, p) in previous.iter().enumerate() {
                proj[(i, j)] = m.inner(p)?;
            }
        }
        let mut weight: Vec<(usize, f64)> =
            (0..previous.len()).map(|j| (j, (0..c).map(|i| proj[(i, j)] * proj[(i, j)]).sum())).collect();
        weight.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut target = DMatrix::<f64>::zeros(c, c);
        for (col, &(j, _)) in weight.iter().take(c).enumerate() {
            for i in 0..c {
                target[(i, col)] = proj[(i, j)];
            }
        }
        // orthogonal Procrustes: R = U Vᵀ maximizes tr(Rᵀ target)
        let svd = target.svd(true, true);
        let rot = svd.u.unwrap() * svd.v_t.unwrap();
        for col in 0..c {
            let parts: Vec<(f64, &M)> = (0..c).map(|i| (rot[(i, col)], &cluster[i])).collect();
            let ev: f64 = (0..c).map(|i| rot[(i, col)] * rot[(i, col)] * cluster[i].eigenvalue()).sum();
            out.push(M::combine(&parts, ev));
        }
        start = end;
    }
    Ok(out)
}

/// Links modes across consecutive parameter samples by greedy maximum
/// |overlap|. The first sample fixes the number of branches; later samples
/// may carry extra modes, which are ignored. Every branch is gauge-aligned
/// along the chain.
pub fn track_branches<M: TrackedMode>(samples: &[(f64, Vec<M>)]) -> Result<Vec<SpectrumBranch<M>>> {
    if samples.len() < 2 {
        return Err(CoreError::InvalidArgument("tracking needs at least two parameter samples".into()));
    }
    for w in samples.windows(2) {
        if !(w[1].0 > w[0].0) {
            return Err(CoreError::InvalidArgument("parameter samples must increase strictly".into()));
        }
    }
    let (theta0, first) = &samples[0];
    if first.is_empty() {
        return Err(CoreError::InvalidArgument("no modes at the first sample".into()));
    }
    let mut branches: Vec<SpectrumBranch<M>> = first
        .iter()
        .enumerate()
        .map(|(label, m)| SpectrumBranch {
            label,
            samples: vec![BranchSample { theta: *theta0, k: m.k(), mode: m.clone() }],
        })
        .collect();
    for (s, (theta, modes)) in samples.iter().enumerate().skip(1) {
        if modes.len() < branches.len() {
            return Err(CoreError::TrackingFailure { sample: s, overlap: 0.0 });
        }
        let previous: Vec<&M> = branches.iter().map(|b| &b.samples.last().unwrap().mode).collect();
        let candidates = disambiguate(&previous, modes)?;
        let mut table = Vec::with_capacity(previous.len() * candidates.len());
        for (b, p) in previous.iter().enumerate() {
            for (c, m) in candidates.iter().enumerate() {
                table.push((p.inner(m)?.abs(), b, c));
            }
        }
        table.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut branch_taken = vec![None; previous.len()];
        let mut cand_taken = vec![false; candidates.len()];
        for &(_, b, c) in &table {
            if branch_taken[b].is_none() && !cand_taken[c] {
                branch_taken[b] = Some(c);
                cand_taken[c] = true;
            }
        }
        for (b, choice) in branch_taken.iter().enumerate() {
            let c = choice.unwrap();
            let best = previous[b].inner(&candidates[c])?;
            if !(best.abs() > MIN_OVERLAP) {
                return Err(CoreError::TrackingFailure { sample: s, overlap: best.abs() });
            }
        }
        let aligned: Vec<M> = branch_taken
            .iter()
            .enumerate()
            .map(|(b, choice)| align_gauge(previous[b], &candidates[choice.unwrap()]))
            .collect::<Result<_>>()?;
        for (branch, mode) in branches.iter_mut().zip(aligned) {
            branch.samples.push(BranchSample { theta: *theta, k: mode.k(), mode });
        }
    }
    Ok(branches)
}

fn gaps<M: TrackedMode>(a: &SpectrumBranch<M>, b: &SpectrumBranch<M>) -> Result<Vec<(f64, f64)>> {
    if a.samples.len() != b.samples.len() || a.samples.iter().zip(&b.samples).any(|(x, y)| x.theta != y.theta) {
        return Err(CoreError::InvalidArgument("branches are sampled at different parameters".into()));
    }
    Ok(a.samples.iter().zip(&b.samples).map(|(x, y)| (x.theta, (y.k - x.k).abs())).collect())
}

/// Interior sample indices where the gap has a local minimum.
pub fn gap_local_minima<M: TrackedMode>(a: &SpectrumBranch<M>, b: &SpectrumBranch<M>) -> Result<Vec<usize>> {
    let g = gaps(a, b)?;
    Ok((1..g.len().saturating_sub(1))
        .filter(|&i| g[i].1 <= g[i - 1].1 && g[i].1 <= g[i + 1].1 && (g[i].1 < g[i - 1].1 || g[i].1 < g[i + 1].1))
        .collect())
}

/// Minimum of `|k₂ - k₁|`, refined by a parabola through the three samples
/// around the discrete minimum.
pub fn detect_avoided_crossing<M: TrackedMode>(
    a: &SpectrumBranch<M>,
    b: &SpectrumBranch<M>,
) -> Result<AvoidedCrossing> {
    gap_minimum(&gaps(a, b)?)
}

/// As [`detect_avoided_crossing`] on `(θ, gap)` pairs.
pub fn gap_minimum(g: &[(f64, f64)]) -> Result<AvoidedCrossing> {
    if g.len() < 3 {
        return Err(CoreError::MonotoneGap);
    }
    let mut i = 0;
    for j in 1..g.len() {
        if g[j].1 < g[i].1 {
            i = j;
        }
    }
    if i == 0 || i == g.len() - 1 || !(g[i].1 < g[i - 1].1 || g[i].1 < g[i + 1].1) {
        return Err(CoreError::MonotoneGap);
    }
    let (x0, y0) = g[i - 1];
    let (x1, y1) = g[i];
    let (x2, y2) = g[i + 1];
    // vertex of the interpolating parabola
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    let (theta_star, gap) = if curv > 0.0 {
        let xs = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
        let xs = xs.clamp(x0, x2);
        let val = y1 + d01 * (xs - x1) + curv * (xs - x0) * (xs - x1);
        (xs, val)
    } else {
        (x1, y1)
    };
    Ok(AvoidedCrossing { theta_star, gap, index: i })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// two-level mode: eigenvector of a 2×2 symmetric matrix
    #[derive(Debug, Clone)]
    struct TwoLevel {
        value: f64,
        v: [f64; 2],
    }

    impl TrackedMode for TwoLevel {
        fn k(&self) -> f64 {
            self.value
        }
        fn eigenvalue(&self) -> f64 {
            self.value
        }
        fn inner(&self, o: &Self) -> Result<f64> {
            Ok(self.v[0] * o.v[0] + self.v[1] * o.v[1])
        }
        fn negated(&self) -> Self {
            TwoLevel { value: self.value, v: [-self.v[0], -self.v[1]] }
        }
        fn combine(parts: &[(f64, &Self)], ev: f64) -> Self {
            let mut v = [0.0; 2];
            for (c, m) in parts {
                v[0] += c * m.v[0];
                v[1] += c * m.v[1];
            }
            TwoLevel { value: ev, v }
        }
    }

    /// closed-form eigenpairs of [[t, g], [g, -t]], ascending
    fn family(t: f64, g: f64) -> Vec<TwoLevel> {
        let r = libm::sqrt(t * t + g * g);
        // angle with tan(2φ) = g/t
        let phi = 0.5 * libm::atan2(g, t);
        let upper = [libm::cos(phi), libm::sin(phi)];
        let lower = [-libm::sin(phi), libm::cos(phi)];
        vec![TwoLevel { value: -r, v: lower }, TwoLevel { value: r, v: upper }]
    }

    fn sweep(g: f64, n: usize) -> Vec<(f64, Vec<TwoLevel>)> {
        (0..n)
            .map(|i| {
                let t = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                (t, family(t, g))
            })
            .collect()
    }

    #[test]
    fn avoided_crossing_branches_follow_eigenvectors() {
        let branches = track_branches(&sweep(0.05, 41)).unwrap();
        assert_eq!(branches.len(), 2);
        // adiabatic following: labels keep eigenvalue order
        for s in &branches[0].samples {
            assert!(s.k < 0.0);
        }
        // character exchange: lower branch starts along (1,0) ends along (0,1)
        let first = &branches[0].samples[0].mode.v;
        let last = &branches[0].samples.last().unwrap().mode.v;
        assert!(first[0].abs() > 0.99 && last[1].abs() > 0.99);
        for b in &branches {
            for w in b.samples.windows(2) {
                assert!(w[0].mode.inner(&w[1].mode).unwrap() > 0.5);
            }
        }
        let ac = detect_avoided_crossing(&branches[0], &branches[1]).unwrap();
        assert!(ac.theta_star.abs() < 1e-12);
        assert!((ac.gap - 0.1).abs() < 1e-12);
        assert_eq!(gap_local_minima(&branches[0], &branches[1]).unwrap().len(), 1);
    }

    #[test]
    fn distinct_branches_keep_sorted_order() {
        let samples: Vec<(f64, Vec<TwoLevel>)> = (0..5)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, vec![TwoLevel { value: 1.0 + t, v: [1.0, 0.0] }, TwoLevel { value: 3.0 - t, v: [0.0, 1.0] }])
            })
            .collect();
        let branches = track_branches(&samples).unwrap();
        assert_eq!(branches[0].ks(), vec![1.0, 1.1, 1.2, 1.3, 1.4]);
        assert!(matches!(detect_avoided_crossing(&branches[0], &branches[1]), Err(CoreError::MonotoneGap)));
    }

    #[test]
    fn parallel_branches_have_monotone_gap() {
        let samples: Vec<(f64, Vec<TwoLevel>)> = (0..6)
            .map(|i| {
                let t = i as f64;
                (t, vec![TwoLevel { value: t, v: [1.0, 0.0] }, TwoLevel { value: t + 2.0, v: [0.0, 1.0] }])
            })
            .collect();
        let b = track_branches(&samples).unwrap();
        assert_eq!(detect_avoided_crossing(&b[0], &b[1]), Err(CoreError::MonotoneGap));
    }

    #[test]
    fn symmetric_gap_samples() {
        let mk = |t: f64, lo: f64, hi: f64| {
            (t, vec![TwoLevel { value: lo, v: [1.0, 0.0] }, TwoLevel { value: hi, v: [0.0, 1.0] }])
        };
        let b = track_branches(&[mk(-1.0, 0.0, 0.3), mk(0.0, 0.0, 0.1), mk(1.0, 0.0, 0.3)]).unwrap();
        let ac = detect_avoided_crossing(&b[0], &b[1]).unwrap();
        assert!(ac.theta_star.abs() < 1e-15);
    }

    #[test]
    fn single_sample_rejected() {
        assert!(track_branches(&sweep(0.05, 1)).is_err());
    }

    #[test]
    fn coarse_step_fails_tracking() {
        let start = vec![TwoLevel { value: 0.0, v: [1.0, 0.0] }];
        let next = vec![TwoLevel { value: 0.1, v: [0.3, libm::sqrt(1.0 - 0.09)] }];
        let err = track_branches(&[(0.0, start), (0.1, next)]).unwrap_err();
        assert!(matches!(err, CoreError::TrackingFailure { .. }));
    }

    #[test]
    fn gauge_rules() {
        let r = TwoLevel { value: 0.0, v: [1.0, 0.0] };
        let c = libm::sqrt(1.0 - 0.98 * 0.98);
        let m = TwoLevel { value: 0.0, v: [-0.98, c] };
        let flipped = align_gauge(&r, &m).unwrap();
        assert!((r.inner(&flipped).unwrap() - 0.98).abs() < 1e-15);
        let same = TwoLevel { value: 0.0, v: [0.98, c] };
        assert_eq!(align_gauge(&r, &same).unwrap().v, same.v);
        let weak = TwoLevel { value: 0.0, v: [0.1, libm::sqrt(0.99)] };
        assert!(matches!(align_gauge(&r, &weak), Err(CoreError::AmbiguousGauge(_))));
    }

    #[test]
    fn degenerate_cluster_rotated_to_previous() {
        let prev = [TwoLevel { value: 1.0, v: [0.6, 0.8] }, TwoLevel { value: 1.0, v: [-0.8, 0.6] }];
        let cands = vec![TwoLevel { value: 1.0, v: [1.0, 0.0] }, TwoLevel { value: 1.0 + 1e-9, v: [0.0, 1.0] }];
        let out = disambiguate(&[&prev[0], &prev[1]], &cands).unwrap();
        assert!((out[0].inner(&prev[0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((out[1].inner(&prev[1]).unwrap() - 1.0).abs() < 1e-12);
    }
}
