//! Shift-invert subspace iteration with Rayleigh–Ritz extraction.
//!
//! Each sweep multiplies a block of `count + guard` vectors by
//! `(A - σI)⁻¹` through one banded factorization, orthonormalizes, and
//! projects `A` onto the block. Convergence of eigenvalue `λ` goes like
//! `|λ - σ| / |λ_{p+1} - σ|` per iteration, and degenerate pairs come out
//! as an orthonormal basis of their eigenspace.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::banded::Factorization;
use super::operator::LaplaceOperator;
use crate::error::{CoreError, Result};
use crate::quadrature::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSettings {
    /// Relative residual `‖Ax - λx‖ / (|λ|‖x‖)` accepted as converged.
    pub tol: f64,
    pub max_iter: usize,
    /// Extra block vectors beyond the requested count.
    pub guard: usize,
    pub seed: u64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 300, guard: 8, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// unit Euclidean norm, operator ordering
    pub vector: Vec<f64>,
    /// relative residual
    pub residual: f64,
}

/// The `count` lowest eigenpairs of `op` with eigenvalue `>= shift`, ascending.
pub fn lowest_above(
    op: &LaplaceOperator,
    shift: f64,
    count: usize,
    settings: &EigenSettings,
) -> Result<Vec<EigenPair>> {
    let n = op.dim();
    if count == 0 {
        return Err(CoreError::InvalidArgument("count must be at least 1".into()));
    }
    if count > n {
        return Err(CoreError::InvalidArgument(alloc::format!("requested {count} modes from a {n}-node interior")));
    }
    let factor = Factorization::new(op, shift)?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut block = (count + settings.guard.max(2)).min(n);
    let mut x: Vec<Vec<f64>> = (0..block).map(|_| random_vector(&mut rng, n)).collect();
    orthonormalize(&mut x);

    let mut ax = vec![0.0; n];
    let mut worst = f64::INFINITY;
    for iter in 0..settings.max_iter {
        for v in x.iter_mut() {
            factor.solve_in_place(v);
        }
        let kept = orthonormalize(&mut x);
        if kept < x.len() {
            // lost rank: refill with fresh directions
            while x.len() < block {
                x.push(random_vector(&mut rng, n));
            }
            orthonormalize(&mut x);
        }
        let (values, vectors) = rayleigh_ritz(op, &x);
        x = vectors;

        let mut wanted: Vec<usize> = (0..values.len()).filter(|&i| values[i] >= shift).collect();
        wanted.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        if wanted.len() < (count + settings.guard / 2).min(n) && iter > 2 && block < n {
            // eigenvalues below the shift crowd the block and starve the guard
            block = (block + count.max(settings.guard)).min(n);
            while x.len() < block {
                x.push(random_vector(&mut rng, n));
            }
            orthonormalize(&mut x);
            continue;
        }
        if wanted.len() < count {
            continue;
        }
        wanted.truncate(count);
        worst = 0.0;
        for &i in &wanted {
            op.apply(&x[i], &mut ax);
            let r: f64 = ax.iter().zip(&x[i]).map(|(a, v)| (a - values[i] * v).powi(2)).sum();
            worst = worst.max(libm::sqrt(r) / values[i].abs().max(f64::MIN_POSITIVE));
        }
        if worst <= settings.tol {
            return Ok(wanted
                .into_iter()
                .map(|i| {
                    op.apply(&x[i], &mut ax);
                    let r: f64 = ax.iter().zip(&x[i]).map(|(a, v)| (a - values[i] * v).powi(2)).sum();
                    EigenPair { value: values[i], vector: x[i].clone(), residual: libm::sqrt(r) / values[i].abs() }
                })
                .collect());
        }
    }
    Err(CoreError::NoConvergence { iterations: settings.max_iter, residual: worst })
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5).collect()
}

/// Two-pass modified Gram–Schmidt; drops vectors that collapse. Returns the
/// number kept.
fn orthonormalize(vs: &mut Vec<Vec<f64>>) -> usize {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for mut v in vs.drain(..) {
        let before = libm::sqrt(dot(&v, &v));
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let norm = libm::sqrt(dot(&v, &v));
        if norm > 1e-10 * before && norm > 0.0 {
            v.iter_mut().for_each(|a| *a /= norm);
            out.push(v);
        }
    }
    let kept = out.len();
    *vs = out;
    kept
}

fn rayleigh_ritz(op: &LaplaceOperator, q: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = q.len();
    let n = op.dim();
    let mut aq = vec![vec![0.0; n]; p];
    for (v, out) in q.iter().zip(aq.iter_mut()) {
        op.apply(v, out);
    }
    let h = DMatrix::from_fn(p, p, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        dot(&q[a], &aq[b])
    });
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&c| {
            let mut y = vec![0.0; n];
            for (r, qv) in q.iter().enumerate() {
                let g = eig.eigenvectors[(r, c)];
                y.iter_mut().zip(qv).for_each(|(a, b)| *a += g * b);
            }
            y
        })
        .collect();
    (values, vectors)
}
