//! Direct solvers for banded systems `(A - σI) x = b`.
//!
//! Cholesky is used when the shift keeps the matrix definite; otherwise a
//! band LU with partial pivoting (lower bandwidth `w`, upper `2w` after
//! fill-in).

use alloc::vec;
use alloc::vec::Vec;

use super::operator::LaplaceOperator;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone)]
pub enum Factorization {
    Cholesky(BandCholesky),
    Lu(BandLu),
}

impl Factorization {
    /// Factor `A - shift·I`.
    pub fn new(op: &LaplaceOperator, shift: f64) -> Result<Self> {
        if shift <= 0.0 {
            if let Some(c) = BandCholesky::new(op, shift) {
                return Ok(Factorization::Cholesky(c));
            }
        }
        BandLu::new(op, shift).map(Factorization::Lu)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        match self {
            Factorization::Cholesky(c) => c.solve_in_place(b),
            Factorization::Lu(l) => l.solve_in_place(b),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    w: usize,
    /// row `i` holds columns `i-w ..= i` at offsets `0 ..= w`
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn new(op: &LaplaceOperator, shift: f64) -> Option<Self> {
        let n = op.dim();
        let w = op.bandwidth();
        let s = w + 1;
        let mut l = vec![0.0; n * s];
        for i in 0..n {
            l[i * s + w] = op.diagonal(i) - shift;
            for (c, v) in op.row(i) {
                if c < i {
                    l[i * s + (c + w - i)] = v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(w);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(w));
                let mut acc = l[i * s + (j + w - i)];
                let ri = &l[i * s + (k0 + w - i)..i * s + (j + w - i)];
                let rj = &l[j * s + (k0 + w - j)..j * s + w];
                for (a, b) in ri.iter().zip(rj) {
                    acc -= a * b;
                }
                if j < i {
                    l[i * s + (j + w - i)] = acc / l[j * s + w];
                } else {
                    if !(acc > 0.0) {
                        return None;
                    }
                    l[i * s + w] = libm::sqrt(acc);
                }
            }
        }
        Some(Self { n, w, l })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, w, s) = (self.n, self.w, self.w + 1);
        for i in 0..n {
            let k0 = i.saturating_sub(w);
            let row = &self.l[i * s + (k0 + w - i)..i * s + w];
            let mut acc = b[i];
            for (a, x) in row.iter().zip(&b[k0..i]) {
                acc -= a * x;
            }
            b[i] = acc / self.l[i * s + w];
        }
        for i in (0..n).rev() {
            let xi = b[i] / self.l[i * s + w];
            b[i] = xi;
            let k0 = i.saturating_sub(w);
            let row = &self.l[i * s + (k0 + w - i)..i * s + w];
            for (a, y) in row.iter().zip(&mut b[k0..i]) {
                *y -= a * xi;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    w: usize,
    /// row `i` holds columns `i-w ..= i+2w` at offsets `0 ..= 3w`
    u: Vec<f64>,
    /// multipliers of step `k` for rows `k+1 ..= k+w`
    mult: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn new(op: &LaplaceOperator, shift: f64) -> Result<Self> {
        let n = op.dim();
        let w = op.bandwidth();
        let s = 3 * w + 1;
        let mut u = vec![0.0; n * s];
        for i in 0..n {
            u[i * s + w] = op.diagonal(i) - shift;
            for (c, v) in op.row(i) {
                u[i * s + (c + w - i)] = v;
            }
        }
        let mut mult = vec![0.0; n * w.max(1)];
        let mut pivots = vec![0; n];
        let scale = op.spectral_bound().max(shift.abs()).max(1.0);
        for k in 0..n {
            let last = (k + w).min(n - 1);
            let mut p = k;
            let mut best = u[k * s + w].abs();
            for r in k + 1..=last {
                let v = u[r * s + (k + w - r)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= f64::EPSILON * 1e-3 * scale {
                return Err(CoreError::Singular(k));
            }
            pivots[k] = p;
            let jmax = (k + 2 * w).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = k * s + (j + w - k);
                    // row p stores columns up to p + 2w >= jmax
                    let b = p * s + (j + w - p);
                    u.swap(a, b);
                }
            }
            let pivot = u[k * s + w];
            for r in k + 1..=last {
                let m = u[r * s + (k + w - r)] / pivot;
                mult[k * w + (r - k - 1)] = m;
                u[r * s + (k + w - r)] = 0.0;
                if m != 0.0 {
                    let (head, tail) = u.split_at_mut(r * s);
                    let urow = &head[k * s + w + 1..k * s + w + 1 + (jmax - k)];
                    let rrow = &mut tail[(k + 1 + w - r)..(k + 1 + w - r) + (jmax - k)];
                    for (x, y) in rrow.iter_mut().zip(urow) {
                        *x -= m * y;
                    }
                }
            }
        }
        Ok(Self { n, w, u, mult, pivots })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, w, s) = (self.n, self.w, 3 * self.w + 1);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                let last = (k + w).min(n - 1);
                for r in k + 1..=last {
                    b[r] -= self.mult[k * w + (r - k - 1)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + 2 * w).min(n - 1);
            let row = &self.u[k * s + w + 1..k * s + w + 1 + (jmax - k)];
            let mut acc = b[k];
            for (a, x) in row.iter().zip(&b[k + 1..=jmax]) {
                acc -= a * x;
            }
            b[k] = acc / self.u[k * s + w];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mask, Grid2D, OvalShape};
    use crate::helmholtz::operator::assemble_operator;

    fn oval_operator() -> LaplaceOperator {
        let shape = OvalShape::new(1.2, 1.0, 0.35).unwrap();
        let grid = Grid2D::covering(&shape.bounding_box(), 0.08, 1).unwrap();
        assemble_operator(&build_mask(&shape, &grid).unwrap())
    }

    fn residual(op: &LaplaceOperator, shift: f64, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        op.apply(x, &mut ax);
        let num: f64 = ax.iter().zip(x).zip(b).map(|((a, x), b)| (a - shift * x - b).powi(2)).sum();
        let den: f64 = b.iter().map(|v| v * v).sum();
        libm::sqrt(num / den)
    }

    #[test]
    fn cholesky_solves_definite_system() {
        let op = oval_operator();
        let b: Vec<f64> = (0..op.dim()).map(|i| libm::sin(i as f64)).collect();
        let f = Factorization::new(&op, 0.0).unwrap();
        assert!(matches!(f, Factorization::Cholesky(_)));
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        assert!(residual(&op, 0.0, &x, &b) < 1e-12);
    }

    #[test]
    fn lu_solves_indefinite_system() {
        let op = oval_operator();
        let shift = 60.3;
        let b: Vec<f64> = (0..op.dim()).map(|i| libm::cos(0.3 * i as f64)).collect();
        let f = Factorization::new(&op, shift).unwrap();
        assert!(matches!(f, Factorization::Lu(_)));
        let mut x = b.clone();
        f.solve_in_place(&mut x);
        assert!(residual(&op, shift, &x, &b) < 1e-10);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let op = oval_operator();
        assert!(BandCholesky::new(&op, 60.3).is_none());
    }

    #[test]
    fn lu_agrees_with_cholesky_on_definite() {
        let op = oval_operator();
        let b: Vec<f64> = (0..op.dim()).map(|i| (i % 7) as f64 - 3.0).collect();
        let chol = BandCholesky::new(&op, -1.0).unwrap();
        let lu = BandLu::new(&op, -1.0).unwrap();
        let (mut x1, mut x2) = (b.clone(), b.clone());
        chol.solve_in_place(&mut x1);
        lu.solve_in_place(&mut x2);
        let err = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }
}
