//! Symmetric banded matrices and their direct solvers.
//!
//! Storage keeps the lower band only: row `i` holds columns `i - hb ..= i`,
//! where `hb` is the half-bandwidth. The elastic stencil of an interior node
//! spans 11 consecutive degrees of freedom, so rod Hessians have `hb = 10`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, sqrt};

/// Half-bandwidth of a rod Hessian (stencil width 11).
pub const ROD_HALF_BANDWIDTH: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct SymBandMatrix {
    n: usize,
    hb: usize,
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, hb: usize) -> Self {
        SymBandMatrix { n, hb, data: vec![0.0; n * (hb + 1)] }
    }

    /// Zero matrix sized for a rod with `n_nodes` nodes.
    pub fn for_rod(n_nodes: usize) -> Self {
        Self::zeros(4 * n_nodes - 1, ROD_HALF_BANDWIDTH)
    }

    pub fn identity(n: usize, hb: usize) -> Self {
        let mut m = Self::zeros(n, hb);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn half_bandwidth(&self) -> usize {
        self.hb
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // i >= j, i - j <= hb
        i * (self.hb + 1) + (j + self.hb - i)
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) <= self.hb
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.hb {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.hb, "entry ({i}, {j}) outside band {}", self.hb);
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Adds `v` to the symmetric pair `(i, j)` / `(j, i)`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.hb, "entry ({i}, {j}) outside band {}", self.hb);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Adds a dense symmetric block whose rows/cols map to `dofs`.
    /// Only the lower triangle of `block` is read.
    pub fn add_block<const M: usize>(&mut self, dofs: &[usize; M], block: &[[f64; M]; M]) {
        for a in 0..M {
            for b in 0..=a {
                let (i, j) = (dofs[a], dofs[b]);
                if i == j && a != b {
                    self.add(i, j, 2.0 * block[a][b]);
                } else {
                    self.add(i, j, block[a][b]);
                }
            }
        }
    }

    /// Adds a dense symmetric block acting on the contiguous range `start .. start + M`.
    pub fn add_contiguous_block<const M: usize>(&mut self, start: usize, block: &[[f64; M]; M]) {
        for a in 0..M {
            let i = start + a;
            let row = i * (self.hb + 1) + self.hb - i;
            for b in 0..=a {
                self.data[row + start + b] += block[a][b];
            }
        }
    }

    pub fn add_diag(&mut self, i: usize, v: f64) {
        let k = self.idx(i, i);
        self.data[k] += v;
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Replaces row/column `i` by the identity row (used for clamped dofs).
    pub fn pin(&mut self, i: usize) {
        let lo = i.saturating_sub(self.hb);
        let hi = (i + self.hb).min(self.n - 1);
        for j in lo..=hi {
            self.set(i, j, 0.0);
        }
        self.set(i, i, 1.0);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.hb);
            for j in lo..i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.data[self.idx(i, i)] * x[i];
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(abs(*v)))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Banded Cholesky factorization; fails when the matrix is not positive definite.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let mut f = BandCholesky { n: 0, hb: 0, l: Vec::new() };
        self.cholesky_into(&mut f)?;
        Ok(f)
    }

    /// Cholesky factorization into a reusable workspace.
    pub fn cholesky_into(&self, f: &mut BandCholesky) -> Result<()> {
        let (n, hb) = (self.n, self.hb);
        f.n = n;
        f.hb = hb;
        f.l.clear();
        f.l.extend_from_slice(&self.data);
        let w = hb + 1;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let l = &mut f.l;
        for j in 0..n {
            let jrow = j * w + hb - j;
            let lo = j.saturating_sub(hb);
            let mut d = l[jrow + j];
            for k in lo..j {
                let v = l[jrow + k];
                d -= v * v;
            }
            if !(d > 1e-14 * scale) {
                return Err(Error::SingularMatrix { pivot: j });
            }
            let d = sqrt(d);
            l[jrow + j] = d;
            let inv = 1.0 / d;
            let hi = (j + hb).min(n - 1);
            for i in j + 1..=hi {
                let irow = i * w + hb - i;
                let lo_i = i.saturating_sub(hb);
                let mut s = l[irow + j];
                for k in lo_i..j {
                    s -= l[irow + k] * l[jrow + k];
                }
                l[irow + j] = s * inv;
            }
        }
        Ok(())
    }

    /// Banded LU with partial pivoting.
    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Clone, Debug, Default)]
pub struct BandCholesky {
    n: usize,
    hb: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, hb, w) = (self.n, self.hb, self.hb + 1);
        for i in 0..n {
            let row = i * w + hb - i;
            let mut s = b[i];
            for k in i.saturating_sub(hb)..i {
                s -= self.l[row + k] * b[k];
            }
            b[i] = s / self.l[row + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            let hi = (i + hb).min(n - 1);
            for k in i + 1..=hi {
                s -= self.l[k * w + hb - k + i] * b[k];
            }
            b[i] = s / self.l[i * w + hb - i + i];
        }
    }
}

/// General banded LU factors (`kl = hb`, upper band grown to `2 hb` by pivoting).
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    hb: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    #[inline]
    fn width(hb: usize) -> usize {
        3 * hb + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * Self::width(self.hb) + (j + self.hb - i)
    }

    fn factor(m: &SymBandMatrix) -> Result<Self> {
        let (n, hb) = (m.n, m.hb);
        let w = Self::width(hb);
        let mut lu = BandLu { n, hb, a: vec![0.0; n * w], piv: vec![0; n] };
        for i in 0..n {
            let lo = i.saturating_sub(hb);
            let hi = (i + hb).min(n - 1);
            for j in lo..=hi {
                let k = lu.at(i, j);
                lu.a[k] = m.get(i, j);
            }
        }
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + hb).min(n - 1);
            let last_col = (k + 2 * hb).min(n - 1);
            let mut p = k;
            let mut best = abs(lu.a[lu.at(k, k)]);
            for i in k + 1..=last_row {
                let v = abs(lu.a[lu.at(i, k)]);
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 1e-14 * scale) {
                return Err(Error::SingularMatrix { pivot: k });
            }
            lu.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (x, y) = (lu.at(k, j), lu.at(p, j));
                    lu.a.swap(x, y);
                }
            }
            let pivot = lu.a[lu.at(k, k)];
            for i in k + 1..=last_row {
                let ik = lu.at(i, k);
                let l = lu.a[ik] / pivot;
                lu.a[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let kj = lu.a[lu.at(k, j)];
                        let ij = lu.at(i, j);
                        lu.a[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, hb) = (self.n, self.hb);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + hb).min(n - 1) {
                b[i] -= self.a[self.at(i, k)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + 2 * hb).min(n - 1) {
                s -= self.a[self.at(i, j)] * b[j];
            }
            b[i] = s / self.a[self.at(i, i)];
        }
    }
}

/// Solves `A x = b` for a symmetric banded `A`.
///
/// Tries Cholesky first and falls back to pivoted LU for indefinite matrices.
pub fn solve_banded(matrix: &SymBandMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != matrix.dim() {
        return Err(Error::DimensionMismatch { expected: matrix.dim(), got: rhs.len() });
    }
    let mut x = rhs.to_vec();
    match matrix.cholesky() {
        Ok(f) => f.solve_in_place(&mut x),
        Err(_) => matrix.lu()?.solve_in_place(&mut x),
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix { pivot: 0 });
    }
    Ok(x)
}
