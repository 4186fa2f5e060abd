//! Unlabeled dense complex matrices: the storage and arithmetic layer under
//! the labeled operator type. Row-major, no panics on shape errors in release
//! (shape checks are `debug_assert`ed in hot paths, explicit in public ones).

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub nrows: usize,
    pub ncols: usize,
    pub a: Vec<Complex64>,
}

impl Mat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Mat {
            nrows,
            ncols,
            a: vec![ZERO; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut a = Vec::with_capacity(nrows * ncols);
        for r in rows {
            debug_assert_eq!(r.len(), ncols);
            a.extend_from_slice(r);
        }
        Mat { nrows, ncols, a }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.a[r * self.ncols + c]
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.a[r * self.ncols..(r + 1) * self.ncols]
    }

    pub fn col(&self, c: usize) -> Vec<Complex64> {
        (0..self.nrows).map(|r| self.at(r, c)).collect()
    }

    pub fn set_col(&mut self, c: usize, v: &[Complex64]) {
        debug_assert_eq!(v.len(), self.nrows);
        for r in 0..self.nrows {
            self[(r, c)] = v[r];
        }
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn mul(&self, rhs: &Mat) -> Mat {
        debug_assert_eq!(self.ncols, rhs.nrows);
        let mut out = Mat::zeros(self.nrows, rhs.ncols);
        // ikj loop order keeps the inner accesses contiguous.
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let lik = self.at(i, k);
                if lik == ZERO {
                    continue;
                }
                let rrow = &rhs.a[k * rhs.ncols..(k + 1) * rhs.ncols];
                let orow = &mut out.a[i * rhs.ncols..(i + 1) * rhs.ncols];
                for (o, r) in orow.iter_mut().zip(rrow.iter()) {
                    *o += lik * r;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(self.ncols, v.len());
        let mut out = vec![ZERO; self.nrows];
        for i in 0..self.nrows {
            let row = self.row(i);
            let mut acc = ZERO;
            for (x, y) in row.iter().zip(v.iter()) {
                acc += x * y;
            }
            out[i] = acc;
        }
        out
    }

    pub fn add(&self, rhs: &Mat) -> Mat {
        debug_assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let mut out = self.clone();
        for (o, r) in out.a.iter_mut().zip(rhs.a.iter()) {
            *o += r;
        }
        out
    }

    pub fn sub(&self, rhs: &Mat) -> Mat {
        debug_assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let mut out = self.clone();
        for (o, r) in out.a.iter_mut().zip(rhs.a.iter()) {
            *o -= r;
        }
        out
    }

    pub fn scaled(&self, s: Complex64) -> Mat {
        let mut out = self.clone();
        for o in out.a.iter_mut() {
            *o *= s;
        }
        out
    }

    pub fn adjoint(&self) -> Mat {
        let mut out = Mat::zeros(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for c in 0..self.ncols {
                out[(c, r)] = self.at(r, c).conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.ncols, self.nrows);
        for r in 0..self.nrows {
            for c in 0..self.ncols {
                out[(c, r)] = self.at(r, c);
            }
        }
        out
    }

    pub fn conj(&self) -> Mat {
        let mut out = self.clone();
        for o in out.a.iter_mut() {
            *o = o.conj();
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        debug_assert!(self.is_square());
        (0..self.nrows).map(|i| self.at(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.a.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        debug_assert!(self.is_square());
        let mut dev: f64 = 0.0;
        for r in 0..self.nrows {
            for c in r..self.ncols {
                dev = dev.max((self.at(r, c) - self.at(c, r).conj()).norm());
            }
        }
        dev
    }

    /// (A + A†)/2; cheap insurance before spectral calls.
    pub fn hermitized(&self) -> Mat {
        let mut out = self.clone();
        for r in 0..self.nrows {
            for c in r..self.ncols {
                let m = (self.at(r, c) + self.at(c, r).conj()) * Complex64::new(0.5, 0.0);
                out[(r, c)] = m;
                out[(c, r)] = m.conj();
            }
        }
        out
    }

    pub fn kron(&self, rhs: &Mat) -> Mat {
        let mut out = Mat::zeros(self.nrows * rhs.nrows, self.ncols * rhs.ncols);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                let s = self.at(i, j);
                if s == ZERO {
                    continue;
                }
                for k in 0..rhs.nrows {
                    for l in 0..rhs.ncols {
                        out[(i * rhs.nrows + k, j * rhs.ncols + l)] = s * rhs.at(k, l);
                    }
                }
            }
        }
        out
    }

    /// Deviation of U†U from the identity; 0 for exact isometries.
    pub fn isometry_deviation(&self) -> f64 {
        self.adjoint().mul(self).sub(&Mat::identity(self.ncols)).max_abs()
    }

    /// Extends orthonormal columns to a full orthonormal basis of C^nrows.
    ///
    /// Candidates are standard basis vectors; two rounds of Gram-Schmidt keep
    /// the result orthonormal to working precision.
    pub fn complete_basis(&self) -> Mat {
        let n = self.nrows;
        let mut cols: Vec<Vec<Complex64>> = (0..self.ncols).map(|c| self.col(c)).collect();
        let mut e = 0usize;
        while cols.len() < n {
            debug_assert!(e < n, "basis completion ran out of candidates");
            let mut v = vec![ZERO; n];
            v[e] = ONE;
            e += 1;
            for _ in 0..2 {
                for c in &cols {
                    let ip: Complex64 = c.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                    for (vi, ci) in v.iter_mut().zip(c.iter()) {
                        *vi -= ip * ci;
                    }
                }
            }
            let norm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum());
            if norm < 1e-8 {
                continue;
            }
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            cols.push(v);
        }
        let mut out = Mat::zeros(n, n);
        for (c, col) in cols.iter().enumerate() {
            out.set_col(c, col);
        }
        out
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = Complex64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.a[r * self.ncols + c]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.a[r * self.ncols + c]
    }
}

/// Euclidean inner product ⟨a|b⟩ with conjugation on the left argument.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mul_matches_hand_computation() {
        let a = Mat::from_rows(&[&[c(1.0, 0.0), c(0.0, 1.0)], &[c(2.0, 0.0), c(0.0, 0.0)]]);
        let b = Mat::from_rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(0.0, 0.0)]]);
        let ab = a.mul(&b);
        assert_eq!(ab.at(0, 0), c(0.0, 1.0));
        assert_eq!(ab.at(0, 1), c(1.0, 0.0));
        assert_eq!(ab.at(1, 0), c(0.0, 0.0));
        assert_eq!(ab.at(1, 1), c(2.0, 0.0));
    }

    #[test]
    fn kron_block_structure() {
        let a = Mat::from_rows(&[&[c(1.0, 0.0), c(2.0, 0.0)], &[c(3.0, 0.0), c(4.0, 0.0)]]);
        let id = Mat::identity(2);
        let k = a.kron(&id);
        assert_eq!(k.at(0, 0), c(1.0, 0.0));
        assert_eq!(k.at(1, 1), c(1.0, 0.0));
        assert_eq!(k.at(0, 2), c(2.0, 0.0));
        assert_eq!(k.at(2, 0), c(3.0, 0.0));
        assert_eq!(k.at(3, 3), c(4.0, 0.0));
    }

    #[test]
    fn complete_basis_is_unitary() {
        let mut start = Mat::zeros(4, 1);
        let s = 0.5;
        for r in 0..4 {
            start[(r, 0)] = c(s, 0.0);
        }
        let full = start.complete_basis();
        assert!(full.isometry_deviation() < 1e-12);
        // First column is preserved.
        for r in 0..4 {
            assert!((full.at(r, 0) - c(s, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn hermitized_is_hermitian() {
        let a = Mat::from_rows(&[&[c(1.0, 0.5), c(2.0, -1.0)], &[c(0.0, 3.0), c(4.0, -0.5)]]);
        let h = a.hermitized();
        assert!(h.hermiticity_deviation() < 1e-15);
    }
}
