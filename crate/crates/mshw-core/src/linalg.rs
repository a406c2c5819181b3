//! Dense linear algebra for small square matrices.
//!
//! Phase counts are capped at 32, so everything here is a plain row-major
//! `Vec<f64>` with O(K³) algorithms: LU with partial pivoting for solves and
//! condition estimates, cyclic Jacobi for symmetric eigendecompositions.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// A pivot collapsed to zero during factorization.
    Singular,
    /// Operands do not have matching dimensions.
    DimensionMismatch,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::Singular => write!(f, "matrix is singular to working precision"),
            LinalgError::DimensionMismatch => write!(f, "dimension mismatch"),
        }
    }
}

impl core::error::Error for LinalgError {}

/// Row-major square matrix.
#[derive(Clone, PartialEq)]
pub struct SquareMat {
    n: usize,
    data: Vec<f64>,
}

impl fmt::Debug for SquareMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SquareMat {}x{} [", self.n, self.n)?;
        for i in 0..self.n {
            write!(f, "  ")?;
            for j in 0..self.n {
                write!(f, "{:>12.6} ", self.get(i, j))?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl SquareMat {
    pub fn zeros(n: usize) -> Self {
        SquareMat { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(LinalgError::DimensionMismatch);
        }
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            data.extend_from_slice(r);
        }
        Ok(SquareMat { n, data })
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> SquareMat {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn add(&self, other: &SquareMat) -> SquareMat {
        debug_assert_eq!(self.n, other.n);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        SquareMat { n: self.n, data }
    }

    pub fn sub(&self, other: &SquareMat) -> SquareMat {
        debug_assert_eq!(self.n, other.n);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        SquareMat { n: self.n, data }
    }

    pub fn scale(&self, a: f64) -> SquareMat {
        SquareMat { n: self.n, data: self.data.iter().map(|v| a * v).collect() }
    }

    pub fn matmul(&self, rhs: &SquareMat) -> SquareMat {
        debug_assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.get(l, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(self.n, v.len());
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<Lu, LinalgError> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut piv = col;
            let mut best = a[perm[col] * n + col].abs();
            for r in col + 1..n {
                let cand = a[perm[r] * n + col].abs();
                if cand > best {
                    best = cand;
                    piv = r;
                }
            }
            if best == 0.0 {
                return Err(LinalgError::Singular);
            }
            perm.swap(col, piv);
            let prow = perm[col];
            let pval = a[prow * n + col];
            for r in col + 1..n {
                let row = perm[r];
                let factor = a[row * n + col] / pval;
                a[row * n + col] = factor;
                for j in col + 1..n {
                    a[row * n + j] -= factor * a[prow * n + j];
                }
            }
        }
        Ok(Lu { n, a, perm })
    }

    /// Solves `A x = b` with one step of iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch);
        }
        let lu = self.lu()?;
        let mut x = lu.solve(b);
        // One refinement pass keeps residuals near machine precision even for
        // moderately ill-conditioned inputs.
        let r: Vec<f64> = self
            .matvec(&x)
            .iter()
            .zip(b)
            .map(|(ax, bi)| bi - ax)
            .collect();
        let dx = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<SquareMat, LinalgError> {
        let n = self.n;
        let lu = self.lu()?;
        let mut inv = Self::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = lu.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        Ok(inv)
    }

    /// One-norm condition number computed from the explicit inverse.
    pub fn condition_one(&self) -> Result<f64, LinalgError> {
        let inv = self.inverse()?;
        Ok(self.norm_one() * inv.norm_one())
    }

    /// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues (ascending) and the matrix whose columns are the
    /// corresponding orthonormal eigenvectors.
    pub fn eigen_sym(&self) -> (Vec<f64>, SquareMat) {
        let n = self.n;
        let mut a = self.clone();
        // Symmetrize to wash out representation asymmetry.
        for i in 0..n {
            for j in i + 1..n {
                let m = 0.5 * (a.get(i, j) + a.get(j, i));
                a.set(i, j, m);
                a.set(j, i, m);
            }
        }
        let mut v = Self::identity(n);
        let scale = a.norm_inf().max(1.0);
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for i in 0..n {
                for j in i + 1..n {
                    off = off.max(a.get(i, j).abs());
                }
            }
            if off <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                    } else {
                        1.0 / (theta - libm::sqrt(1.0 + theta * theta))
                    };
                    let c = 1.0 / libm::sqrt(1.0 + t * t);
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());
        let vals: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
        let mut vecs = Self::zeros(n);
        for (newj, &oldj) in order.iter().enumerate() {
            for i in 0..n {
                vecs.set(i, newj, v.get(i, oldj));
            }
        }
        (vals, vecs)
    }
}

/// LU factors of a permuted matrix.
#[derive(Debug)]
pub struct Lu {
    n: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let row = self.perm[i];
            let mut s = b[row];
            for j in 0..i {
                s -= self.a[row * n + j] * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.perm[i];
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.a[row * n + j] * y[j];
            }
            y[i] = s / self.a[row * n + i];
        }
        y
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn inf_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_matches_hand_elimination() {
        let a = SquareMat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = a.solve(&[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = SquareMat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(a.lu().unwrap_err(), LinalgError::Singular);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = SquareMat::from_rows(&[
            vec![4.0, -2.0, 1.0],
            vec![0.5, 3.0, -1.0],
            vec![1.0, 0.0, 2.0],
        ])
        .unwrap();
        let prod = a.matmul(&a.inverse().unwrap());
        let id = SquareMat::identity(3);
        for i in 0..3 {
            for j in 0..3 {
                assert!((prod.get(i, j) - id.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn condition_of_identity_is_one() {
        let id = SquareMat::identity(4);
        assert!((id.condition_one().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // Symmetric matrix with eigenvalues 1 and 3.
        let a = SquareMat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (vals, vecs) = a.eigen_sym();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // Eigenvector equation A v = lambda v.
        for j in 0..2 {
            let v: Vec<f64> = (0..2).map(|i| vecs.get(i, j)).collect();
            let av = a.matvec(&v);
            for i in 0..2 {
                assert!((av[i] - vals[j] * v[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_handles_psd_rank_deficiency() {
        // Rank-one projector has eigenvalues {0, 1}.
        let a = SquareMat::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let (vals, _) = a.eigen_sym();
        assert!(vals[0].abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
    }
}
