//! Small direct solvers: a square dense LU with partial pivoting and a
//! Thomas factorization for the diagonally dominant tridiagonal systems
//! produced by the even-reduced second-difference operator.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Square row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn lu(self) -> Result<Lu<T>> {
        Lu::factor(self)
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// In-place LU factors with the row permutation from partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    a: DenseMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn factor(mut a: DenseMatrix<T>) -> Result<Self> {
        let n = a.n;
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.data.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let tiny = scale * T::epsilon() * T::of(n.max(1));
        for k in 0..n {
            let mut p = k;
            let mut best = a[(k, k)].abs();
            for i in k + 1..n {
                let v = a[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular(k));
            }
            if p != k {
                perm.swap(p, k);
                let (lo, hi) = a.data.split_at_mut(p * n);
                lo[k * n..(k + 1) * n].swap_with_slice(&mut hi[..n]);
            }
            let (top, bottom) = a.data.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n..(k + 1) * n];
            let pivot = pivot_row[k];
            for row in bottom.chunks_exact_mut(n) {
                let l = row[k] / pivot;
                row[k] = l;
                if l != T::zero() {
                    for (r, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                        *r -= l * u;
                    }
                }
            }
        }
        Ok(Self { a, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.a.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.a.row(i);
            let mut s = x[i];
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.a.row(i);
            let mut s = x[i];
            for j in i + 1..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        x
    }
}

/// Tridiagonal matrix `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1]`.
/// `sub[0]` and `sup[n-1]` are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal<T> {
    pub sub: Vec<T>,
    pub diag: Vec<T>,
    pub sup: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas factorization without pivoting; valid for the strictly
    /// diagonally dominant systems used here.
    pub fn factor(&self) -> Result<ThomasFactors<T>> {
        let n = self.len();
        let mut inv_pivot = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        let mut prev_upper = T::zero();
        for i in 0..n {
            let d = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.sub[i] * prev_upper
            };
            if d == T::zero() || !d.is_finite() {
                return Err(Error::Singular(i));
            }
            let inv = T::one() / d;
            let u = if i + 1 < n { self.sup[i] * inv } else { T::zero() };
            inv_pivot.push(inv);
            upper.push(u);
            prev_upper = u;
        }
        Ok(ThomasFactors {
            sub: self.sub.clone(),
            inv_pivot,
            upper,
        })
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        Ok(self.factor()?.solve(rhs))
    }

    /// LU with partial pivoting; fill-in produces a second superdiagonal.
    pub fn factor_pivoted(&self) -> Result<PivotedTridiagonal<T>> {
        let n = self.len();
        let mut d = self.diag.clone();
        let mut dl: Vec<T> = (1..n).map(|i| self.sub[i]).collect();
        let mut du: Vec<T> = (0..n.saturating_sub(1)).map(|i| self.sup[i]).collect();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != T::zero() {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if let Some(i) = d.iter().position(|&v| v == T::zero() || !v.is_finite()) {
            return Err(Error::Singular(i));
        }
        Ok(PivotedTridiagonal { dl, d, du, du2, swapped })
    }
}

#[derive(Clone, Debug)]
pub struct PivotedTridiagonal<T> {
    dl: Vec<T>,
    d: Vec<T>,
    du: Vec<T>,
    du2: Vec<T>,
    swapped: Vec<bool>,
}

impl<T: Real> PivotedTridiagonal<T> {
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.d.len();
        assert_eq!(rhs.len(), n);
        let mut b = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                let v = b[i];
                b[i + 1] -= self.dl[i] * v;
            }
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v -= self.du[i] * b[i + 1];
            }
            if i + 2 < n {
                v -= self.du2[i] * b[i + 2];
            }
            b[i] = v / self.d[i];
        }
        b
    }
}

#[derive(Clone, Debug)]
pub struct ThomasFactors<T> {
    sub: Vec<T>,
    inv_pivot: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> ThomasFactors<T> {
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.inv_pivot.len();
        assert_eq!(rhs.len(), n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let v = if i == 0 {
                rhs[0]
            } else {
                rhs[i] - self.sub[i] * y[i - 1]
            };
            y.push(v * self.inv_pivot[i]);
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let next = y[i + 1];
            y[i] -= self.upper[i] * next;
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lu_solves_permuted_system() {
        let mut a = DenseMatrix::<f64>::zeros(3);
        let rows = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = rows[i][j];
            }
        }
        let x = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x);
        let sol = a.lu().unwrap().solve(&b);
        for (s, e) in sol.iter().zip(x) {
            assert_relative_eq!(*s, e, epsilon = 1e-14);
        }
    }

    #[test]
    fn pivoted_tridiagonal_matches_dense() {
        let n = 6;
        let t = Tridiagonal {
            sub: (0..n).map(|i| 1.0 + i as f64).collect(),
            diag: (0..n).map(|i| if i % 2 == 0 { 0.0 } else { 0.3 * i as f64 - 1.0 }).collect(),
            sup: (0..n).map(|i| 2.0 + 0.5 * i as f64).collect(),
        };
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let b = t.mul_vec(&x);
        let sol = t.factor_pivoted().unwrap().solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            assert_relative_eq!(*s, *e, epsilon = 1e-12);
        }
        assert!(t.factor().is_err());
    }

    #[test]
    fn lu_reports_singular() {
        let a = DenseMatrix::<f64>::zeros(2);
        assert_eq!(a.lu().unwrap_err(), Error::Singular(0));
    }

    #[test]
    fn thomas_matches_product() {
        let n = 6;
        let t = Tridiagonal {
            sub: vec![-1.0; n],
            diag: (0..n).map(|i| 3.0 + i as f64 * 0.1).collect(),
            sup: vec![-2.0 / 3.0; n],
        };
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = t.mul_vec(&x);
        let sol = t.solve(&b).unwrap();
        for (s, e) in sol.iter().zip(&x) {
            assert_relative_eq!(*s, *e, epsilon = 1e-14);
        }
    }
}
