//! Uniform periodic grid on [−L/2, L/2) and even fields on it.
//!
//! Node 0 is the trough x = −L/2 and node M/2 is the crest x = 0. Even
//! fields are determined by their values on nodes 0..=M/2, the "half"
//! representation used by all solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use crate::scalar::{sup_abs, Real};

/// Smallest admissible node count.
pub const MIN_NODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid<T> {
    period: T,
    nodes: usize,
}

impl<T: Real> TorusGrid<T> {
    pub fn new(period: T, nodes: usize) -> Result<Self> {
        if !(period > T::zero() && period.is_finite()) {
            return Err(Error::domain("L", period.to_f64_lossy(), "period must be positive and finite"));
        }
        if nodes < MIN_NODES || nodes % 2 != 0 {
            return Err(Error::domain("M", nodes as f64, "node count must be even and at least 8"));
        }
        Ok(Self { period, nodes })
    }

    #[inline]
    pub fn period(&self) -> T {
        self.period
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.period / T::of(self.nodes)
    }

    #[inline]
    pub fn node(&self, j: usize) -> T {
        -self.period / T::lit(2.0) + T::of(j) * self.spacing()
    }

    pub fn coordinates(&self) -> Vec<T> {
        (0..self.nodes).map(|j| self.node(j)).collect()
    }

    /// Number of nodes in the half representation, M/2 + 1.
    #[inline]
    pub fn half_len(&self) -> usize {
        self.nodes / 2 + 1
    }

    #[inline]
    pub fn crest_index(&self) -> usize {
        self.nodes / 2
    }

    /// 2π/L.
    pub fn wavenumber(&self) -> T {
        T::TAU() / self.period
    }

    /// Eigenvalue of −D² on cos(2πk x/L): (4/h²) sin²(πk/M).
    pub fn laplacian_symbol(&self, k: usize) -> T {
        let h = self.spacing();
        let s = (T::PI() * T::of(k) / T::of(self.nodes)).sin();
        T::lit(4.0) * s * s / (h * h)
    }

    /// Full-period trapezoid weights expressed on the half representation.
    pub fn half_weights(&self) -> Vec<T> {
        let h = self.spacing();
        let n = self.half_len();
        (0..n)
            .map(|j| if j == 0 || j == n - 1 { h } else { h + h })
            .collect()
    }

    /// −D² restricted to even fields, as a tridiagonal operator on the half
    /// representation, shifted by `shift` on the diagonal.
    pub(crate) fn shifted_neg_laplacian(&self, shift: &[T]) -> Tridiagonal<T> {
        let n = self.half_len();
        assert_eq!(shift.len(), n);
        let h = self.spacing();
        let inv = T::one() / (h * h);
        let two = T::lit(2.0);
        let mut sub = vec![-inv; n];
        let mut sup = vec![-inv; n];
        let diag: Vec<T> = shift.iter().map(|&s| s + two * inv).collect();
        sup[0] = -two * inv;
        sub[n - 1] = -two * inv;
        sub[0] = T::zero();
        sup[n - 1] = T::zero();
        Tridiagonal { sub, diag, sup }
    }
}

/// Mirrors nodes 0..=M/2 onto the full periodic grid.
pub(crate) fn mirror<T: Real>(half: &[T], nodes: usize) -> Vec<T> {
    let m2 = nodes / 2;
    assert_eq!(half.len(), m2 + 1);
    let mut v = Vec::with_capacity(nodes);
    v.extend_from_slice(half);
    for j in m2 + 1..nodes {
        v.push(half[nodes - j]);
    }
    v
}

/// D² on the half representation of an even field.
pub(crate) fn half_second_derivative<T: Real>(half: &[T], h: T) -> Vec<T> {
    let n = half.len();
    let inv = T::one() / (h * h);
    let two = T::lit(2.0);
    (0..n)
        .map(|j| {
            let left = if j == 0 { half[1] } else { half[j - 1] };
            let right = if j == n - 1 { half[n - 2] } else { half[j + 1] };
            (left - two * half[j] + right) * inv
        })
        .collect()
}

/// Even real field sampled on a [`TorusGrid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvenField<T> {
    grid: TorusGrid<T>,
    values: Vec<T>,
}

impl<T: Real> EvenField<T> {
    /// Builds a field from full-grid samples, checking the length and
    /// evenness to 1e−13 relative to the field's magnitude.
    pub fn new(grid: TorusGrid<T>, values: Vec<T>) -> Result<Self> {
        let field = Self::from_samples(grid, values)?;
        let defect = field.evenness_defect();
        let scale = T::one().max(field.sup_norm());
        if defect > T::tol_floor(1e-13, 16.0) * scale {
            return Err(Error::Contract(format!(
                "field is not even: max |u(x) - u(-x)| = {:e}",
                defect.to_f64_lossy()
            )));
        }
        Ok(field)
    }

    /// Builds a field from full-grid samples without the evenness check;
    /// pair with [`EvenField::enforce_evenness`] for noisy data.
    pub fn from_samples(grid: TorusGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(Error::Contract(format!(
                "field has {} samples but the grid has M = {} nodes",
                values.len(),
                grid.nodes()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_half(grid: TorusGrid<T>, half: &[T]) -> Self {
        Self {
            grid,
            values: mirror(half, grid.nodes()),
        }
    }

    /// Samples `f` on the half grid and mirrors, so the result is exactly even.
    pub fn from_fn(grid: TorusGrid<T>, f: impl Fn(T) -> T) -> Self {
        let half: Vec<T> = (0..grid.half_len()).map(|j| f(grid.node(j))).collect();
        Self::from_half(grid, &half)
    }

    pub fn constant(grid: TorusGrid<T>, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.nodes()],
        }
    }

    /// amplitude · cos(2πk x/L).
    pub fn cosine_mode(grid: TorusGrid<T>, k: usize, amplitude: T) -> Self {
        let a = grid.wavenumber() * T::of(k);
        Self::from_fn(grid, |x| amplitude * (a * x).cos())
    }

    /// Σ_k coeffs[k] cos(2πk x/L).
    pub fn from_cosine_coefficients(grid: TorusGrid<T>, coeffs: &[T]) -> Self {
        let alpha = grid.wavenumber();
        Self::from_fn(grid, |x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c * (alpha * T::of(k) * x).cos())
                .sum()
        })
    }

    #[inline]
    pub fn grid(&self) -> &TorusGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Nodes 0..=M/2, trough to crest.
    #[inline]
    pub fn half(&self) -> &[T] {
        &self.values[..self.grid.half_len()]
    }

    #[inline]
    pub fn crest(&self) -> T {
        self.values[self.grid.crest_index()]
    }

    #[inline]
    pub fn trough(&self) -> T {
        self.values[0]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::of(self.values.len())
    }

    pub fn sup_norm(&self) -> T {
        sup_abs(&self.values)
    }

    /// Grid inner product Σ u_j v_j h.
    pub fn inner(&self, other: &Self) -> T {
        assert_eq!(self.grid, other.grid);
        self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).sum::<T>() * self.grid.spacing()
    }

    pub fn l2_norm(&self) -> T {
        self.inner(self).sqrt()
    }

    /// max_k |u(M/2 + k) − u(M/2 − k)|.
    pub fn evenness_defect(&self) -> T {
        let m = self.grid.nodes();
        let c = m / 2;
        (1..c)
            .map(|k| (self.values[c + k] - self.values[c - k]).abs())
            .fold(T::zero(), T::max)
    }

    /// Periodic centered second difference.
    pub fn second_derivative(&self) -> Self {
        let m = self.grid.nodes();
        let h = self.grid.spacing();
        let inv = T::one() / (h * h);
        let two = T::lit(2.0);
        let v = &self.values;
        let values = (0..m)
            .map(|j| {
                let l = v[(j + m - 1) % m];
                let r = v[(j + 1) % m];
                (l - two * v[j] + r) * inv
            })
            .collect();
        Self { grid: self.grid, values }
    }

    /// Trapezoid cosine coefficient of mode k, 0 ≤ k ≤ M/2.
    pub fn cosine_coefficient(&self, k: usize) -> Result<T> {
        let m = self.grid.nodes();
        if k > m / 2 {
            return Err(Error::Index { k, max: m / 2 });
        }
        let l = self.grid.period();
        let h = self.grid.spacing();
        if k == 0 {
            return Ok(self.values.iter().copied().sum::<T>() * h / l);
        }
        // Angles are reduced exactly through the integer phase (j − M/2)k mod M.
        let base = T::TAU() / T::of(m);
        let s: T = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &u)| {
                let phase = ((j + m - m / 2) * k) % m;
                u * (base * T::of(phase)).cos()
            })
            .sum();
        Ok(T::lit(2.0) * s * h / l)
    }

    /// Even part about x = 0.
    pub fn enforce_evenness(&self) -> Self {
        let m = self.grid.nodes();
        let c = m / 2;
        let mut values = self.values.clone();
        let half = T::lit(0.5);
        for k in 1..c {
            let avg = (self.values[c + k] + self.values[c - k]) * half;
            values[c + k] = avg;
            values[c - k] = avg;
        }
        Self { grid: self.grid, values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(m: usize) -> TorusGrid<f64> {
        TorusGrid::new(std::f64::consts::TAU, m).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = TorusGrid::new(4.0f64, 16).unwrap();
        assert_eq!(g.node(0), -2.0);
        assert_eq!(g.node(g.crest_index()), 0.0);
        assert_eq!(g.spacing() * 16.0, 4.0);
        assert!(TorusGrid::new(4.0f64, 15).is_err());
        assert!(TorusGrid::new(4.0f64, 6).is_err());
        assert!(TorusGrid::new(-1.0f64, 16).is_err());
        let w: f64 = g.half_weights().iter().sum();
        assert_relative_eq!(w, 4.0, epsilon = 1e-14);
    }

    #[test]
    fn second_derivative_of_constant_and_cosine() {
        let g = grid(256);
        assert_eq!(EvenField::constant(g, 2.5).second_derivative().sup_norm(), 0.0);
        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&m| {
                let g = grid(m);
                let u = EvenField::cosine_mode(g, 1, 1.0);
                let du = u.second_derivative();
                du.zip_map(&u, |d, v| d + v).sup_norm()
            })
            .collect();
        assert!(errs[2] < 1e-4);
        assert_relative_eq!(errs[0] / errs[1], 4.0, max_relative = 0.01);
        assert_relative_eq!(errs[1] / errs[2], 4.0, max_relative = 0.01);
    }

    #[test]
    fn half_stencil_matches_full_stencil() {
        let g = grid(32);
        let u = EvenField::from_fn(g, |x| (x.cos() + 0.3 * (3.0 * x).cos()).exp());
        let full = u.second_derivative();
        let half = half_second_derivative(u.half(), g.spacing());
        for (a, b) in full.half().iter().zip(&half) {
            assert_relative_eq!(*a, *b, epsilon = 1e-11);
        }
        let t = g.shifted_neg_laplacian(&vec![0.0; g.half_len()]);
        let applied = t.mul_vec(u.half());
        for (a, b) in applied.iter().zip(&half) {
            assert_relative_eq!(*a, -*b, epsilon = 1e-11);
        }
    }

    #[test]
    fn cosine_coefficient_examples() {
        let g = grid(8);
        assert_relative_eq!(EvenField::constant(g, 1.0).cosine_coefficient(0).unwrap(), 1.0, epsilon = 1e-15);
        let u = EvenField::cosine_mode(g, 1, 3.0);
        assert_relative_eq!(u.cosine_coefficient(1).unwrap(), 3.0, epsilon = 1e-14);
        assert!(EvenField::cosine_mode(g, 1, 1.0).cosine_coefficient(2).unwrap().abs() < 1e-15);
        assert_eq!(u.cosine_coefficient(5), Err(Error::Index { k: 5, max: 4 }));
    }

    #[test]
    fn enforce_evenness_examples() {
        let g = grid(16);
        let even = EvenField::cosine_mode(g, 2, 1.0);
        assert_eq!(even.enforce_evenness(), even);
        let odd = EvenField::from_samples(g, g.coordinates().iter().map(|x| x.sin()).collect()).unwrap();
        assert!(odd.enforce_evenness().sup_norm() < 1e-15);
        let mixed = EvenField::from_samples(g, g.coordinates().iter().map(|x| x.sin() + x.cos()).collect()).unwrap();
        let once = mixed.enforce_evenness();
        assert_eq!(once.enforce_evenness(), once);
        assert!(EvenField::new(g, mixed.values().to_vec()).is_err());
    }

    #[test]
    fn new_rejects_wrong_length() {
        assert!(EvenField::new(grid(16), vec![0.0; 15]).is_err());
    }

    #[test]
    fn f32_fields_work() {
        let g = TorusGrid::new(6.0f32, 64).unwrap();
        let u = EvenField::cosine_mode(g, 1, 2.0f32);
        assert!((u.cosine_coefficient(1).unwrap() - 2.0).abs() < 1e-5);
    }
}
