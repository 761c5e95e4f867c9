//! Newton's method for F(c, f) = 0 bordered by one linear constraint
//! g_f·f + g_c·c = b, in the half representation of f.
//!
//! The Jacobian J = diag(d) + A⁻¹ with A = diag(e^φ) − D² tridiagonal, so
//! A·J = A·diag(d) + I is tridiagonal too and the bordered system costs
//! O(M) per solve.

use crate::elliptic::hb_invert;
use crate::error::{Error, Result};
use crate::linalg::{PivotedTridiagonal, ThomasFactors, Tridiagonal};
use crate::scalar::{sup_abs, Real};
use crate::torus::EvenField;
use crate::wave::WaveProblem;

pub(crate) struct LinearConstraint<T> {
    pub g_f: Vec<T>,
    pub g_c: T,
    pub rhs: T,
}

impl<T: Real> LinearConstraint<T> {
    fn eval(&self, c: T, f: &[T]) -> T {
        dot(&self.g_f, f) + self.g_c * c - self.rhs
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) struct ReducedJacobian<T> {
    a: Tridiagonal<T>,
    a_inv: ThomasFactors<T>,
    d: Vec<T>,
    t: PivotedTridiagonal<T>,
}

impl<T: Real> ReducedJacobian<T> {
    pub fn new(problem: &WaveProblem<T>, c: T, f: &[T], phi: &[T]) -> Result<Self> {
        let shift: Vec<T> = phi.iter().map(|p| p.exp()).collect();
        let a = problem.grid().shifted_neg_laplacian(&shift);
        let a_inv = a.factor()?;
        let c2 = c * c;
        let d: Vec<T> = f.iter().map(|&x| problem.law().dp(x) - c2 / (x * x * x)).collect();
        let n = d.len();
        let t = Tridiagonal {
            sub: (0..n).map(|i| if i > 0 { a.sub[i] * d[i - 1] } else { T::zero() }).collect(),
            diag: (0..n).map(|i| a.diag[i] * d[i] + T::one()).collect(),
            sup: (0..n).map(|i| if i + 1 < n { a.sup[i] * d[i + 1] } else { T::zero() }).collect(),
        }
        .factor_pivoted()?;
        Ok(Self { a, a_inv, d, t })
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let mut out = self.a_inv.solve(v);
        for ((o, &d), &x) in out.iter_mut().zip(&self.d).zip(v) {
            *o += d * x;
        }
        out
    }

    fn solve(&self, r: &[T]) -> Vec<T> {
        self.t.solve(&self.a.mul_vec(r))
    }

    fn bordered_once(&self, b: &[T], g: &[T], gamma: T, r: &[T], rho: T) -> Result<(Vec<T>, T)> {
        let x1 = self.solve(r);
        let x2 = self.solve(b);
        let den = gamma - dot(g, &x2);
        if den == T::zero() || !den.is_finite() {
            return Err(Error::Singular(r.len()));
        }
        let dc = (rho - dot(g, &x1)) / den;
        Ok((x1.iter().zip(&x2).map(|(&u, &v)| u - v * dc).collect(), dc))
    }

    /// Solves [J b; gᵀ γ][x; y] = [r; ρ] by block elimination plus one
    /// refinement sweep.
    pub fn solve_bordered(&self, b: &[T], g: &[T], gamma: T, r: &[T], rho: T) -> Result<(Vec<T>, T)> {
        let (mut x, mut y) = self.bordered_once(b, g, gamma, r, rho)?;
        let jx = self.apply(&x);
        let rr: Vec<T> = (0..r.len()).map(|i| r[i] - jx[i] - b[i] * y).collect();
        let rrho = rho - dot(g, &x) - gamma * y;
        let (ex, ey) = self.bordered_once(b, g, gamma, &rr, rrho)?;
        for (xi, e) in x.iter_mut().zip(ex) {
            *xi += e;
        }
        y += ey;
        Ok((x, y))
    }
}

/// ∂_c F = c (f⁻² − 1) on the half representation.
pub(crate) fn c_derivative<T: Real>(c: T, f: &[T]) -> Vec<T> {
    f.iter().map(|&x| c * (T::one() / (x * x) - T::one())).collect()
}

pub(crate) struct NewtonOutcome<T> {
    pub c: T,
    pub f: Vec<T>,
    pub phi: Vec<T>,
    pub iterations: usize,
}

/// Runs at most `max_iter` updates; converged when sup|F| ≤ tol and the
/// constraint holds to tol.
pub(crate) fn bordered_newton<T: Real>(
    problem: &WaveProblem<T>,
    mut c: T,
    mut f: Vec<T>,
    constraint: &LinearConstraint<T>,
    tol: T,
    max_iter: usize,
) -> Result<NewtonOutcome<T>> {
    let grid = *problem.grid();
    let floor = problem.elliptic().delta_floor;
    let mut it = 0;
    loop {
        let field = EvenField::from_half(grid, &f);
        let phi = hb_invert(&field, problem.elliptic())?.phi.half().to_vec();
        let r = problem.half_residual(c, &f, &phi);
        let res = sup_abs(&r);
        let cres = constraint.eval(c, &f);
        if res <= tol && cres.abs() <= tol {
            return Ok(NewtonOutcome {
                c,
                f,
                phi,
                iterations: it,
            });
        }
        if it >= max_iter || !res.is_finite() {
            return Err(Error::NonConvergence {
                solver: "bordered Newton",
                iterations: it,
                residual: res.to_f64_lossy(),
                hint: "",
            });
        }

        let jac = ReducedJacobian::new(problem, c, &f, &phi)?;
        let neg_r: Vec<T> = r.iter().map(|&v| -v).collect();
        let (df, dc) = jac.solve_bordered(&c_derivative(c, &f), &constraint.g_f, constraint.g_c, &neg_r, -cres)?;

        // Keep the density above the positivity floor.
        let mut step = T::one();
        for _ in 0..30 {
            if f.iter().zip(&df).all(|(&x, &d)| x + step * d > floor) {
                break;
            }
            step /= T::lit(2.0);
        }
        for (x, d) in f.iter_mut().zip(&df) {
            *x += step * *d;
        }
        c += step * dc;
        it += 1;
    }
}
