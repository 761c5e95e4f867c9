//! The Poisson–Boltzmann operator H(φ) = −φ'' + e^φ, its inverse, and the
//! periodic Helmholtz inverse (λ − ∂²)⁻¹ with its closed-form kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ThomasFactors;
use crate::scalar::{sup_abs, Real};
use crate::torus::{half_second_derivative, EvenField, TorusGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllipticScheme {
    Newton,
    KFixedPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    pub scheme: EllipticScheme,
    pub delta_floor: T,
}

impl<T: Real> Default for EllipticOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::tol_floor(1e-10, 1e3),
            max_iter: 200,
            scheme: EllipticScheme::Newton,
            delta_floor: T::lit(1e-4),
        }
    }
}

impl<T: Real> EllipticOptions<T> {
    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_scheme(mut self, scheme: EllipticScheme) -> Self {
        self.scheme = scheme;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticSolveResult<T> {
    pub phi: EvenField<T>,
    pub iterations: usize,
    pub final_residual: T,
    pub scheme: EllipticScheme,
}

/// H(φ) = −D²φ + e^φ.
pub fn hb_apply<T: Real>(phi: &EvenField<T>) -> EvenField<T> {
    let d2 = phi.second_derivative();
    phi.zip_map(&d2, |p, d| p.exp() - d)
}

fn half_hb_residual<T: Real>(f: &[T], phi: &[T], h: T) -> Vec<T> {
    let d2 = half_second_derivative(phi, h);
    f.iter()
        .zip(phi)
        .zip(&d2)
        .map(|((&f, &p), &d)| f - (p.exp() - d))
        .collect()
}

/// Size of the roundoff in evaluating H(φ) − f; residual targets below it
/// are unattainable, so convergence tests use max(tol, floor).
fn residual_floor<T: Real>(f: &[T], phi: &[T], h: T) -> T {
    let stencil = T::lit(4.0) / (h * h) * sup_abs(phi);
    let pointwise = sup_abs(f) + phi.iter().fold(T::zero(), |m, &p| m.max(p.exp()));
    T::epsilon() * T::lit(16.0) * (stencil + pointwise)
}

/// Solves H(φ) = f.
pub fn hb_invert<T: Real>(f: &EvenField<T>, opts: &EllipticOptions<T>) -> Result<EllipticSolveResult<T>> {
    if !(opts.tol > T::zero()) {
        return Err(Error::domain("tol", opts.tol.to_f64_lossy(), "must be positive"));
    }
    let fmin = f.min();
    if !(fmin >= opts.delta_floor) {
        return Err(Error::domain(
            "min f",
            fmin.to_f64_lossy(),
            "source is below the positivity floor delta_floor",
        ));
    }
    let grid = *f.grid();
    let (phi, iterations, residual) = match opts.scheme {
        EllipticScheme::Newton => newton_half(f.half(), &grid, opts)?,
        EllipticScheme::KFixedPoint => k_fixed_point_half(f.half(), &grid, opts)?,
    };
    Ok(EllipticSolveResult {
        phi: EvenField::from_half(grid, &phi),
        iterations,
        final_residual: residual,
        scheme: opts.scheme,
    })
}

fn newton_half<T: Real>(f: &[T], grid: &TorusGrid<T>, opts: &EllipticOptions<T>) -> Result<(Vec<T>, usize, T)> {
    let h = grid.spacing();
    let weights = grid.half_weights();
    let mean = f.iter().zip(&weights).map(|(&a, &w)| a * w).sum::<T>() / grid.period();
    let lo = f.iter().copied().fold(T::infinity(), T::min).ln();
    let hi = f.iter().copied().fold(T::neg_infinity(), T::max).ln();
    let mut phi = vec![mean.ln().max(lo).min(hi); f.len()];
    let mut r = half_hb_residual(f, &phi, h);
    let mut res = sup_abs(&r);
    let mut it = 0;
    while res > opts.tol.max(residual_floor(f, &phi, h)) {
        if it >= opts.max_iter || !res.is_finite() {
            return Err(Error::NonConvergence {
                solver: "Poisson-Boltzmann Newton",
                iterations: it,
                residual: res.to_f64_lossy(),
                hint: "",
            });
        }
        phi = newton_step(&phi, &r, grid, lo, hi)?;
        r = half_hb_residual(f, &phi, h);
        res = sup_abs(&r);
        it += 1;
    }
    if it > 0 {
        // One polishing step carries the quadratic convergence to roundoff.
        let polished = newton_step(&phi, &r, grid, lo, hi)?;
        let pr = half_hb_residual(f, &polished, h);
        let pres = sup_abs(&pr);
        if pres <= res {
            phi = polished;
            res = pres;
            it += 1;
        }
    }
    Ok((phi, it, res))
}

fn newton_step<T: Real>(phi: &[T], r: &[T], grid: &TorusGrid<T>, lo: T, hi: T) -> Result<Vec<T>> {
    let shift: Vec<T> = phi.iter().map(|p| p.exp()).collect();
    let delta = grid.shifted_neg_laplacian(&shift).solve(r)?;
    // The exact solution obeys the maximum-principle bracket; clipping
    // only matters for wild early iterates.
    Ok(phi.iter().zip(&delta).map(|(&p, &d)| (p + d).max(lo).min(hi)).collect())
}

/// k(r) = (e^r − 1)/r, k(0) = 1.
pub fn k_function<T: Real>(r: T) -> T {
    if r == T::zero() {
        T::one()
    } else if r.abs() < T::lit(1e-5) {
        T::one() + r / T::lit(2.0) + r * r / T::lit(6.0)
    } else {
        r.exp_m1() / r
    }
}

fn k_fixed_point_half<T: Real>(f: &[T], grid: &TorusGrid<T>, opts: &EllipticOptions<T>) -> Result<(Vec<T>, usize, T)> {
    let h = grid.spacing();
    let rhs: Vec<T> = f.iter().map(|&v| v - T::one()).collect();
    let mut phi = vec![T::zero(); f.len()];
    let mut res = sup_abs(&half_hb_residual(f, &phi, h));
    for it in 1..=opts.max_iter {
        let shift: Vec<T> = phi.iter().map(|&p| k_function(p)).collect();
        let next = grid.shifted_neg_laplacian(&shift).solve(&rhs)?;
        let inc = next.iter().zip(&phi).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max);
        phi = next;
        res = sup_abs(&half_hb_residual(f, &phi, h));
        if inc <= opts.tol && res <= opts.tol.max(residual_floor(f, &phi, h)) {
            return Ok((phi, it, res));
        }
        if !res.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        solver: "Poisson-Boltzmann k(phi) fixed point",
        iterations: opts.max_iter,
        residual: res.to_f64_lossy(),
        hint: "",
    })
}

/// Factorization of e^φ − D² on even fields, reused for many solves.
#[derive(Clone, Debug)]
pub struct LinearizedPoisson<T> {
    factors: ThomasFactors<T>,
}

impl<T: Real> LinearizedPoisson<T> {
    pub fn new(phi: &EvenField<T>) -> Result<Self> {
        let shift: Vec<T> = phi.half().iter().map(|p| p.exp()).collect();
        Self::with_shift(phi.grid(), &shift)
    }

    pub(crate) fn with_shift(grid: &TorusGrid<T>, shift: &[T]) -> Result<Self> {
        Ok(Self {
            factors: grid.shifted_neg_laplacian(shift).factor()?,
        })
    }

    /// Solves on the half representation.
    pub fn solve_half(&self, rhs: &[T]) -> Vec<T> {
        self.factors.solve(rhs)
    }

    pub fn solve(&self, rhs: &EvenField<T>) -> EvenField<T> {
        EvenField::from_half(*rhs.grid(), &self.solve_half(rhs.half()))
    }
}

/// G_λ(x) = cosh(√λ y)/(2√λ sinh(√λ L/2)), y = x − L⌊x/L⌋ − L/2,
/// evaluated in an overflow-free exponential form.
pub fn green_kernel<T: Real>(lambda: T, period: T, x: T) -> Result<T> {
    if !(lambda > T::zero()) {
        return Err(Error::domain("lambda", lambda.to_f64_lossy(), "must be positive"));
    }
    if !(period > T::zero()) {
        return Err(Error::domain("L", period.to_f64_lossy(), "must be positive"));
    }
    let half = period / T::lit(2.0);
    let y = (x - period * (x / period).floor() - half).abs();
    let a = lambda.sqrt();
    let num = (a * (y - half)).exp() + (-a * (y + half)).exp();
    let den = T::lit(2.0) * a * (-(-a * period).exp_m1());
    Ok(num / den)
}

/// ∫₀ᴸ G_λ by composite Simpson on `nodes` (even) panels. The kernel is
/// smooth on (0, L) with a kink only at the endpoints, so Simpson on this
/// cell is fourth-order accurate.
pub fn kernel_integral<T: Real>(lambda: T, period: T, nodes: usize) -> Result<T> {
    if nodes < 2 || nodes % 2 != 0 {
        return Err(Error::domain("nodes", nodes as f64, "Simpson needs an even panel count"));
    }
    let h = period / T::of(nodes);
    let mut s = T::zero();
    for j in 0..=nodes {
        let x = if j == nodes { period } else { T::of(j) * h };
        // the endpoint values are the one-sided limits G(0+) = G(L−)
        let g = if j == 0 || j == nodes {
            green_kernel(lambda, period, T::zero())?
        } else {
            green_kernel(lambda, period, x)?
        };
        let w = if j == 0 || j == nodes {
            T::one()
        } else if j % 2 == 1 {
            T::lit(4.0)
        } else {
            T::lit(2.0)
        };
        s += w * g;
    }
    Ok(s * h / T::lit(3.0))
}

/// Solves (λ − D²)φ = h with the periodic finite-difference operator.
pub fn helmholtz_inverse<T: Real>(lambda: T, h: &EvenField<T>) -> Result<EvenField<T>> {
    if !(lambda > T::zero()) {
        return Err(Error::domain("lambda", lambda.to_f64_lossy(), "must be positive"));
    }
    let grid = *h.grid();
    let shift = vec![lambda; grid.half_len()];
    let phi = grid.shifted_neg_laplacian(&shift).solve(h.half())?;
    Ok(EvenField::from_half(grid, &phi))
}

/// Trapezoid convolution against the continuum kernel; an independent
/// O(M²) route to (λ − ∂²)⁻¹ h.
pub fn kernel_convolution<T: Real>(lambda: T, h: &EvenField<T>) -> Result<EvenField<T>> {
    let grid = *h.grid();
    let m = grid.nodes();
    let dx = grid.spacing();
    let kernel: Vec<T> = (0..m)
        .map(|d| green_kernel(lambda, grid.period(), T::of(d) * dx))
        .collect::<Result<_>>()?;
    let half: Vec<T> = (0..grid.half_len())
        .map(|i| {
            (0..m)
                .map(|j| kernel[(i + m - j) % m] * h.values()[j])
                .sum::<T>()
                * dx
        })
        .collect();
    Ok(EvenField::from_half(grid, &half))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneTransportReport<T> {
    pub pass: bool,
    pub min_forward_difference: T,
    pub failing_node: Option<usize>,
    pub crest_second_difference: T,
    pub trough_second_difference: T,
}

/// Checks that (λ − D²)⁻¹ maps an even, non-constant field that is
/// non-decreasing on (−L/2, 0) to one strictly increasing there, concave
/// at the crest and convex at the trough.
pub fn validate_monotone_transport<T: Real>(lambda: T, h: &EvenField<T>) -> Result<MonotoneTransportReport<T>> {
    let scale = T::one().max(h.sup_norm());
    if h.evenness_defect() > T::tol_floor(1e-13, 16.0) * scale {
        return Err(Error::Contract("monotone transport needs an even field".into()));
    }
    let half = h.half();
    if half.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Contract("monotone transport needs h non-decreasing on (-L/2, 0)".into()));
    }
    if h.max() - h.min() <= T::epsilon() * scale {
        return Err(Error::Contract("monotone transport needs a non-constant field".into()));
    }
    let phi = helmholtz_inverse(lambda, h)?;
    let p = phi.half();
    let n = p.len();
    let mut min_diff = T::infinity();
    let mut failing = None;
    for j in 0..n - 1 {
        let d = p[j + 1] - p[j];
        if d < min_diff {
            min_diff = d;
        }
        if !(d > T::zero()) && failing.is_none() {
            failing = Some(j);
        }
    }
    let d2 = half_second_derivative(p, h.grid().spacing());
    let crest = d2[n - 1];
    let trough = d2[0];
    let pass = failing.is_none() && crest < T::zero() && trough > T::zero();
    Ok(MonotoneTransportReport {
        pass,
        min_forward_difference: min_diff,
        failing_node: failing,
        crest_second_difference: crest,
        trough_second_difference: trough,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn grid(m: usize) -> TorusGrid<f64> {
        TorusGrid::new(TAU, m).unwrap()
    }

    #[test]
    fn hb_apply_of_constants() {
        let g = grid(64);
        let one = hb_apply(&EvenField::constant(g, 0.0));
        assert!(one.values().iter().all(|&v| v == 1.0));
        let k = hb_apply(&EvenField::constant(g, 2.5f64.ln()));
        assert!(k.values().iter().all(|&v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn constant_source_needs_no_newton_steps() {
        let g = grid(128);
        let r = hb_invert(&EvenField::constant(g, 3.0), &EllipticOptions::default()).unwrap();
        assert!(r.iterations <= 2);
        assert!(r.phi.values().iter().all(|&p| (p - 3.0f64.ln()).abs() < 1e-12));
    }

    #[test]
    fn manufactured_solution_round_trip() {
        let g = grid(256);
        let exact = EvenField::cosine_mode(g, 1, 0.3);
        let f = hb_apply(&exact);
        let opts = EllipticOptions::default();
        let r = hb_invert(&f, &opts).unwrap();
        assert!(r.final_residual <= opts.tol);
        assert!(r.phi.zip_map(&exact, |a, b| a - b).sup_norm() < 1e-9);
    }

    #[test]
    fn schemes_agree_and_match_linearization() {
        let g = grid(256);
        let f = EvenField::from_fn(g, |x| 1.0 + 0.1 * x.cos());
        let tol = 1e-10;
        let newton = hb_invert(&f, &EllipticOptions::default().with_tol(tol)).unwrap();
        let kfp = hb_invert(
            &f,
            &EllipticOptions::default().with_tol(tol).with_scheme(EllipticScheme::KFixedPoint),
        )
        .unwrap();
        assert_eq!(kfp.scheme, EllipticScheme::KFixedPoint);
        assert!(newton.phi.zip_map(&kfp.phi, |a, b| a - b).sup_norm() <= 10.0 * tol);
        let lin = EvenField::from_fn(g, |x| 0.1 * x.cos() / 2.0);
        assert!(newton.phi.zip_map(&lin, |a, b| a - b).sup_norm() < 0.01);
    }

    #[test]
    fn rejects_sources_below_floor() {
        let g = grid(32);
        let f = EvenField::from_fn(g, |x| 1.0 + x.cos());
        assert!(matches!(hb_invert(&f, &EllipticOptions::default()), Err(Error::Domain { .. })));
    }

    #[test]
    fn green_kernel_examples() {
        let (lam, l) = (2.0f64, 5.0);
        for &x in &[0.3, 1.7, 4.4, -2.2] {
            assert_relative_eq!(green_kernel(lam, l, x).unwrap(), green_kernel(lam, l, -x).unwrap(), max_relative = 1e-14);
            assert_relative_eq!(green_kernel(lam, l, x).unwrap(), green_kernel(lam, l, x + l).unwrap(), max_relative = 1e-13);
        }
        let a = lam.sqrt();
        let g0 = 1.0 / (a * l / 2.0).tanh() / (2.0 * a);
        assert_relative_eq!(green_kernel(lam, l, 0.0).unwrap(), g0, max_relative = 1e-14);
        assert!(green_kernel(0.0, l, 1.0).is_err());
        assert_relative_eq!(kernel_integral(lam, l, 1024).unwrap(), 1.0 / lam, epsilon = 1e-10);
        assert!(green_kernel(1e6f64, 50.0, 0.1).unwrap().is_finite());
    }

    #[test]
    fn helmholtz_examples() {
        let g = grid(128);
        let lam = 0.7;
        let one = helmholtz_inverse(lam, &EvenField::constant(g, lam)).unwrap();
        assert!(one.values().iter().all(|&v| (v - 1.0).abs() < 1e-13));
        for k in [1, 3, 10] {
            let h = EvenField::cosine_mode(g, k, 1.0);
            let phi = helmholtz_inverse(lam, &h).unwrap();
            let expect = h.map(|v| v / (lam + g.laplacian_symbol(k)));
            assert!(phi.zip_map(&expect, |a, b| a - b).sup_norm() < 1e-13);
        }
    }

    #[test]
    fn helmholtz_matches_convolution_at_second_order() {
        let lam = 1.3;
        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&m| {
                let g = grid(m);
                let h = EvenField::from_fn(g, |x| (x.cos()).exp() + 0.5 * (2.0 * x).cos());
                let a = helmholtz_inverse(lam, &h).unwrap();
                let b = kernel_convolution(lam, &h).unwrap();
                a.zip_map(&b, |x, y| x - y).sup_norm()
            })
            .collect();
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn monotone_transport_examples() {
        let g = grid(128);
        let h = EvenField::from_fn(g, |x| 1.0 + x.cos());
        for lam in [0.1, 1.0, 10.0] {
            assert!(validate_monotone_transport(lam, &h).unwrap().pass);
        }
        let ramp = EvenField::from_fn(g, |x| (2.0 - x.abs()).clamp(0.0, 1.0));
        assert!(validate_monotone_transport(1.0, &ramp).unwrap().pass);
        assert!(validate_monotone_transport(1.0, &EvenField::constant(g, 1.0)).is_err());
        let dec = EvenField::from_fn(g, |x| 1.0 - x.cos());
        assert!(validate_monotone_transport(1.0, &dec).is_err());
    }

    #[test]
    fn k_function_is_continuous_at_zero() {
        assert_eq!(k_function(0.0f64), 1.0);
        assert_relative_eq!(k_function(1e-7f64), 1.0 + 5e-8, epsilon = 1e-14);
        assert_relative_eq!(k_function(1.0f64), std::f64::consts::E - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn f32_solve() {
        let g = TorusGrid::new(6.0f32, 64).unwrap();
        let f = EvenField::from_fn(g, |x| 1.0 + 0.2 * x.cos());
        let r = hb_invert(&f, &EllipticOptions::default()).unwrap();
        assert!(r.final_residual < 1e-3);
    }
}
