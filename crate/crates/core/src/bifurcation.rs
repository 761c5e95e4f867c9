//! Local bifurcation from the constant state: the second derivative
//! Ψ''(0) of the speed along the local curve, computed in closed form and
//! by finite differences of the discrete residual, the printed degree-8
//! polynomial in z = (2π/L)², its exceptional periods, and Newton-corrected
//! small-amplitude waves.

use serde::{Deserialize, Serialize};

use crate::elliptic::EllipticOptions;
use crate::error::{Error, Result};
use crate::newton::{bordered_newton, LinearConstraint};
use crate::pressure::PressureLaw;
use crate::scalar::Real;
use crate::torus::{EvenField, TorusGrid};
use crate::wave::{WaveProblem, WaveState};

/// How the pseudo-inverse of the linearized operator acts on modes 0 and 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseConvention {
    /// Ã = 𝒜/μ₀, B̃ = ℬ/μ₂: the true inverse.
    Divide,
    /// Ã = μ₀𝒜, B̃ = μ₂ℬ: the convention the printed polynomial encodes.
    Multiply,
}

/// Ingredients of the closed-form Ψ''(0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psi2Terms<T> {
    pub c0: T,
    /// Symbol of −∂² on mode 1 (α² in the continuum).
    pub sigma1: T,
    /// Symbol of −∂² on mode 2 (4α² in the continuum).
    pub sigma2: T,
    pub a_coef: T,
    pub b_coef: T,
    pub mu0: T,
    pub mu2: T,
    pub a_tilde: T,
    pub b_tilde: T,
    /// Mode-1 coefficient of d³F(ξ, ξ, ξ).
    pub cubic: T,
    /// 2𝒜Ã + ℬB̃.
    pub quadratic: T,
    /// Mode-1 coefficient of ∂_c d_f F ξ, equal to −2c₀.
    pub transversality: T,
    pub psi2: T,
}

impl<T: Real> Psi2Terms<T> {
    /// K − D₃/3, whose sign decides that of Ψ''(0).
    pub fn zero_condition(&self) -> T {
        self.quadratic - self.cubic / T::lit(3.0)
    }
}

/// p'(1), p''(1), p'''(1).
pub fn derivatives_at_one<T: Real>(law: &PressureLaw<T>) -> (T, T, T) {
    (law.dp(T::one()), law.d2p(T::one()), law.d3p(T::one()))
}

/// Closed-form Ψ''(0) for arbitrary mode symbols σ₁, σ₂.
pub fn psi2_terms<T: Real>(
    derivs: (T, T, T),
    sigma1: T,
    sigma2: T,
    convention: InverseConvention,
) -> Result<Psi2Terms<T>> {
    let (p1, p2, p3) = derivs;
    let one = T::one();
    let half = T::lit(0.5);
    let q1 = one / (one + sigma1);
    let q2 = one / (one + sigma2);
    let c02 = p1 + q1;
    if !(c02 > T::zero()) {
        return Err(Error::domain("c0^2", c02.to_f64_lossy(), "must be positive"));
    }
    let c0 = c02.sqrt();
    let g2 = T::lit(3.0) * c02 + p2;
    let a_coef = half * g2 - half * q1 * q1;
    let b_coef = half * g2 - half * q1 * q1 * q2;
    let mu0 = one - q1;
    let mu2 = q2 - q1;
    let tiny = T::epsilon() * T::lit(16.0);
    if mu0.abs() <= tiny {
        return Err(Error::DegeneratePeriod {
            what: "mu0",
            value: mu0.to_f64_lossy(),
        });
    }
    if mu2.abs() <= tiny {
        return Err(Error::DegeneratePeriod {
            what: "mu2",
            value: mu2.to_f64_lossy(),
        });
    }
    let (a_tilde, b_tilde) = match convention {
        InverseConvention::Divide => (a_coef / mu0, b_coef / mu2),
        InverseConvention::Multiply => (a_coef * mu0, b_coef * mu2),
    };
    let q14 = q1 * q1 * q1 * q1;
    let three_q = T::lit(0.75);
    let cubic = three_q * (T::lit(-12.0) * c02 + p3) + three_q * q14 + three_q * q14 * q2;
    let quadratic = T::lit(2.0) * a_coef * a_tilde + b_coef * b_tilde;
    let transversality = T::lit(-2.0) * c0;
    let psi2 = (quadratic - cubic / T::lit(3.0)) / transversality;
    Ok(Psi2Terms {
        c0,
        sigma1,
        sigma2,
        a_coef,
        b_coef,
        mu0,
        mu2,
        a_tilde,
        b_tilde,
        cubic,
        quadratic,
        transversality,
        psi2,
    })
}

fn wavenumber_sq<T: Real>(period: T) -> Result<T> {
    if !(period > T::zero() && period.is_finite()) {
        return Err(Error::domain("L", period.to_f64_lossy(), "must be positive and finite"));
    }
    let a = T::TAU() / period;
    Ok(a * a)
}

/// Continuum closed form with the true inverse.
pub fn psi2_operator<T: Real>(law: &PressureLaw<T>, period: T) -> Result<Psi2Terms<T>> {
    let z = wavenumber_sq(period)?;
    psi2_terms(derivatives_at_one(law), z, T::lit(4.0) * z, InverseConvention::Divide)
}

/// Closed form with the grid's discrete symbols; the exact Ψ''(0) of the
/// discretized problem.
pub fn psi2_operator_on_grid<T: Real>(law: &PressureLaw<T>, grid: &TorusGrid<T>) -> Result<Psi2Terms<T>> {
    psi2_terms(
        derivatives_at_one(law),
        grid.laplacian_symbol(1),
        grid.laplacian_symbol(2),
        InverseConvention::Divide,
    )
}

/// The nine printed coefficients a₀..a₈ (index = power of z).
pub fn polynomial_coefficients<T: Real>(p1: T, p2: T, p3: T) -> [T; 9] {
    let l = |x: f64| T::lit(x);
    let q11 = p1 * p1;
    let q12 = p1 * p2;
    let q22 = p2 * p2;
    [
        l(12.0) * p1 - p3 + l(10.0),
        l(-9.0) * q11 - l(6.0) * q12 - q22 + l(192.0) * p1 - l(4.0) * p2 - l(17.0) * p3 + l(166.0),
        l(-36.0) * q11 - l(24.0) * q12 - l(4.0) * q22 + l(1302.0) * p1 - l(38.0) * p2 - l(118.0) * p3 + l(1080.0),
        l(378.0) * q11 + l(252.0) * q12 + l(42.0) * q22 + l(5304.0) * p1 + l(32.0) * p2 - l(434.0) * p3 + l(3727.0),
        l(2844.0) * q11 + l(1896.0) * q12 + l(316.0) * q22 + l(13986.0) * p1 + l(962.0) * p2 - l(925.0) * p3 + l(7852.0),
        l(7191.0) * q11 + l(4794.0) * q12 + l(799.0) * q22 + l(21564.0) * p1 + l(2464.0) * p2 - l(1181.0) * p3 + l(9024.0),
        l(8640.0) * q11 + l(5760.0) * q12 + l(960.0) * q22 + l(17712.0) * p1 + l(2336.0) * p2 - l(892.0) * p3 + l(4800.0),
        l(5040.0) * q11 + l(3360.0) * q12 + l(560.0) * q22 + l(6720.0) * p1 + l(768.0) * p2 - l(368.0) * p3 + l(768.0),
        l(1152.0) * q11 + l(768.0) * q12 + l(128.0) * q22 + l(768.0) * p1 - l(64.0) * p3,
    ]
}

/// Horner evaluation; `coeffs[k]` multiplies z^k.
pub fn eval_polynomial<T: Real>(coeffs: &[T], z: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &a| acc * z + a)
}

/// (Σ aₙ zⁿ, [a₀..a₈]) at z = (2π/L)².
pub fn psi2_polynomial<T: Real>(law: &PressureLaw<T>, period: T) -> Result<(T, [T; 9])> {
    let z = wavenumber_sq(period)?;
    let (p1, p2, p3) = derivatives_at_one(law);
    let a = polynomial_coefficients(p1, p2, p3);
    Ok((eval_polynomial(&a, z), a))
}

/// The positive factor 4(1+z)⁵(1+4z)³ linking the printed polynomial to
/// the zero-condition combination.
pub fn polynomial_factor<T: Real>(z: T) -> T {
    let one = T::one();
    T::lit(4.0) * (one + z).powi(5) * (one + T::lit(4.0) * z).powi(3)
}

const Z_MIN: f64 = 1e-12;
const Z_MAX: f64 = 1e6;
const SCAN_PER_DECADE: usize = 50;

/// Sign-change roots of `g` on a log grid of (0, 10⁶], each refined by
/// bisection to relative width 1e−10. Tangential roots without a sign
/// change are not detected.
pub fn scan_positive_roots<T: Real>(g: impl Fn(T) -> T, max_roots: usize) -> Vec<T> {
    let decades = (Z_MAX / Z_MIN).log10();
    let n = (decades * SCAN_PER_DECADE as f64).ceil() as usize;
    let (lmin, lmax) = (Z_MIN.ln(), Z_MAX.ln());
    let zs: Vec<T> = (0..=n)
        .map(|i| T::lit((lmin + (lmax - lmin) * i as f64 / n as f64).exp()))
        .collect();
    let mut roots = Vec::new();
    let mut prev = (zs[0], g(zs[0]));
    for &z in &zs[1..] {
        let v = g(z);
        let (z0, v0) = prev;
        if v0 == T::zero() {
            roots.push(z0);
        } else if v0 * v < T::zero() {
            let (mut lo, mut hi, mut vlo) = (z0, z, v0);
            while hi - lo > T::tol_floor(1e-10, 4.0) * hi {
                let mid = (lo + hi) / T::lit(2.0);
                let vm = g(mid);
                if vm == T::zero() {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if vm * vlo < T::zero() {
                    hi = mid;
                } else {
                    lo = mid;
                    vlo = vm;
                }
            }
            roots.push((lo + hi) / T::lit(2.0));
        }
        if roots.len() >= max_roots {
            break;
        }
        prev = (z, v);
    }
    roots
}

/// Positive roots z of Σ coeffs[k] z^k in (0, 10⁶].
pub fn positive_roots<T: Real>(coeffs: &[T]) -> Vec<T> {
    let degree = coeffs.iter().rposition(|&a| a != T::zero()).unwrap_or(0);
    if degree == 0 {
        return Vec::new();
    }
    scan_positive_roots(|z| eval_polynomial(coeffs, z), degree)
}

fn periods_from_roots<T: Real>(mut zs: Vec<T>) -> Vec<T> {
    let mut ls: Vec<T> = zs.drain(..).map(|z| T::TAU() / z.sqrt()).collect();
    ls.sort_by(|a, b| a.partial_cmp(b).expect("finite periods"));
    ls
}

/// Periods L = 2π/√z for the positive roots of an arbitrary coefficient vector.
pub fn exceptional_periods_from_coefficients<T: Real>(coeffs: &[T]) -> Vec<T> {
    periods_from_roots(positive_roots(coeffs))
}

/// Exceptional periods from the printed polynomial (at most 8).
pub fn exceptional_periods<T: Real>(law: &PressureLaw<T>) -> Vec<T> {
    let (p1, p2, p3) = derivatives_at_one(law);
    exceptional_periods_from_coefficients(&polynomial_coefficients(p1, p2, p3))
}

/// Periods where the closed-form Ψ''(0) (true inverse) changes sign.
pub fn exceptional_periods_operator<T: Real>(law: &PressureLaw<T>) -> Vec<T> {
    let d = derivatives_at_one(law);
    let g = |z: T| {
        psi2_terms(d, z, T::lit(4.0) * z, InverseConvention::Divide)
            .map(|t| t.zero_condition())
            .unwrap_or_else(|_| T::nan())
    };
    periods_from_roots(scan_positive_roots(g, 16))
}

/// Fails if `period` is within `spacing` of either exceptional set.
pub fn check_regular_period<T: Real>(law: &PressureLaw<T>, period: T, spacing: T) -> Result<()> {
    let all = exceptional_periods(law).into_iter().chain(exceptional_periods_operator(law));
    for l in all {
        if (l - period).abs() <= spacing {
            return Err(Error::ExceptionalPeriod {
                period: period.to_f64_lossy(),
                exceptional: l.to_f64_lossy(),
                spacing: spacing.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Summary of the local bifurcation at (c₀, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalBifData<T> {
    pub period: T,
    pub c0: T,
    pub alpha: T,
    pub xi0: Option<EvenField<T>>,
    pub a_coef: T,
    pub b_coef: T,
    pub a_tilde: T,
    pub b_tilde: T,
    pub psi2_operator: T,
    pub psi2_poly: T,
    pub a_coeffs: [T; 9],
    /// The printed polynomial divided by 4(1+z)⁵(1+4z)³ and by −2c₀; equals
    /// Ψ''(0) under the multiplying convention.
    pub psi2_poly_scaled: T,
    pub exceptional_periods: Vec<T>,
    pub exceptional_periods_operator: Vec<T>,
}

pub fn local_bifurcation_data<T: Real>(law: &PressureLaw<T>, period: T, grid: Option<&TorusGrid<T>>) -> Result<LocalBifData<T>> {
    let terms = psi2_operator(law, period)?;
    let (poly, a) = psi2_polynomial(law, period)?;
    let z = terms.sigma1;
    Ok(LocalBifData {
        period,
        c0: terms.c0,
        alpha: z.sqrt(),
        xi0: grid.map(|g| EvenField::cosine_mode(*g, 1, T::one())),
        a_coef: terms.a_coef,
        b_coef: terms.b_coef,
        a_tilde: terms.a_tilde,
        b_tilde: terms.b_tilde,
        psi2_operator: terms.psi2,
        psi2_poly: poly,
        a_coeffs: a,
        psi2_poly_scaled: poly / polynomial_factor(z) / terms.transversality,
        exceptional_periods: exceptional_periods(law),
        exceptional_periods_operator: exceptional_periods_operator(law),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetOptions<T> {
    /// Finite-difference step along ξ₀ (sup-norm 1).
    pub step: T,
    /// Highest cosine mode kept when inverting the linearization.
    pub max_mode: usize,
    pub elliptic_tol: T,
}

impl<T: Real> Default for FrechetOptions<T> {
    fn default() -> Self {
        Self {
            step: T::lit(0.01),
            max_mode: 32,
            elliptic_tol: T::tol_floor(1e-13, 64.0),
        }
    }
}

/// Ψ''(0) assembled from finite differences of the discrete residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrechetPsi2<T> {
    pub c0: T,
    pub quadratic: T,
    pub cubic: T,
    pub transversality: T,
    pub psi2: T,
    /// Mode-1 coefficient of d²F(ξ₀, ξ₀); Ψ'(0) is proportional to it.
    pub psi1_projection: T,
    /// sup-norm of the part of d²F(ξ₀, ξ₀) above `max_mode`.
    pub truncation_residual: T,
}

impl<T: Real> FrechetPsi2<T> {
    /// Natural magnitude of the terms entering Ψ''(0), used to judge
    /// agreement when Ψ''(0) itself is near zero.
    pub fn scale(&self) -> T {
        (self.quadratic.abs() + self.cubic.abs() / T::lit(3.0)) / self.transversality.abs()
    }
}

/// Independent numerical route to Ψ''(0): directional differences of the
/// grid residual at (c₀, 1) with one Richardson extrapolation each, and
/// the linearization inverted mode by mode on the complement of ξ₀.
pub fn psi2_finite_difference<T: Real>(
    law: &PressureLaw<T>,
    grid: &TorusGrid<T>,
    opts: &FrechetOptions<T>,
) -> Result<FrechetPsi2<T>> {
    let elliptic = EllipticOptions::default().with_tol(opts.elliptic_tol);
    let pb = WaveProblem::new(law.clone(), *grid).with_elliptic(elliptic);
    let c0 = pb.bifurcation_point()?.c0_discrete;
    let xi = EvenField::cosine_mode(*grid, 1, T::one());
    let one = EvenField::constant(*grid, T::one());
    let max_mode = opts.max_mode.min(grid.nodes() / 2);
    let e = opts.step;
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let three = T::lit(3.0);

    let shifted = |dir: &EvenField<T>, t: T| one.zip_map(dir, |a, d| a + t * d);
    let f_at = |c: T, dir: &EvenField<T>, t: T| pb.residual_at(c, &shifted(dir, t));
    let comb = |terms: &[(T, &EvenField<T>)]| {
        let mut acc = EvenField::constant(*grid, T::zero());
        for &(w, u) in terms {
            acc = acc.zip_map(u, |a, b| a + w * b);
        }
        acc
    };
    let richardson = |fine: &EvenField<T>, coarse: &EvenField<T>| fine.zip_map(coarse, |a, b| (four * a - b) / three);

    // Second and third differences along ξ₀.
    let mut g = Vec::new();
    for k in [-4i32, -2, -1, 1, 2, 4] {
        g.push(f_at(c0, &xi, e * T::lit(k as f64) / four)?);
    }
    let (gm2, gm1, gmh, gph, gp1, gp2) = (&g[0], &g[1], &g[2], &g[3], &g[4], &g[5]);
    let d2 = |p: &EvenField<T>, m: &EvenField<T>, t: T| comb(&[(T::one() / (t * t), p), (T::one() / (t * t), m)]);
    let quad_field = richardson(&d2(gph, gmh, e / four), &d2(gp1, gm1, e / two));
    let d3 = |p2: &EvenField<T>, p1: &EvenField<T>, m1: &EvenField<T>, m2: &EvenField<T>, t: T| {
        let s = T::one() / (two * t * t * t);
        comb(&[(s, p2), (-two * s, p1), (two * s, m1), (-s, m2)])
    };
    let cubic_field = richardson(&d3(gp1, gph, gmh, gm1, e / four), &d3(gp2, gp1, gm1, gm2, e / two));

    let psi1_projection = quad_field.cosine_coefficient(1)?;
    let cubic = cubic_field.cosine_coefficient(1)?;

    // 𝔏⁻¹ on the complement of ξ₀, with eigenvalues measured by the Jacobian.
    let base = pb.state(c0, one.clone())?;
    let mut w_coeffs = vec![T::zero(); max_mode + 1];
    let mut synth = vec![T::zero(); max_mode + 1];
    for k in 0..=max_mode {
        let qk = quad_field.cosine_coefficient(k)?;
        synth[k] = qk;
        if k == 1 {
            continue;
        }
        let mode = EvenField::cosine_mode(*grid, k, T::one());
        let mu = pb.jacobian_apply(&base, &mode)?.cosine_coefficient(k)?;
        if mu.abs() <= T::epsilon() * T::lit(1e3) {
            return Err(Error::DegeneratePeriod {
                what: "mode eigenvalue",
                value: mu.to_f64_lossy(),
            });
        }
        w_coeffs[k] = qk / mu;
    }
    let truncation_residual = quad_field
        .zip_map(&EvenField::from_cosine_coefficients(*grid, &synth), |a, b| a - b)
        .sup_norm();
    let w = EvenField::from_cosine_coefficients(*grid, &w_coeffs);
    let w_norm = w.sup_norm();

    // d²F(ξ₀, w) by polarization along ξ₀ ± ŵ.
    let quadratic = if w_norm > T::zero() {
        let w_hat = w.map(|v| v / w_norm);
        let plus = comb(&[(T::one(), &xi), (T::one(), &w_hat)]);
        let minus = comb(&[(T::one(), &xi), (-T::one(), &w_hat)]);
        let polar = |t: T| -> Result<EvenField<T>> {
            let a = f_at(c0, &plus, t)?;
            let b = f_at(c0, &plus, -t)?;
            let c = f_at(c0, &minus, t)?;
            let d = f_at(c0, &minus, -t)?;
            let s = T::one() / (four * t * t);
            Ok(comb(&[(s, &a), (s, &b), (-s, &c), (-s, &d)]))
        };
        let mixed = richardson(&polar(e / two)?, &polar(e)?);
        mixed.cosine_coefficient(1)? * w_norm
    } else {
        T::zero()
    };

    // ∂_c d_f F ξ₀ by a centered cross difference.
    let cross = |t: T| -> Result<EvenField<T>> {
        let a = f_at(c0 + t, &xi, t)?;
        let b = f_at(c0 - t, &xi, t)?;
        let c = f_at(c0 + t, &xi, -t)?;
        let d = f_at(c0 - t, &xi, -t)?;
        let s = T::one() / (four * t * t);
        Ok(comb(&[(s, &a), (-s, &b), (-s, &c), (s, &d)]))
    };
    let transversality = richardson(&cross(e / two)?, &cross(e)?).cosine_coefficient(1)?;

    let psi2 = (quadratic - cubic / three) / transversality;
    Ok(FrechetPsi2 {
        c0,
        quadratic,
        cubic,
        transversality,
        psi2,
        psi1_projection,
        truncation_residual,
    })
}

/// Largest amplitude the local chart accepts.
pub const S_MAX: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallAmplitudeWave<T> {
    pub state: WaveState<T>,
    pub newton_iters: usize,
    pub s: T,
}

/// Linear functional f ↦ cosine_coefficient(f, 1) on the half representation.
pub(crate) fn amplitude_row<T: Real>(grid: &TorusGrid<T>) -> Vec<T> {
    let alpha = grid.wavenumber();
    let scale = T::lit(2.0) / grid.period();
    grid.half_weights()
        .iter()
        .enumerate()
        .map(|(j, &w)| scale * w * (alpha * grid.node(j)).cos())
        .collect()
}

/// Newton-corrected wave with prescribed mode-1 amplitude s, starting
/// from (c₀, 1 + s cos(2πx/L)) with the grid-consistent c₀.
pub fn small_amplitude_wave<T: Real>(problem: &WaveProblem<T>, s: T, tol: T) -> Result<SmallAmplitudeWave<T>> {
    if !(s >= T::zero()) {
        return Err(Error::domain("s", s.to_f64_lossy(), "amplitude must be non-negative"));
    }
    if s > T::lit(S_MAX) {
        return Err(Error::StepTooLarge {
            s: s.to_f64_lossy(),
            s_max: S_MAX,
        });
    }
    let grid = *problem.grid();
    let c0 = problem.bifurcation_point()?.c0_discrete;
    if s == T::zero() {
        let state = problem.state(c0, EvenField::constant(grid, T::one()))?;
        return Ok(SmallAmplitudeWave {
            state,
            newton_iters: 0,
            s,
        });
    }
    let row = amplitude_row(&grid);
    let offset: T = row.iter().copied().sum();
    let constraint = LinearConstraint {
        g_f: row,
        g_c: T::zero(),
        rhs: s + offset,
    };
    let guess = EvenField::cosine_mode(grid, 1, s).map(|v| v + T::one());
    let out = bordered_newton(problem, c0, guess.half().to_vec(), &constraint, tol, 40)?;
    let f = EvenField::from_half(grid, &out.f);
    let phi = EvenField::from_half(grid, &out.phi);
    Ok(SmallAmplitudeWave {
        state: problem.state_with_phi(out.c, f, phi)?,
        newton_iters: out.iterations,
        s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    #[test]
    fn linear_law_reference_values() {
        let t = psi2_operator(&PressureLaw::<f64>::linear(), TAU).unwrap();
        assert_relative_eq!(t.c0, 1.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(t.a_coef, 2.125, epsilon = 1e-14);
        assert_relative_eq!(t.b_coef, 2.225, epsilon = 1e-14);
        assert_relative_eq!(t.cubic, -13.44375, epsilon = 1e-12);
        assert_relative_eq!(t.psi2, -2.4665000882, epsilon = 1e-9);
        assert_relative_eq!(t.psi2 * t.transversality, t.zero_condition(), epsilon = 1e-14);
    }

    #[test]
    fn printed_polynomial_is_the_multiplied_combination() {
        for &(p1, p2, p3) in &[(1.0, 0.0, 0.0), (2.0, 2.0, 0.0), (1.0, -2.0, 6.0), (0.7, 1.3, -0.4)] {
            let a = polynomial_coefficients(p1, p2, p3);
            for &z in &[0.01, 0.3, 1.0, 4.0, 50.0] {
                let mult = psi2_terms((p1, p2, p3), z, 4.0 * z, InverseConvention::Multiply).unwrap();
                let expect = polynomial_factor(z) * mult.zero_condition();
                let got = eval_polynomial(&a, z);
                assert_relative_eq!(got, expect, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn kappa_rho_squared_coefficients() {
        for &k in &[0.25, 1.0, 3.0, 6.0] {
            let law = PressureLaw::monomial(k, 2.0);
            let (_, a) = psi2_polynomial(&law, TAU).unwrap();
            assert_eq!(a[1], -64.0 * k * k + 376.0 * k + 166.0);
            assert_eq!(a[2], -256.0 * k * k + 2528.0 * k + 1080.0);
            assert!(a.iter().all(|&c| c > 0.0));
            assert!(exceptional_periods(&law).is_empty());
        }
        let (_, a) = psi2_polynomial(&PressureLaw::<f64>::linear(), TAU).unwrap();
        assert_eq!(a[0], 22.0);
    }

    #[test]
    fn synthetic_root_is_recovered() {
        // (z − 2.5)(z + 1)(z + 3)
        let coeffs = [-7.5, -7.0, 1.5, 1.0];
        let ls = exceptional_periods_from_coefficients(&coeffs);
        assert_eq!(ls.len(), 1);
        assert_relative_eq!(ls[0], TAU / 2.5f64.sqrt(), max_relative = 1e-9);
        assert!(positive_roots(&[1.0f64]).is_empty());
    }

    #[test]
    fn operator_zero_set_for_linear_law() {
        let ls = exceptional_periods_operator(&PressureLaw::<f64>::linear());
        assert_eq!(ls.len(), 1);
        assert_relative_eq!(ls[0], 4.954343581, max_relative = 1e-9);
        assert!(check_regular_period(&PressureLaw::<f64>::linear(), ls[0] + 1e-7, 1e-6).is_err());
        assert!(check_regular_period(&PressureLaw::<f64>::linear(), TAU, 1e-6).is_ok());
    }

    #[test]
    fn finite_difference_route_matches_grid_closed_form() {
        let law = PressureLaw::<f64>::monomial(1.0, 2.0);
        let grid = TorusGrid::new(TAU, 256).unwrap();
        let fd = psi2_finite_difference(&law, &grid, &FrechetOptions::default()).unwrap();
        let cf = psi2_operator_on_grid(&law, &grid).unwrap();
        assert!(fd.psi1_projection.abs() < 1e-9);
        assert!(fd.truncation_residual < 1e-8);
        assert_relative_eq!(fd.transversality, cf.transversality, max_relative = 1e-8);
        assert!((fd.psi2 - cf.psi2).abs() <= 1e-6 * fd.scale(), "{} vs {}", fd.psi2, cf.psi2);
    }

    #[test]
    fn small_amplitude_wave_basics() {
        let pb = WaveProblem::new(PressureLaw::<f64>::linear(), TorusGrid::new(TAU, 128).unwrap());
        let zero = small_amplitude_wave(&pb, 0.0, 1e-10).unwrap();
        assert_eq!(zero.newton_iters, 0);
        assert_eq!(zero.state.f.max(), 1.0);
        let w = small_amplitude_wave(&pb, 0.05, 1e-10).unwrap();
        assert!(w.state.diagnostics.residual <= 1e-10);
        assert_relative_eq!(w.state.amplitude(), 0.05, epsilon = 1e-10);
        assert!(matches!(small_amplitude_wave(&pb, 0.3, 1e-10), Err(Error::StepTooLarge { .. })));
    }
}
