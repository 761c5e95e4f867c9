//! Pressure profiles and the scalar quantities derived from them:
//! the critical density a*(c), the local profile G_c and the growth
//! functional W_δ.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// A pressure profile p together with its first three derivatives.
#[derive(Clone)]
pub struct PressureLaw<T> {
    label: String,
    p: ScalarFn<T>,
    dp: ScalarFn<T>,
    d2p: ScalarFn<T>,
    d3p: ScalarFn<T>,
}

impl<T> fmt::Debug for PressureLaw<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PressureLaw").field("label", &self.label).finish()
    }
}

impl<T: Real> PressureLaw<T> {
    /// User-supplied law from four callables.
    pub fn custom<P, D1, D2, D3>(label: impl Into<String>, p: P, dp: D1, d2p: D2, d3p: D3) -> Self
    where
        P: Fn(T) -> T + Send + Sync + 'static,
        D1: Fn(T) -> T + Send + Sync + 'static,
        D2: Fn(T) -> T + Send + Sync + 'static,
        D3: Fn(T) -> T + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            p: Arc::new(p),
            dp: Arc::new(dp),
            d2p: Arc::new(d2p),
            d3p: Arc::new(d3p),
        }
    }

    /// Polytropic family p = γκ/(γ−1) ρ^{γ−1}, with the γ = 1 member κ log ρ.
    pub fn polytropic(gamma: T, kappa: T) -> Result<Self> {
        positive("gamma", gamma)?;
        positive("kappa", kappa)?;
        if gamma == T::one() {
            return Self::logarithmic(kappa);
        }
        let g = gamma;
        let k = kappa;
        let one = T::one();
        let coef = g * k / (g - one);
        let e = g - one;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        Ok(Self::custom(
            format!("polytropic(gamma={gamma}, kappa={kappa})"),
            move |x: T| coef * x.powf(e),
            move |x: T| g * k * x.powf(g - two),
            move |x: T| g * k * (g - two) * x.powf(g - three),
            move |x: T| g * k * (g - two) * (g - three) * x.powf(g - T::lit(4.0)),
        ))
    }

    /// p = κ log ρ.
    pub fn logarithmic(kappa: T) -> Result<Self> {
        positive("kappa", kappa)?;
        let k = kappa;
        let two = T::lit(2.0);
        Ok(Self::custom(
            format!("logarithmic(kappa={kappa})"),
            move |x: T| k * x.ln(),
            move |x: T| k / x,
            move |x: T| -k / (x * x),
            move |x: T| two * k / (x * x * x),
        ))
    }

    /// p = −κ/ρ.
    pub fn inverse(kappa: T) -> Result<Self> {
        positive("kappa", kappa)?;
        let k = kappa;
        let two = T::lit(2.0);
        let six = T::lit(6.0);
        Ok(Self::custom(
            format!("inverse(kappa={kappa})"),
            move |x: T| -k / x,
            move |x: T| k / (x * x),
            move |x: T| -two * k / (x * x * x),
            move |x: T| six * k / (x * x * x * x),
        ))
    }

    /// p = a ρ^e for real a and e (no admissibility check).
    pub fn monomial(coef: T, exponent: T) -> Self {
        Self::power_sum(&[(coef, exponent)], T::zero())
            .with_label(format!("monomial({coef}*rho^{exponent})"))
    }

    /// p = ρ.
    pub fn linear() -> Self {
        Self::monomial(T::one(), T::one()).with_label("linear")
    }

    /// p = Σ a_i ρ^{e_i} + b log ρ.
    pub fn power_sum(terms: &[(T, T)], log_coef: T) -> Self {
        let t1: Vec<(T, T)> = terms.to_vec();
        let t2 = t1.clone();
        let t3 = t1.clone();
        let t4 = t1.clone();
        let b = log_coef;
        let one = T::one();
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let mut label = String::from("power_sum(");
        for (i, (a, e)) in terms.iter().enumerate() {
            if i > 0 {
                label.push_str(" + ");
            }
            label.push_str(&format!("{a}*rho^{e}"));
        }
        if b != T::zero() {
            label.push_str(&format!(" + {b}*log(rho)"));
        }
        label.push(')');
        Self::custom(
            label,
            move |x: T| t1.iter().map(|&(a, e)| a * x.powf(e)).sum::<T>() + b * x.ln(),
            move |x: T| t2.iter().map(|&(a, e)| a * e * x.powf(e - one)).sum::<T>() + b / x,
            move |x: T| {
                t3.iter()
                    .map(|&(a, e)| a * e * (e - one) * x.powf(e - two))
                    .sum::<T>()
                    - b / (x * x)
            },
            move |x: T| {
                t4.iter()
                    .map(|&(a, e)| a * e * (e - one) * (e - two) * x.powf(e - three))
                    .sum::<T>()
                    + two * b / (x * x * x)
            },
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn p(&self, xi: T) -> T {
        (self.p)(xi)
    }

    #[inline]
    pub fn dp(&self, xi: T) -> T {
        (self.dp)(xi)
    }

    #[inline]
    pub fn d2p(&self, xi: T) -> T {
        (self.d2p)(xi)
    }

    #[inline]
    pub fn d3p(&self, xi: T) -> T {
        (self.d3p)(xi)
    }

    /// Derivative of the given order, 0 through 3.
    pub fn derivative(&self, order: usize, xi: T) -> Result<T> {
        match order {
            0 => Ok(self.p(xi)),
            1 => Ok(self.dp(xi)),
            2 => Ok(self.d2p(xi)),
            3 => Ok(self.d3p(xi)),
            _ => Err(Error::domain("derivative order", order as f64, "must be 0..=3")),
        }
    }

    /// The critical density: the unique ξ with ξ³ p'(ξ) = c².
    pub fn a_star(&self, c: T) -> Result<T> {
        if c == T::zero() || !c.is_finite() {
            return Err(Error::domain("c", c.to_f64_lossy(), "must be finite and nonzero"));
        }
        let target = c * c;
        let q = |x: T| x * x * x * self.dp(x);
        let dq = |x: T| x * x * (T::lit(3.0) * self.dp(x) + x * self.d2p(x));
        let two = T::lit(2.0);
        let bound = T::lit(2f64.powi(60));
        let (mut lo, mut hi);
        let q1 = q(T::one());
        if !q1.is_finite() {
            return Err(self.eval_error(T::one()));
        }
        if q1 < target {
            lo = T::one();
            hi = two;
            loop {
                let v = q(hi);
                if !v.is_finite() {
                    return Err(self.eval_error(hi));
                }
                if v >= target {
                    break;
                }
                lo = hi;
                hi *= two;
                if hi > bound {
                    return Err(Error::UnboundedSearch { c: c.to_f64_lossy() });
                }
            }
        } else {
            hi = T::one();
            lo = T::lit(0.5);
            loop {
                let v = q(lo);
                if !v.is_finite() {
                    return Err(self.eval_error(lo));
                }
                if v <= target {
                    break;
                }
                hi = lo;
                lo /= two;
                if lo < T::one() / bound {
                    return Err(Error::UnboundedSearch { c: c.to_f64_lossy() });
                }
            }
        }

        let rtol = T::tol_floor(1e-12, 8.0);
        let mut x = (lo + hi) / two;
        let mut converged = false;
        for _ in 0..400 {
            let r = q(x) - target;
            if r.abs() <= rtol * target {
                if converged {
                    break;
                }
                // one extra Newton step pushes the root to working precision
                converged = true;
            }
            if r > T::zero() {
                hi = x;
            } else {
                lo = x;
            }
            let slope = dq(x);
            let newton = x - r / slope;
            x = if slope > T::zero() && newton > lo && newton < hi {
                newton
            } else {
                (lo + hi) / two
            };
            if hi - lo <= T::epsilon() * hi {
                break;
            }
        }
        Ok(x)
    }

    /// G_c and its derivatives in ξ up to order 3.
    pub fn g_c(&self, c: T, xi: T, order: usize) -> Result<T> {
        if !(xi > T::zero()) {
            return Err(Error::domain("xi", xi.to_f64_lossy(), "must be positive"));
        }
        let c2 = c * c;
        let inv = T::one() / xi;
        let inv2 = inv * inv;
        Ok(match order {
            0 => c2 / T::lit(2.0) * (inv2 - T::one()) + self.p(xi) - self.p(T::one()),
            1 => -c2 * inv2 * inv + self.dp(xi),
            2 => T::lit(3.0) * c2 * inv2 * inv2 + self.d2p(xi),
            3 => T::lit(-12.0) * c2 * inv2 * inv2 * inv + self.d3p(xi),
            _ => return Err(Error::domain("order", order as f64, "must be 0..=3")),
        })
    }

    /// W_δ(ξ) with the running maximum of p' taken over a 64-point
    /// log-spaced scan of [δ, ξ].
    pub fn w_delta(&self, delta: T, xi: T) -> Result<T> {
        self.w_delta_with_scan(delta, xi, 64)
    }

    pub fn w_delta_with_scan(&self, delta: T, xi: T, scan: usize) -> Result<T> {
        if !(delta > T::zero() && delta < T::one()) {
            return Err(Error::domain("delta", delta.to_f64_lossy(), "must lie in (0, 1)"));
        }
        if !(xi >= delta) {
            return Err(Error::domain("xi", xi.to_f64_lossy(), "must be >= delta"));
        }
        let mut max_dp = self.dp(delta).max(self.dp(xi));
        for eta in log_space(delta, xi, scan.max(2)) {
            max_dp = max_dp.max(self.dp(eta));
        }
        let two = T::lit(2.0);
        let num = xi.powi(4) * self.dp(xi) - two * xi * (self.p(xi) - self.p(T::one())) - two * xi * xi.ln();
        Ok(num / (max_dp + T::one()))
    }

    fn eval_error(&self, xi: T) -> Error {
        Error::Evaluation {
            label: self.label.clone(),
            xi: xi.to_f64_lossy(),
        }
    }
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(name, v.to_f64_lossy(), "must be positive and finite"))
    }
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub(crate) fn log_space<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    if n == 1 || a == b {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                a
            } else if i == n - 1 {
                b
            } else {
                (la + (lb - la) * T::of(i) / T::of(n - 1)).exp()
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityCheck<T> {
    pub name: String,
    pub pass: bool,
    pub witness: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport<T> {
    pub label: String,
    pub sample_range: (T, T),
    pub checks: Vec<AdmissibilityCheck<T>>,
    pub w_trend: Vec<(T, T)>,
    pub pass: bool,
}

pub const CHECK_DP: &str = "dp > 0";
pub const CHECK_CONVEX: &str = "3 dp + xi d2p > 0";
pub const CHECK_LOW: &str = "xi^3 dp decreasing toward xi_min";
pub const CHECK_W: &str = "W_delta increasing over the top decade";

/// Samples the admissibility conditions on a log-spaced grid of [ξ_min, ξ_max].
pub fn validate_admissibility<T: Real>(
    law: &PressureLaw<T>,
    xi_min: T,
    xi_max: T,
    n_samples: usize,
) -> Result<AdmissibilityReport<T>> {
    if !(xi_min > T::zero() && xi_min < T::one()) {
        return Err(Error::domain("xi_min", xi_min.to_f64_lossy(), "must lie in (0, 1)"));
    }
    if !(xi_max > T::one() && xi_max.is_finite()) {
        return Err(Error::domain("xi_max", xi_max.to_f64_lossy(), "must exceed 1"));
    }
    if n_samples < 16 {
        return Err(Error::domain("n_samples", n_samples as f64, "must be at least 16"));
    }
    let xs = log_space(xi_min, xi_max, n_samples);
    for &x in &xs {
        let vals = [law.p(x), law.dp(x), law.d2p(x)];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(law.eval_error(x));
        }
    }
    if !law.p(T::one()).is_finite() {
        return Err(law.eval_error(T::one()));
    }

    let first_failure = |pred: &dyn Fn(T) -> bool| xs.iter().copied().find(|&x| !pred(x));
    let dp_fail = first_failure(&|x| law.dp(x) > T::zero());
    let convex_fail = first_failure(&|x| T::lit(3.0) * law.dp(x) + x * law.d2p(x) > T::zero());

    // ξ³p' must be positive and shrink monotonically as ξ → ξ_min over the lowest decade.
    let low_end = xi_min * T::lit(10.0);
    let low: Vec<T> = xs.iter().copied().filter(|&x| x <= low_end).collect();
    let low = if low.len() >= 2 { low } else { xs[..2].to_vec() };
    let q = |x: T| x * x * x * law.dp(x);
    let mut low_fail = low.iter().copied().find(|&x| !(q(x) > T::zero()));
    if low_fail.is_none() {
        low_fail = low.windows(2).find(|w| !(q(w[0]) < q(w[1]))).map(|w| w[0]);
    }

    let delta = xi_min;
    let top_start = xi_max / T::lit(10.0);
    let mut top: Vec<T> = xs.iter().copied().filter(|&x| x >= top_start).collect();
    if top.len() < 2 {
        top = xs[xs.len() - 2..].to_vec();
    }
    let mut w_trend = Vec::with_capacity(top.len());
    for &x in &top {
        w_trend.push((x, law.w_delta(delta, x)?));
    }
    let w_fail = w_trend
        .iter()
        .find(|(_, w)| !w.is_finite())
        .map(|&(x, _)| x)
        .or_else(|| w_trend.windows(2).find(|w| !(w[1].1 > w[0].1)).map(|w| w[1].0));

    let checks = vec![
        check(CHECK_DP, dp_fail),
        check(CHECK_CONVEX, convex_fail),
        check(CHECK_LOW, low_fail),
        check(CHECK_W, w_fail),
    ];
    let pass = checks.iter().all(|c| c.pass);
    Ok(AdmissibilityReport {
        label: law.label().to_string(),
        sample_range: (xi_min, xi_max),
        checks,
        w_trend,
        pass,
    })
}

fn check<T>(name: &str, witness: Option<T>) -> AdmissibilityCheck<T> {
    AdmissibilityCheck {
        name: name.to_string(),
        pass: witness.is_none(),
        witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builtin_derivatives_match_finite_differences() {
        let laws = vec![
            PressureLaw::<f64>::linear(),
            PressureLaw::polytropic(2.5, 0.7).unwrap(),
            PressureLaw::logarithmic(1.3).unwrap(),
            PressureLaw::inverse(0.9).unwrap(),
            PressureLaw::power_sum(&[(0.5, 2.0), (0.2, 0.5)], 0.3),
        ];
        let h = 1e-4;
        for law in &laws {
            for &x in &[0.3, 1.0, 2.7] {
                for k in 1..=3 {
                    let fd = (law.derivative(k - 1, x + h).unwrap() - law.derivative(k - 1, x - h).unwrap()) / (2.0 * h);
                    let exact = law.derivative(k, x).unwrap();
                    assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "{} order {k} at {x}", law.label());
                }
            }
        }
    }

    #[test]
    fn polytropic_gamma_two_is_linear_for_half_kappa() {
        let law = PressureLaw::<f64>::polytropic(2.0, 0.5).unwrap();
        assert_relative_eq!(law.p(3.0), 3.0, epsilon = 1e-15);
        assert_relative_eq!(law.dp(3.0), 1.0, epsilon = 1e-15);
        assert_eq!(law.d2p(3.0), 0.0);
    }

    #[test]
    fn a_star_closed_forms() {
        let lin = PressureLaw::<f64>::linear();
        assert_relative_eq!(lin.a_star(8.0).unwrap(), 4.0, max_relative = 1e-12);
        assert_relative_eq!(lin.a_star(-8.0).unwrap(), 4.0, max_relative = 1e-12);
        let sq = PressureLaw::<f64>::monomial(1.5, 2.0);
        for &c in &[0.1, 1.0, 3.7, 250.0] {
            let expect = (c * c / 3.0f64).powf(0.25);
            assert_relative_eq!(sq.a_star(c).unwrap(), expect, max_relative = 1e-12);
        }
        let inv = PressureLaw::<f64>::inverse(1.0).unwrap();
        for &c in &[0.05, 1.0, 2.5, 40.0] {
            assert_relative_eq!(inv.a_star(c).unwrap(), c * c, max_relative = 1e-12);
        }
    }

    #[test]
    fn a_star_rejects_zero_speed_and_detects_unbounded_search() {
        let lin = PressureLaw::<f64>::linear();
        assert!(matches!(lin.a_star(0.0), Err(Error::Domain { .. })));
        let bounded = PressureLaw::<f64>::custom("bounded", |x| -1.0 / (x * x), |x| 2.0 / x.powi(3), |x| -6.0 / x.powi(4), |x| 24.0 / x.powi(5));
        assert!(matches!(bounded.a_star(3.0), Err(Error::UnboundedSearch { .. })));
    }

    #[test]
    fn g_c_examples() {
        let lin = PressureLaw::<f64>::linear();
        assert_eq!(lin.g_c(1.7, 1.0, 0).unwrap(), 0.0);
        assert_relative_eq!(lin.g_c(1.0, 2.0, 2).unwrap(), 3.0 / 16.0, epsilon = 1e-15);
        let a = lin.a_star(1.3).unwrap();
        assert!(lin.g_c(1.3, a, 1).unwrap().abs() < 1e-12);
        assert!(matches!(lin.g_c(1.0, 0.0, 0), Err(Error::Domain { .. })));
        assert!(lin.g_c(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn w_delta_examples() {
        let lin = PressureLaw::<f64>::linear();
        assert_relative_eq!(lin.w_delta(0.5, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        let e = std::f64::consts::E;
        let expect = (e.powi(4) - 2.0 * e * (e - 1.0) - 2.0 * e) / 2.0;
        assert_relative_eq!(lin.w_delta(0.5, e).unwrap(), expect, max_relative = 1e-14);
        assert!(lin.w_delta(0.5, 0.4).is_err());
        assert!(lin.w_delta(1.5, 2.0).is_err());
    }

    #[test]
    fn admissibility_of_builtin_examples() {
        let ok = [
            PressureLaw::<f64>::linear(),
            PressureLaw::inverse(1.0).unwrap(),
            PressureLaw::monomial(1.0, 2.0),
            PressureLaw::logarithmic(1.0).unwrap(),
        ];
        for law in &ok {
            let r = validate_admissibility(law, 1e-3, 1e3, 64).unwrap();
            assert!(r.pass, "{}: {:?}", law.label(), r.checks);
        }
        let bad = PressureLaw::<f64>::monomial(-1.0, 1.0);
        let r = validate_admissibility(&bad, 1e-3, 1e3, 64).unwrap();
        assert!(!r.pass);
        let c = &r.checks[0];
        assert_eq!(c.name, CHECK_DP);
        assert_eq!(c.witness, Some(1e-3));
    }

    #[test]
    fn admissibility_reports_non_finite_evaluation() {
        let law = PressureLaw::<f64>::custom("nan", |x| if x > 10.0 { f64::NAN } else { x }, |_| 1.0, |_| 0.0, |_| 0.0);
        assert!(matches!(validate_admissibility(&law, 1e-2, 1e2, 32), Err(Error::Evaluation { .. })));
    }

    #[test]
    fn f32_a_star() {
        let lin = PressureLaw::<f32>::linear();
        assert!((lin.a_star(8.0f32).unwrap() - 4.0).abs() < 1e-5);
    }
}
