//! The traveling-wave residual F(c, f) = G_c(f) + H⁻¹(f), its derivatives,
//! the dispersion relation and the qualitative-property monitors.

use serde::{Deserialize, Serialize};

use crate::elliptic::{hb_invert, EllipticOptions, LinearizedPoisson};
use crate::error::{Error, Result};
#[cfg(test)]
use crate::linalg::DenseMatrix;
use crate::pressure::PressureLaw;
use crate::scalar::{sup_abs, Real};
use crate::torus::{half_second_derivative, EvenField, TorusGrid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveDiagnostics<T> {
    pub min_f: T,
    pub max_f: T,
    /// a*(c) − max f.
    pub gap: T,
    /// sup-norm of F(c, f).
    pub residual: T,
}

/// A point (c, f) with its cached potential φ = H⁻¹(f).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveState<T> {
    pub c: T,
    pub f: EvenField<T>,
    pub phi: EvenField<T>,
    pub a_star: T,
    pub diagnostics: WaveDiagnostics<T>,
}

impl<T: Real> WaveState<T> {
    /// cosine_coefficient(f − 1, 1).
    pub fn amplitude(&self) -> T {
        self.f.cosine_coefficient(1).unwrap_or_else(|_| T::nan())
    }

    /// One-sided slope (f(0) − f(−h))/h at the crest.
    pub fn crest_slope(&self) -> T {
        let c = self.f.grid().crest_index();
        (self.f.values()[c] - self.f.values()[c - 1]) / self.f.grid().spacing()
    }
}

/// The discretized problem: pressure law, grid and elliptic solver settings.
#[derive(Clone, Debug)]
pub struct WaveProblem<T> {
    law: PressureLaw<T>,
    grid: TorusGrid<T>,
    elliptic: EllipticOptions<T>,
}

impl<T: Real> WaveProblem<T> {
    pub fn new(law: PressureLaw<T>, grid: TorusGrid<T>) -> Self {
        Self {
            law,
            grid,
            elliptic: EllipticOptions::default(),
        }
    }

    pub fn with_elliptic(mut self, elliptic: EllipticOptions<T>) -> Self {
        self.elliptic = elliptic;
        self
    }

    pub fn law(&self) -> &PressureLaw<T> {
        &self.law
    }

    pub fn grid(&self) -> &TorusGrid<T> {
        &self.grid
    }

    pub fn elliptic(&self) -> &EllipticOptions<T> {
        &self.elliptic
    }

    fn check_grid(&self, f: &EvenField<T>) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::Contract("field lives on a different grid than the problem".into()));
        }
        Ok(())
    }

    /// G_c(f) + φ nodewise on the half representation.
    pub(crate) fn half_residual(&self, c: T, f: &[T], phi: &[T]) -> Vec<T> {
        let c2h = c * c / T::lit(2.0);
        let p1 = self.law.p(T::one());
        f.iter()
            .zip(phi)
            .map(|(&x, &p)| c2h * (T::one() / (x * x) - T::one()) + self.law.p(x) - p1 + p)
            .collect()
    }

    /// Builds a state, solving for φ.
    pub fn state(&self, c: T, f: EvenField<T>) -> Result<WaveState<T>> {
        self.check_grid(&f)?;
        let min_f = f.min();
        if !(min_f > self.elliptic.delta_floor) {
            return Err(Error::domain("min f", min_f.to_f64_lossy(), "state must stay above delta_floor"));
        }
        let phi = hb_invert(&f, &self.elliptic)?.phi;
        self.state_with_phi(c, f, phi)
    }

    pub(crate) fn state_with_phi(&self, c: T, f: EvenField<T>, phi: EvenField<T>) -> Result<WaveState<T>> {
        let a_star = self.law.a_star(c)?;
        let r = self.half_residual(c, f.half(), phi.half());
        let max_f = f.max();
        let diagnostics = WaveDiagnostics {
            min_f: f.min(),
            max_f,
            gap: a_star - max_f,
            residual: sup_abs(&r),
        };
        Ok(WaveState {
            c,
            f,
            phi,
            a_star,
            diagnostics,
        })
    }

    /// F(c, f), solving for φ.
    pub fn residual_at(&self, c: T, f: &EvenField<T>) -> Result<EvenField<T>> {
        self.check_grid(f)?;
        let phi = hb_invert(f, &self.elliptic)?.phi;
        Ok(EvenField::from_half(self.grid, &self.half_residual(c, f.half(), phi.half())))
    }

    /// F at a state, from its cached φ.
    pub fn residual(&self, state: &WaveState<T>) -> EvenField<T> {
        EvenField::from_half(self.grid, &self.half_residual(state.c, state.f.half(), state.phi.half()))
    }

    /// (p'(f) − c² f⁻³) h + (e^φ − D²)⁻¹ h.
    pub fn jacobian_apply(&self, state: &WaveState<T>, h: &EvenField<T>) -> Result<EvenField<T>> {
        self.check_grid(h)?;
        let w = LinearizedPoisson::new(&state.phi)?.solve(h);
        let c2 = state.c * state.c;
        let mut out = Vec::with_capacity(self.grid.half_len());
        for ((&f, &hv), &wv) in state.f.half().iter().zip(h.half()).zip(w.half()) {
            out.push((self.law.dp(f) - c2 / (f * f * f)) * hv + wv);
        }
        Ok(EvenField::from_half(self.grid, &out))
    }

    /// ∂_c F = c (f⁻² − 1).
    pub fn residual_c_derivative(&self, state: &WaveState<T>) -> EvenField<T> {
        let c = state.c;
        state.f.map(|f| c * (T::one() / (f * f) - T::one()))
    }

    #[cfg(test)]
    /// Dense Jacobian of the half-representation residual with respect to
    /// the half-representation values of f.
    pub(crate) fn reduced_jacobian(&self, c: T, f: &[T], phi: &[T]) -> Result<DenseMatrix<T>> {
        let n = f.len();
        let shift: Vec<T> = phi.iter().map(|p| p.exp()).collect();
        let lin = LinearizedPoisson::with_shift(&self.grid, &shift)?;
        let mut jac = DenseMatrix::zeros(n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = lin.solve_half(&e);
            e[j] = T::zero();
            for (i, v) in col.into_iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        let c2 = c * c;
        for (i, &x) in f.iter().enumerate() {
            jac[(i, i)] += self.law.dp(x) - c2 / (x * x * x);
        }
        Ok(jac)
    }

    /// Continuum and grid-consistent bifurcation speeds for mode 1.
    pub fn bifurcation_point(&self) -> Result<BifurcationPoint<T>> {
        Ok(BifurcationPoint {
            c0_continuum: dispersion_speed(&self.law, self.grid.period(), 1)?,
            c0_discrete: discrete_dispersion_speed(&self.law, &self.grid, 1)?,
            kernel_mode: 1,
            wavenumber: self.grid.wavenumber(),
            discrete_symbol: self.grid.laplacian_symbol(1),
            period: self.grid.period(),
            nodes: self.grid.nodes(),
        })
    }

    /// Checks the qualitative properties expected of a non-trivial wave.
    pub fn validate_wave_properties(&self, state: &WaveState<T>, cfg: &MonitorConfig<T>) -> Result<PropertyReport<T>> {
        if !(state.diagnostics.residual <= cfg.tol) {
            return Err(Error::Contract(format!(
                "property validation needs a converged state: residual {:e} > tol {:e}",
                state.diagnostics.residual.to_f64_lossy(),
                cfg.tol.to_f64_lossy()
            )));
        }
        let dev = state.f.map(|v| v - T::one()).sup_norm();
        if !(dev > T::lit(10.0) * cfg.tol) {
            return Err(Error::Contract(format!(
                "property validation needs a non-trivial wave: |f - 1|_sup = {:e}",
                dev.to_f64_lossy()
            )));
        }
        let f = &state.f;
        let half = f.half();
        let n = half.len();
        let h = self.grid.spacing();

        let oscillation = state.diagnostics.min_f < T::one() && T::one() < state.diagnostics.max_f;

        let mut monotone_witness = None;
        for j in 0..n - 1 {
            let d = half[j + 1] - half[j];
            let interior = j >= 1 && j + 2 < n;
            if d < -cfg.tol || (interior && !(d > T::zero())) {
                monotone_witness = Some(j);
                break;
            }
        }

        let curvature = if state.diagnostics.gap > cfg.curvature_margin {
            let d2 = half_second_derivative(half, h);
            Some(d2[n - 1] < T::zero() && d2[0] > T::zero())
        } else {
            None
        };

        let (lipschitz_seminorm, _) = holder_seminorms(f, 0);
        let trough_gap = state.a_star - f.trough();
        let report = PropertyReport {
            oscillation,
            monotone: monotone_witness.is_none(),
            monotone_witness,
            curvature,
            lipschitz: lipschitz_seminorm <= cfg.lipschitz_cap,
            lipschitz_seminorm,
            amplitude_gap: trough_gap >= cfg.amplitude_floor,
            trough_gap,
        };
        Ok(report)
    }
}

/// sqrt(p'(1) + 1/(1 + (2πm/L)²)).
pub fn dispersion_speed<T: Real>(law: &PressureLaw<T>, period: T, m: usize) -> Result<T> {
    if m == 0 {
        return Err(Error::domain("m", 0.0, "mode must be at least 1"));
    }
    if !(period > T::zero()) {
        return Err(Error::domain("L", period.to_f64_lossy(), "must be positive"));
    }
    let a = T::TAU() * T::of(m) / period;
    speed_from_symbol(law, a * a)
}

/// Same as [`dispersion_speed`] with (2πm/L)² replaced by the discrete
/// symbol of −D² on mode m.
pub fn discrete_dispersion_speed<T: Real>(law: &PressureLaw<T>, grid: &TorusGrid<T>, m: usize) -> Result<T> {
    if m == 0 || m > grid.nodes() / 2 {
        return Err(Error::Index { k: m, max: grid.nodes() / 2 });
    }
    speed_from_symbol(law, grid.laplacian_symbol(m))
}

fn speed_from_symbol<T: Real>(law: &PressureLaw<T>, symbol: T) -> Result<T> {
    let p1 = law.dp(T::one());
    if !(p1 > T::zero()) {
        return Err(Error::domain("dp(1)", p1.to_f64_lossy(), "must be positive"));
    }
    Ok((p1 + T::one() / (T::one() + symbol)).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint<T> {
    pub c0_continuum: T,
    pub c0_discrete: T,
    pub kernel_mode: usize,
    pub wavenumber: T,
    pub discrete_symbol: T,
    pub period: T,
    pub nodes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig<T> {
    pub tol: T,
    pub curvature_margin: T,
    pub lipschitz_cap: T,
    pub amplitude_floor: T,
}

impl<T: Real> Default for MonitorConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::tol_floor(1e-9, 1e4),
            curvature_margin: T::lit(0.05),
            lipschitz_cap: T::lit(10.0),
            amplitude_floor: T::lit(0.01),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport<T> {
    pub oscillation: bool,
    pub monotone: bool,
    /// First half-grid index j where f_{j+1} − f_j fails.
    pub monotone_witness: Option<usize>,
    /// `None` when the check is suspended near touching.
    pub curvature: Option<bool>,
    pub lipschitz: bool,
    pub lipschitz_seminorm: T,
    pub amplitude_gap: bool,
    pub trough_gap: T,
}

impl<T> PropertyReport<T> {
    pub fn pass(&self) -> bool {
        self.oscillation && self.monotone && self.curvature.unwrap_or(true) && self.lipschitz && self.amplitude_gap
    }
}

/// (max |Δf|/h, max |f(x) − f(y)|/|x − y|^{1/2}) with the Hölder quotient
/// taken over pairs within half a period. At most `max_pairs` pairs are
/// examined (0 skips the Hölder part); larger grids are subsampled on an
/// evenly strided node subset.
pub fn holder_seminorms<T: Real>(f: &EvenField<T>, max_pairs: usize) -> (T, T) {
    let v = f.values();
    let m = v.len();
    let h = f.grid().spacing();
    let lip = (0..m).map(|j| (v[(j + 1) % m] - v[j]).abs()).fold(T::zero(), T::max) / h;
    if max_pairs == 0 {
        return (lip, T::zero());
    }
    let total = m * (m - 1) / 2;
    let nodes: Vec<usize> = if total <= max_pairs {
        (0..m).collect()
    } else {
        let k = ((1.0 + (1.0 + 8.0 * max_pairs as f64).sqrt()) / 2.0).floor() as usize;
        let k = k.max(2);
        (0..k).map(|i| i * m / k).collect()
    };
    let mut holder = T::zero();
    for (a, &i) in nodes.iter().enumerate() {
        for &j in &nodes[a + 1..] {
            let d = (j - i).min(m - (j - i));
            let q = (v[i] - v[j]).abs() / (T::of(d) * h).sqrt();
            holder = holder.max(q);
        }
    }
    (lip, holder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn problem(m: usize) -> WaveProblem<f64> {
        WaveProblem::new(PressureLaw::linear(), TorusGrid::new(TAU, m).unwrap())
    }

    #[test]
    fn dispersion_examples() {
        let lin = PressureLaw::<f64>::linear();
        assert_relative_eq!(dispersion_speed(&lin, TAU, 1).unwrap(), 1.5f64.sqrt(), epsilon = 1e-15);
        let speeds: Vec<f64> = (1..20).map(|m| dispersion_speed(&lin, TAU, m).unwrap()).collect();
        assert!(speeds.windows(2).all(|w| w[1] < w[0]));
        assert!(speeds[18] > 1.0 && speeds[18] < 1.002);
        let sq = PressureLaw::<f64>::monomial(1.0, 2.0);
        assert_relative_eq!(dispersion_speed(&sq, TAU, 1).unwrap(), 2.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn residual_vanishes_at_constant_state() {
        let pb = problem(64);
        let one = EvenField::constant(*pb.grid(), 1.0);
        assert!(pb.residual_at(1.7, &one).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn jacobian_on_cosine_modes_at_constant_state() {
        let pb = problem(128);
        let g = *pb.grid();
        let c = 1.1;
        let st = pb.state(c, EvenField::constant(g, 1.0)).unwrap();
        for k in 0..5 {
            let h = EvenField::cosine_mode(g, k, 1.0);
            let jh = pb.jacobian_apply(&st, &h).unwrap();
            let mu = 1.0 - c * c + 1.0 / (1.0 + g.laplacian_symbol(k));
            assert!(jh.zip_map(&h, |a, b| a - mu * b).sup_norm() < 1e-13);
        }
    }

    #[test]
    fn residual_c_derivative_example() {
        let pb = problem(32);
        let st = pb.state(3.0, EvenField::constant(*pb.grid(), 2.0)).unwrap();
        let d = pb.residual_c_derivative(&st);
        assert!(d.values().iter().all(|&v| (v + 9.0 / 4.0).abs() < 1e-15));
    }

    #[test]
    fn reduced_jacobian_matches_apply() {
        let pb = problem(64);
        let g = *pb.grid();
        let st = pb.state(1.2, EvenField::from_fn(g, |x| 1.0 + 0.1 * x.cos())).unwrap();
        let h = EvenField::from_fn(g, |x| (2.0 * x).cos() + 0.3 * x.sin().powi(2));
        let jh = pb.jacobian_apply(&st, &h).unwrap();
        let jac = pb.reduced_jacobian(st.c, st.f.half(), st.phi.half()).unwrap();
        let dense = jac.mul_vec(h.half());
        for (a, b) in dense.iter().zip(jh.half()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn validator_preconditions_and_witness() {
        let pb = problem(64);
        let g = *pb.grid();
        let trivial = pb.state(1.2, EvenField::constant(g, 1.0)).unwrap();
        let cfg = MonitorConfig::default();
        assert!(matches!(pb.validate_wave_properties(&trivial, &cfg), Err(Error::Contract(_))));

        // A cached potential equal to −G_c(f) makes the residual vanish, so
        // the checks run on a hand-built non-monotone profile.
        let bumpy = EvenField::from_fn(g, |x| 1.0 + 0.1 * x.cos() + 0.05 * (3.0 * x).cos());
        let c = 1.2;
        let phi = bumpy.map(|f| -pb.law().g_c(c, f, 0).unwrap());
        let st = pb.state_with_phi(c, bumpy, phi).unwrap();
        let rep = pb.validate_wave_properties(&st, &cfg).unwrap();
        assert!(!rep.monotone);
        assert!(rep.monotone_witness.is_some());
    }

    #[test]
    fn holder_examples() {
        let g = TorusGrid::new(TAU, 64).unwrap();
        assert_eq!(holder_seminorms(&EvenField::constant(g, 2.0), 100_000), (0.0, 0.0));
        let lips: Vec<f64> = [64, 256, 1024]
            .iter()
            .map(|&m| holder_seminorms(&EvenField::cosine_mode(TorusGrid::new(TAU, m).unwrap(), 1, 1.0), 1000).0)
            .collect();
        assert!((lips[2] - 1.0).abs() < (lips[0] - 1.0).abs());
        assert!((lips[2] - 1.0).abs() < 1e-5);
    }
}
