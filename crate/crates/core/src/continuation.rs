//! Pseudo-arclength continuation of the bifurcating branch toward the
//! touching boundary max f = a*(c), and the pinned solve for the limiting
//! corner wave.

use serde::{Deserialize, Serialize};

use crate::bifurcation::{check_regular_period, small_amplitude_wave};
use crate::elliptic::{hb_invert, EllipticOptions};
use crate::error::{Error, Result};
use crate::newton::{bordered_newton, c_derivative, LinearConstraint, ReducedJacobian};
use crate::pressure::{validate_admissibility, PressureLaw};
use crate::scalar::{sup_abs, Real};
use crate::torus::{half_second_derivative, EvenField, TorusGrid};
use crate::wave::{holder_seminorms, MonitorConfig, PropertyReport, WaveProblem, WaveState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "T: Real"))]
pub struct ContinuationConfig<T> {
    /// Grid node count M.
    pub grid_m: usize,
    pub tol_newton: T,
    pub tol_elliptic: T,
    pub ds_init: T,
    pub ds_min: T,
    pub ds_max: T,
    /// Gap a*(c) − max f at which the branch counts as touching;
    /// `None` means 1e−3·a*(c₀).
    pub tol_touch: Option<T>,
    pub max_steps: usize,
    pub max_corrector_iters: usize,
    pub delta_floor: T,
    /// `None` means 10·c₀.
    pub c_cap: Option<T>,
    pub amplitude_floor: T,
    /// `None` means 0.05·a*(c₀).
    pub curvature_margin: Option<T>,
    pub lipschitz_cap: T,
    /// Mode-1 amplitude of the local-chart seed.
    pub seed_amplitude: T,
    /// Points used by the crest-slope extrapolation.
    pub theta_fit_points: usize,
}

impl<T: Real> Default for ContinuationConfig<T> {
    fn default() -> Self {
        Self {
            grid_m: 1024,
            tol_newton: T::tol_floor(1e-9, 1e4),
            tol_elliptic: T::tol_floor(1e-11, 1e3),
            ds_init: T::lit(0.01),
            ds_min: T::lit(1e-7),
            ds_max: T::lit(0.02),
            tol_touch: None,
            max_steps: 500,
            max_corrector_iters: 8,
            delta_floor: T::lit(1e-4),
            c_cap: None,
            amplitude_floor: T::lit(0.01),
            curvature_margin: None,
            lipschitz_cap: T::lit(10.0),
            seed_amplitude: T::lit(0.05),
            theta_fit_points: 10,
        }
    }
}

impl<T: Real> ContinuationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(name, v.to_f64_lossy(), "must be positive and finite"))
            }
        };
        positive("tol_newton", self.tol_newton)?;
        positive("tol_elliptic", self.tol_elliptic)?;
        positive("ds_init", self.ds_init)?;
        positive("ds_min", self.ds_min)?;
        positive("ds_max", self.ds_max)?;
        positive("delta_floor", self.delta_floor)?;
        positive("amplitude_floor", self.amplitude_floor)?;
        positive("lipschitz_cap", self.lipschitz_cap)?;
        positive("seed_amplitude", self.seed_amplitude)?;
        for (name, v) in [
            ("tol_touch", self.tol_touch),
            ("c_cap", self.c_cap),
            ("curvature_margin", self.curvature_margin),
        ] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if !(self.ds_min <= self.ds_init && self.ds_init <= self.ds_max) {
            return Err(Error::domain(
                "ds_init",
                self.ds_init.to_f64_lossy(),
                "need ds_min <= ds_init <= ds_max",
            ));
        }
        if self.max_corrector_iters == 0 {
            return Err(Error::domain("max_corrector_iters", 0.0, "must be at least 1"));
        }
        if self.theta_fit_points < 2 {
            return Err(Error::domain("theta_fit_points", self.theta_fit_points as f64, "must be at least 2"));
        }
        Ok(())
    }

    pub fn elliptic_options(&self) -> EllipticOptions<T> {
        EllipticOptions {
            tol: self.tol_elliptic,
            delta_floor: self.delta_floor,
            ..EllipticOptions::default()
        }
    }

    /// Problem on the configured grid.
    pub fn problem(&self, law: &PressureLaw<T>, period: T) -> Result<WaveProblem<T>> {
        let grid = TorusGrid::new(period, self.grid_m)?;
        Ok(WaveProblem::new(law.clone(), grid).with_elliptic(self.elliptic_options()))
    }
}

/// Thresholds after filling the defaults that depend on c₀.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds<T> {
    pub c0: T,
    pub a_star_c0: T,
    pub tol_touch: T,
    pub c_cap: T,
    pub curvature_margin: T,
}

impl<T: Real> Thresholds<T> {
    pub fn resolve(problem: &WaveProblem<T>, cfg: &ContinuationConfig<T>) -> Result<Self> {
        let c0 = problem.bifurcation_point()?.c0_discrete;
        let a0 = problem.law().a_star(c0)?;
        Ok(Self {
            c0,
            a_star_c0: a0,
            tol_touch: cfg.tol_touch.unwrap_or(T::lit(1e-3) * a0),
            c_cap: cfg.c_cap.unwrap_or(T::lit(10.0) * c0.abs()),
            curvature_margin: cfg.curvature_margin.unwrap_or(T::lit(0.05) * a0),
        })
    }

    fn monitor_config(&self, cfg: &ContinuationConfig<T>) -> MonitorConfig<T> {
        MonitorConfig {
            tol: cfg.tol_newton,
            curvature_margin: self.curvature_margin,
            lipschitz_cap: cfg.lipschitz_cap,
            amplitude_floor: cfg.amplitude_floor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Touched,
    MaxSteps,
    StepUnderflow,
    MonitorViolation,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Touched => "touched",
            StopReason::MaxSteps => "max_steps",
            StopReason::StepUnderflow => "step_underflow",
            StopReason::MonitorViolation => "monitor_violation",
        }
    }
}

/// One CSV row of the branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRow<T> {
    pub s_arc: T,
    pub c: T,
    pub amplitude: T,
    pub min_f: T,
    pub max_f: T,
    pub gap: T,
    pub crest_slope: T,
    pub residual: T,
    pub newton_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchMonitors<T> {
    pub properties: PropertyReport<T>,
    pub floor: bool,
    pub c_cap: bool,
    pub amplitude_increasing: bool,
}

impl<T> BranchMonitors<T> {
    pub fn pass(&self) -> bool {
        self.properties.pass() && self.floor && self.c_cap && self.amplitude_increasing
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint<T> {
    pub row: BranchRow<T>,
    pub state: WaveState<T>,
    pub monitors: BranchMonitors<T>,
    /// Set on the point that stopped the tracer with a monitor violation.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedState<T> {
    pub c: T,
    pub f: Vec<T>,
}

/// Everything needed to continue a trace bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct Checkpoint<T> {
    pub config: ContinuationConfig<T>,
    pub period: T,
    pub law_label: String,
    pub thresholds: Thresholds<T>,
    pub steps: usize,
    pub ds: T,
    pub s_arc: T,
    pub rows: Vec<BranchRow<T>>,
    /// Secant anchor; for a fresh trace this is an auxiliary local-chart
    /// solve, not a recorded point.
    pub previous: SavedState<T>,
    pub last: SavedState<T>,
    pub stop_reason: Option<StopReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct Branch<T> {
    /// Summary of every point since the seed, including points recorded
    /// before a resume.
    pub rows: Vec<BranchRow<T>>,
    /// Full states computed in this run.
    pub points: Vec<BranchPoint<T>>,
    pub stop_reason: StopReason,
    pub theta_extrapolated: Option<T>,
    pub thresholds: Thresholds<T>,
    /// Final state of the branch.
    pub last: WaveState<T>,
    pub checkpoint: Checkpoint<T>,
}

struct Tracer<'a, T: Real> {
    problem: &'a WaveProblem<T>,
    cfg: &'a ContinuationConfig<T>,
    thresholds: Thresholds<T>,
    weights: Vec<T>,
    steps: usize,
    ds: T,
    s_arc: T,
    rows: Vec<BranchRow<T>>,
    points: Vec<BranchPoint<T>>,
    prev_c: T,
    prev_f: Vec<T>,
    last: WaveState<T>,
    last_amplitude: T,
    prev_gap: Option<T>,
}

impl<'a, T: Real> Tracer<'a, T> {
    fn norm(&self, dc: T, df: &[T]) -> T {
        (dc * dc + df.iter().zip(&self.weights).map(|(&d, &w)| w * d * d).sum::<T>()).sqrt()
    }

    fn make_point(&self, state: WaveState<T>, s_arc: T, iters: usize) -> Result<BranchPoint<T>> {
        let mcfg = self.thresholds.monitor_config(self.cfg);
        let properties = self.problem.validate_wave_properties(&state, &mcfg)?;
        let amplitude = state.amplitude();
        let monitors = BranchMonitors {
            properties,
            floor: state.diagnostics.min_f > self.cfg.delta_floor,
            c_cap: state.c.abs() <= self.thresholds.c_cap,
            amplitude_increasing: amplitude > self.last_amplitude,
        };
        let row = BranchRow {
            s_arc,
            c: state.c,
            amplitude,
            min_f: state.diagnostics.min_f,
            max_f: state.diagnostics.max_f,
            gap: state.diagnostics.gap,
            crest_slope: state.crest_slope(),
            residual: state.diagnostics.residual,
            newton_iters: iters,
        };
        Ok(BranchPoint {
            row,
            state,
            monitors,
            flagged: false,
        })
    }

    fn record(&mut self, mut point: BranchPoint<T>) -> bool {
        let ok = point.monitors.pass();
        point.flagged = !ok;
        self.last_amplitude = point.row.amplitude;
        self.prev_gap = Some(point.row.gap);
        self.rows.push(point.row);
        self.points.push(point);
        ok
    }

    /// Attempts one predictor–corrector step of length `ds`.
    fn try_step(&self) -> Option<(WaveState<T>, usize)> {
        let last_f = self.last.f.half();
        let dc = self.last.c - self.prev_c;
        let df: Vec<T> = last_f.iter().zip(&self.prev_f).map(|(&a, &b)| a - b).collect();
        let norm = self.norm(dc, &df);
        if !(norm > T::zero()) {
            return None;
        }
        let tc = dc / norm;
        let tf: Vec<T> = df.iter().map(|&d| d / norm).collect();
        let ds = self.ds;
        let c_pred = self.last.c + ds * tc;
        let f_pred: Vec<T> = last_f.iter().zip(&tf).map(|(&f, &t)| f + ds * t).collect();
        let g_f: Vec<T> = tf.iter().zip(&self.weights).map(|(&t, &w)| t * w).collect();
        let rhs = tc * c_pred + g_f.iter().zip(&f_pred).map(|(&g, &f)| g * f).sum::<T>();
        let constraint = LinearConstraint { g_f, g_c: tc, rhs };
        let out = bordered_newton(
            self.problem,
            c_pred,
            f_pred,
            &constraint,
            self.cfg.tol_newton,
            self.cfg.max_corrector_iters,
        )
        .ok()?;
        let grid = *self.problem.grid();
        let state = self
            .problem
            .state_with_phi(out.c, EvenField::from_half(grid, &out.f), EvenField::from_half(grid, &out.phi))
            .ok()?;
        // Overshooting the touching boundary is a step failure, not a wave.
        if !(state.diagnostics.gap >= T::zero()) {
            return None;
        }
        Some((state, out.iterations))
    }

    /// Caps ds so the linear gap prediction stays clear of the boundary.
    fn gap_limited_ds(&self) -> T {
        let gap = self.last.diagnostics.gap;
        let Some(prev_gap) = self.prev_gap_before_last() else {
            return self.ds;
        };
        let dc = self.last.c - self.prev_c;
        let df: Vec<T> = self.last.f.half().iter().zip(&self.prev_f).map(|(&a, &b)| a - b).collect();
        let dist = self.norm(dc, &df);
        let rate = (prev_gap - gap) / dist;
        if rate > T::zero() {
            self.ds.min(T::lit(0.9) * gap / rate)
        } else {
            self.ds
        }
    }

    fn prev_gap_before_last(&self) -> Option<T> {
        let n = self.rows.len();
        if n >= 2 {
            Some(self.rows[n - 2].gap)
        } else {
            None
        }
    }

    fn run(mut self) -> Result<Branch<T>> {
        let stop = loop {
            if self.last.diagnostics.gap <= self.thresholds.tol_touch {
                break StopReason::Touched;
            }
            if self.steps >= self.cfg.max_steps {
                break StopReason::MaxSteps;
            }
            self.ds = self.gap_limited_ds().max(self.cfg.ds_min);
            let Some((state, iters)) = self.try_step() else {
                self.ds /= T::lit(2.0);
                if self.ds < self.cfg.ds_min {
                    break StopReason::StepUnderflow;
                }
                continue;
            };
            let dc = state.c - self.last.c;
            let df: Vec<T> = state.f.half().iter().zip(self.last.f.half()).map(|(&a, &b)| a - b).collect();
            let s_arc = self.s_arc + self.norm(dc, &df);
            let point = self.make_point(state.clone(), s_arc, iters)?;
            self.steps += 1;
            self.s_arc = s_arc;
            self.prev_c = self.last.c;
            self.prev_f = self.last.f.half().to_vec();
            self.last = state;
            if !self.record(point) {
                break StopReason::MonitorViolation;
            }
            if iters <= 3 {
                self.ds = (self.ds * T::lit(1.3)).min(self.cfg.ds_max);
            }
        };
        Ok(self.finish(stop))
    }

    fn finish(self, stop: StopReason) -> Branch<T> {
        let theta_extrapolated = if stop == StopReason::Touched {
            extrapolate_theta(&self.rows, self.cfg.theta_fit_points)
        } else {
            None
        };
        let grid_m = self.problem.grid().nodes();
        let checkpoint = Checkpoint {
            config: self.cfg.clone(),
            period: self.problem.grid().period(),
            law_label: self.problem.law().label().to_string(),
            thresholds: self.thresholds,
            steps: self.steps,
            ds: self.ds,
            s_arc: self.s_arc,
            rows: self.rows.clone(),
            previous: SavedState {
                c: self.prev_c,
                f: crate::torus::mirror(&self.prev_f, grid_m),
            },
            last: SavedState {
                c: self.last.c,
                f: self.last.f.values().to_vec(),
            },
            stop_reason: Some(stop),
        };
        Branch {
            rows: self.rows,
            points: self.points,
            stop_reason: stop,
            theta_extrapolated,
            thresholds: self.thresholds,
            last: self.last,
            checkpoint,
        }
    }
}

/// Least-squares line through (gap, crest_slope) over the last `n` rows,
/// evaluated at gap = 0.
pub fn extrapolate_theta<T: Real>(rows: &[BranchRow<T>], n: usize) -> Option<T> {
    let tail = &rows[rows.len().saturating_sub(n)..];
    if tail.len() < 2 {
        return None;
    }
    let m = T::of(tail.len());
    let mx = tail.iter().map(|r| r.gap).sum::<T>() / m;
    let my = tail.iter().map(|r| r.crest_slope).sum::<T>() / m;
    let sxx: T = tail.iter().map(|r| (r.gap - mx) * (r.gap - mx)).sum();
    let sxy: T = tail.iter().map(|r| (r.gap - mx) * (r.crest_slope - my)).sum();
    if !(sxx > T::zero()) {
        return None;
    }
    Some(my - sxy / sxx * mx)
}

fn check_preconditions<T: Real>(law: &PressureLaw<T>, period: T) -> Result<()> {
    let report = validate_admissibility(law, T::lit(1e-3), T::lit(1e3), 64)?;
    if !report.pass {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        return Err(Error::Contract(format!(
            "pressure law `{}` is not admissible: {}",
            law.label(),
            failed.join(", ")
        )));
    }
    check_regular_period(law, period, T::lit(1e-6))
}

/// Traces the branch from the local-chart seed toward touching.
pub fn trace_branch<T: Real>(law: &PressureLaw<T>, period: T, cfg: &ContinuationConfig<T>) -> Result<Branch<T>> {
    cfg.validate()?;
    check_preconditions(law, period)?;
    let problem = cfg.problem(law, period)?;
    let thresholds = Thresholds::resolve(&problem, cfg)?;
    // The touching boundary sits at a*(c₀) − 1 above the constant state,
    // which can be far closer than the configured seed amplitude.
    let seed_s = cfg.seed_amplitude.min(T::lit(0.25) * (thresholds.a_star_c0 - T::one()));
    let seed = small_amplitude_wave(&problem, seed_s, cfg.tol_newton)?;
    // A second chart solve slightly further out fixes the initial secant
    // and therefore the orientation toward growing amplitude.
    let aux = small_amplitude_wave(&problem, seed_s * T::lit(1.02), cfg.tol_newton)?;

    let mut tracer = Tracer {
        problem: &problem,
        cfg,
        thresholds,
        weights: problem.grid().half_weights(),
        steps: 0,
        ds: cfg.ds_init,
        s_arc: T::zero(),
        rows: Vec::new(),
        points: Vec::new(),
        prev_c: seed.state.c,
        prev_f: seed.state.f.half().to_vec(),
        last: seed.state.clone(),
        last_amplitude: T::neg_infinity(),
        prev_gap: None,
    };
    let seed_point = tracer.make_point(seed.state.clone(), T::zero(), seed.newton_iters)?;
    if !tracer.record(seed_point) {
        return Ok(tracer.finish(StopReason::MonitorViolation));
    }
    // Secant direction seed → aux; reflected about the seed so that the
    // stored anchor lies behind the seed.
    let two = T::lit(2.0);
    tracer.prev_c = two * seed.state.c - aux.state.c;
    tracer.prev_f = seed
        .state
        .f
        .half()
        .iter()
        .zip(aux.state.f.half())
        .map(|(&s, &a)| two * s - a)
        .collect();
    tracer.run()
}

/// Continues a checkpointed trace; `max_steps` overrides the stored limit
/// when given.
pub fn resume_branch<T: Real>(law: &PressureLaw<T>, checkpoint: &Checkpoint<T>, max_steps: Option<usize>) -> Result<Branch<T>> {
    let mut cfg = checkpoint.config.clone();
    if let Some(m) = max_steps {
        cfg.max_steps = m;
    }
    cfg.validate()?;
    let problem = cfg.problem(law, checkpoint.period)?;
    let grid = *problem.grid();
    let last_f = EvenField::from_samples(grid, checkpoint.last.f.clone())?;
    let prev_f = EvenField::from_samples(grid, checkpoint.previous.f.clone())?;
    let last = problem.state(checkpoint.last.c, last_f)?;
    let tracer = Tracer {
        problem: &problem,
        cfg: &cfg,
        thresholds: checkpoint.thresholds,
        weights: grid.half_weights(),
        steps: checkpoint.steps,
        ds: checkpoint.ds,
        s_arc: checkpoint.s_arc,
        rows: checkpoint.rows.clone(),
        points: Vec::new(),
        prev_c: checkpoint.previous.c,
        prev_f: prev_f.half().to_vec(),
        last,
        last_amplitude: checkpoint.rows.last().map(|r| r.amplitude).unwrap_or(T::neg_infinity()),
        prev_gap: checkpoint.rows.last().map(|r| r.gap),
    };
    tracer.run()
}

/// θ = sqrt((a*(c) − e^{−G_c(a*(c))}) / G_c''(a*(c))).
pub fn theoretical_theta<T: Real>(law: &PressureLaw<T>, c: T) -> Result<T> {
    let a = law.a_star(c)?;
    let num = a - (-law.g_c(c, a, 0)?).exp();
    let den = law.g_c(c, a, 2)?;
    theta_from_parts(num, den, a)
}

fn theta_from_parts<T: Real>(num: T, den: T, scale: T) -> Result<T> {
    let degenerate = T::epsilon() * T::lit(64.0) * scale.abs().max(T::one());
    if !(num > degenerate && den > T::zero()) {
        return Err(Error::DegenerateCorner {
            radicand: (num / den).to_f64_lossy(),
        });
    }
    Ok((num / den).sqrt())
}

/// θ from the potential: sqrt(−φ''(0)/G_c''(a*(c))), with φ'' the discrete
/// second difference at the crest.
pub fn theta_from_potential<T: Real>(law: &PressureLaw<T>, state: &WaveState<T>) -> Result<T> {
    let grid = state.phi.grid();
    let d2 = half_second_derivative(state.phi.half(), grid.spacing());
    let num = -d2[grid.half_len() - 1];
    let den = law.g_c(state.c, state.a_star, 2)?;
    theta_from_parts(num, den, state.a_star)
}

/// (max |Δf|/h, half-Hölder quotient over at most 10⁵ node pairs).
pub fn holder_diagnostics<T: Real>(f: &EvenField<T>) -> (T, T) {
    holder_seminorms(f, 100_000)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitWaveChecks {
    pub even: bool,
    pub increasing: bool,
    pub within_bounds: bool,
    pub oscillation: bool,
    pub crest_pinned: bool,
}

impl LimitWaveChecks {
    pub fn pass(&self) -> bool {
        self.even && self.increasing && self.within_bounds && self.oscillation && self.crest_pinned
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitWave<T> {
    pub state: WaveState<T>,
    pub newton_iters: usize,
    pub crest_slope: T,
    pub theta: T,
    pub theta_potential: T,
    pub slope_relative_error: T,
    /// (|x_j|, (a*(c) − f(x_j))/|x_j|) for the nodes nearest the crest.
    pub near_crest_slopes: Vec<(T, T)>,
    /// Intercept and slope of the line fitted to `near_crest_slopes`.
    pub slope_fit: (T, T),
    pub checks: LimitWaveChecks,
}

/// Solves the crest-pinned system starting from the last point of a
/// touched branch. The crest value is substituted by a*(c) and all M/2 + 1
/// residual equations are kept, so the unknowns are c and the off-crest
/// values of f.
pub fn solve_limit_wave<T: Real>(law: &PressureLaw<T>, period: T, seed: &Branch<T>, cfg: &ContinuationConfig<T>) -> Result<LimitWave<T>> {
    if seed.stop_reason != StopReason::Touched {
        return Err(Error::Contract(format!(
            "limit wave needs a touched branch, got stop reason `{}`",
            seed.stop_reason.as_str()
        )));
    }
    cfg.validate()?;
    // G_c'(a*) = 0 makes the crest equation quadratic in the crest error,
    // so the pinned solve runs well below the branch tolerance.
    let tol = cfg.tol_newton.min(T::tol_floor(1e-12, 1e3));
    let elliptic = cfg.elliptic_options().with_tol(cfg.tol_elliptic.min(T::tol_floor(1e-13, 64.0)));
    let problem = cfg.problem(law, period)?.with_elliptic(elliptic);
    let grid = *problem.grid();
    if seed.last.f.grid() != &grid {
        return Err(Error::Contract("seed branch was traced on a different grid".into()));
    }
    let n = grid.half_len();
    let crest = n - 1;
    let floor = cfg.delta_floor;
    let max_iter = 50;

    let mut c = seed.last.c;
    let mut f = seed.last.f.half().to_vec();
    let mut it = 0;
    let (phi, a_star) = loop {
        let a_star = law.a_star(c)?;
        f[crest] = a_star;
        let field = EvenField::from_half(grid, &f);
        let phi = hb_invert(&field, problem.elliptic())?.phi.half().to_vec();
        let r = problem.half_residual(c, &f, &phi);
        let res = sup_abs(&r);
        if res <= tol {
            break (phi, a_star);
        }
        if it >= max_iter || !res.is_finite() {
            return Err(Error::NonConvergence {
                solver: "pinned limit-wave Newton",
                iterations: it,
                residual: res.to_f64_lossy(),
                hint: "; trace the seed branch with a tighter tol_touch",
            });
        }
        let jac = ReducedJacobian::new(&problem, c, &f, &phi)?;
        let dp = law.dp(a_star);
        let d2p = law.d2p(a_star);
        let da = T::lit(2.0) * c / (a_star * a_star * (T::lit(3.0) * dp + a_star * d2p));
        // Crest row of the constraint: δf_crest − a*'(c) δc = 0.
        let mut g = vec![T::zero(); n];
        g[crest] = T::one();
        let neg_r: Vec<T> = r.iter().map(|&v| -v).collect();
        let (df, dc) = jac.solve_bordered(&c_derivative(c, &f), &g, -da, &neg_r, T::zero())?;

        // Backtrack until the off-crest values stay strictly between the
        // floor and the new ceiling a*(c).
        let mut step = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let c_new = c + step * dc;
            if let Ok(a_new) = law.a_star(c_new) {
                let feasible = (0..crest).all(|j| {
                    let v = f[j] + step * df[j];
                    v > floor && v < a_new
                });
                if feasible {
                    for j in 0..crest {
                        f[j] += step * df[j];
                    }
                    c = c_new;
                    accepted = true;
                    break;
                }
            }
            step /= T::lit(2.0);
        }
        if !accepted {
            return Err(Error::NonConvergence {
                solver: "pinned limit-wave Newton",
                iterations: it,
                residual: res.to_f64_lossy(),
                hint: "; line search found no feasible step, trace the seed with a tighter tol_touch",
            });
        }
        it += 1;
    };

    let state = problem.state_with_phi(c, EvenField::from_half(grid, &f), EvenField::from_half(grid, &phi))?;
    let crest_slope = state.crest_slope();
    let theta = theoretical_theta(law, c)?;
    let theta_potential = theta_from_potential(law, &state)?;
    let h = grid.spacing();
    let near_crest_slopes: Vec<(T, T)> = (1..=5.min(crest))
        .map(|k| {
            let x = T::of(k) * h;
            (x, (a_star - f[crest - k]) / x)
        })
        .collect();
    let slope_fit = fit_line(&near_crest_slopes);

    let half = &f;
    let checks = LimitWaveChecks {
        even: state.f.evenness_defect() == T::zero(),
        increasing: half.windows(2).all(|w| w[1] > w[0]),
        within_bounds: (0..crest).all(|j| half[j] > floor && half[j] < a_star),
        oscillation: half[0] < T::one() && T::one() < half[crest],
        crest_pinned: (half[crest] - a_star).abs() <= T::tol_floor(1e-10, 16.0) * a_star,
    };
    Ok(LimitWave {
        state,
        newton_iters: it,
        crest_slope,
        theta,
        theta_potential,
        slope_relative_error: (crest_slope / theta - T::one()).abs(),
        near_crest_slopes,
        slope_fit,
        checks,
    })
}

/// (intercept, slope) of the least-squares line through the points.
fn fit_line<T: Real>(pts: &[(T, T)]) -> (T, T) {
    let m = T::of(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / m;
    let my = pts.iter().map(|p| p.1).sum::<T>() / m;
    let sxx: T = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx > T::zero() {
        let b = sxy / sxx;
        (my - b * mx, b)
    } else {
        (my, T::zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn small_cfg() -> ContinuationConfig<f64> {
        ContinuationConfig {
            grid_m: 128,
            ..ContinuationConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(small_cfg().validate().is_ok());
        let bad = ContinuationConfig {
            ds_init: 1.0,
            ..small_cfg()
        };
        assert!(bad.validate().is_err());
        let bad = ContinuationConfig {
            tol_newton: 0.0,
            ..small_cfg()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn theta_degenerate_at_trivial_touching_state() {
        let lin = PressureLaw::<f64>::linear();
        assert!(matches!(theoretical_theta(&lin, 1.0), Err(Error::DegenerateCorner { .. })));
        let t = theoretical_theta(&lin, 1.2186).unwrap();
        assert!(t > 0.0 && t.is_finite());
    }

    #[test]
    fn max_steps_stop_and_orientation() {
        let cfg = ContinuationConfig {
            max_steps: 3,
            ..small_cfg()
        };
        let b = trace_branch(&PressureLaw::linear(), TAU, &cfg).unwrap();
        assert_eq!(b.stop_reason, StopReason::MaxSteps);
        assert!(b.rows.len() <= 4);
        assert!(b.rows[1].amplitude > b.rows[0].amplitude);
        assert!(b.points.iter().all(|p| p.monitors.pass()));
    }

    #[test]
    fn touches_and_pins_on_coarse_grid() {
        let cfg = small_cfg();
        let law = PressureLaw::linear();
        let b = trace_branch(&law, TAU, &cfg).unwrap();
        assert_eq!(b.stop_reason, StopReason::Touched);
        assert!(b.rows.windows(2).all(|w| w[1].amplitude > w[0].amplitude));
        let near = theta_from_potential(&law, &b.last).unwrap();
        let exact = theoretical_theta(&law, b.last.c).unwrap();
        assert!((near / exact - 1.0).abs() < 0.05);
        let lw = solve_limit_wave(&law, TAU, &b, &cfg).unwrap();
        assert!(lw.checks.pass(), "{:?}", lw.checks);
        assert!(lw.slope_relative_error < 0.05);
        assert_relative_eq!(lw.theta, lw.theta_potential, max_relative = 1e-6);
    }

    #[test]
    fn extrapolation_of_exact_line() {
        let rows: Vec<BranchRow<f64>> = (0..5)
            .map(|i| BranchRow {
                s_arc: i as f64,
                c: 1.0,
                amplitude: 0.0,
                min_f: 0.0,
                max_f: 0.0,
                gap: 0.1 / (i + 1) as f64,
                crest_slope: 0.2 - 0.5 * 0.1 / (i + 1) as f64,
                residual: 0.0,
                newton_iters: 1,
            })
            .collect();
        assert_relative_eq!(extrapolate_theta(&rows, 10).unwrap(), 0.2, epsilon = 1e-14);
        assert!(extrapolate_theta(&rows[..1], 10).is_none());
    }
}
