use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use ionwave::bifurcation::{check_regular_period, local_bifurcation_data};
use ionwave::continuation::{self, Branch, BranchMonitors, Checkpoint, StopReason, Thresholds};
use ionwave::elliptic::{hb_invert, EllipticScheme};
use ionwave::io;
use ionwave::pressure::validate_admissibility;
use ionwave::torus::TorusGrid;
use ionwave::wave::{BifurcationPoint, WaveProblem};
use serde::{Deserialize, Serialize};

use crate::config::{apply_override, PressureSpec, RunConfig};
use crate::CliError;

/// On-disk checkpoint: the run configuration plus the tracer state.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointFile {
    pub run_config: RunConfig,
    pub checkpoint: Checkpoint<f64>,
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| ionwave::Error::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    io::write_json(io::create(path)?, value)?;
    Ok(())
}

/// Writes the JSON file and echoes the same text on stdout.
fn emit_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(ionwave::Error::from)?;
    fs::write(path, format!("{text}\n")).map_err(|e| ionwave::Error::Io(format!("{}: {e}", path.display())))?;
    // A closed pipe on stdout is not an error; the file is authoritative.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

pub fn check_pressure(cfg: &RunConfig) -> Result<(), CliError> {
    let law = cfg.pressure.law()?;
    let (lo, hi) = cfg.check_range;
    let report = validate_admissibility(&law, lo, hi, cfg.check_samples)?;
    emit_json(&output_dir(cfg)?.join("admissibility.json"), &report)?;
    if report.pass {
        Ok(())
    } else {
        let failed: Vec<String> = report
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| match c.witness {
                Some(w) => format!("{} (witness xi = {w})", c.name),
                None => c.name.clone(),
            })
            .collect();
        Err(CliError::Validation(format!(
            "pressure law `{}` is not admissible: {}",
            report.label,
            failed.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct BifurcationReport {
    pressure: String,
    #[serde(flatten)]
    point: BifurcationPoint<f64>,
    /// Mode-1 coefficient of the mixed derivative, −2c₀.
    transversality: f64,
}

pub fn bifurcation_point(cfg: &RunConfig) -> Result<(), CliError> {
    let law = cfg.pressure.law()?;
    let problem = WaveProblem::new(law, TorusGrid::new(cfg.period, cfg.grid_m)?);
    let point = problem.bifurcation_point()?;
    let report = BifurcationReport {
        pressure: problem.law().label().to_string(),
        transversality: -2.0 * point.c0_continuum,
        point,
    };
    emit_json(&output_dir(cfg)?.join("bifurcation_point.json"), &report)
}

#[derive(Serialize)]
struct EllipticReport {
    input: String,
    period: f64,
    nodes: usize,
    scheme: EllipticScheme,
    iterations: usize,
    final_residual: f64,
    min_f: f64,
    max_f: f64,
    min_phi: f64,
    max_phi: f64,
    maximum_principle: bool,
}

pub fn solve_elliptic(cfg: &RunConfig, input: &Path) -> Result<(), CliError> {
    let file = File::open(input).map_err(|e| ionwave::Error::Io(format!("{}: {e}", input.display())))?;
    let f = io::read_field_csv::<_, f64>(BufReader::new(file))
        .map_err(|e| CliError::Validation(format!("{}: {e}", input.display())))?;
    let opts = cfg.elliptic_options();
    let solved = hb_invert(&f, &opts)?;
    let phi = &solved.phi;
    let slack = 1e-12;
    let report = EllipticReport {
        input: input.display().to_string(),
        period: f.grid().period(),
        nodes: f.grid().nodes(),
        scheme: solved.scheme,
        iterations: solved.iterations,
        final_residual: solved.final_residual,
        min_f: f.min(),
        max_f: f.max(),
        min_phi: phi.min(),
        max_phi: phi.max(),
        maximum_principle: phi.min() >= f.min().ln() - slack && phi.max() <= f.max().ln() + slack,
    };
    let dir = output_dir(cfg)?;
    io::write_field_csv(io::create(&dir.join("phi.csv"))?, "phi", phi)?;
    write_json(&dir.join("elliptic_report.json"), &report)?;
    if report.maximum_principle {
        Ok(())
    } else {
        Err(CliError::MonitorViolation(format!(
            "maximum principle violated: phi in [{}, {}], log f in [{}, {}]",
            report.min_phi,
            report.max_phi,
            report.min_f.ln(),
            report.max_f.ln()
        )))
    }
}

#[derive(Serialize)]
struct Psi2Report {
    pressure: String,
    #[serde(rename = "L")]
    period: f64,
    c0: f64,
    #[serde(rename = "A")]
    a_coef: f64,
    #[serde(rename = "B")]
    b_coef: f64,
    a_tilde: f64,
    b_tilde: f64,
    psi2_operator: f64,
    psi2_poly: f64,
    psi2_poly_scaled: f64,
    a_coeffs: [f64; 9],
    exceptional_periods: Vec<f64>,
    exceptional_periods_operator: Vec<f64>,
    regular_period: bool,
}

pub fn psi2(cfg: &RunConfig, pressure: Option<&str>, period: Option<f64>) -> Result<(), CliError> {
    let spec = match pressure {
        Some(text) => PressureSpec::parse(text)?,
        None => cfg.pressure.clone(),
    };
    let period = period.unwrap_or(cfg.period);
    if !(period > 0.0 && period.is_finite()) {
        return Err(CliError::Validation(format!("L = {period} must be positive and finite")));
    }
    let law = spec.law()?;
    let data = local_bifurcation_data(&law, period, None)?;
    let report = Psi2Report {
        pressure: law.label().to_string(),
        period,
        c0: data.c0,
        a_coef: data.a_coef,
        b_coef: data.b_coef,
        a_tilde: data.a_tilde,
        b_tilde: data.b_tilde,
        psi2_operator: data.psi2_operator,
        psi2_poly: data.psi2_poly,
        psi2_poly_scaled: data.psi2_poly_scaled,
        a_coeffs: data.a_coeffs,
        exceptional_periods: data.exceptional_periods,
        exceptional_periods_operator: data.exceptional_periods_operator,
        regular_period: check_regular_period(&law, period, 1e-6).is_ok(),
    };
    emit_json(&output_dir(cfg)?.join("psi2.json"), &report)
}

#[derive(Serialize)]
struct BranchSummary<'a> {
    pressure: &'a str,
    #[serde(rename = "L")]
    period: f64,
    #[serde(rename = "grid_M")]
    grid_m: usize,
    stop_reason: StopReason,
    points: usize,
    steps: usize,
    theta_extrapolated: Option<f64>,
    theta_at_end: Option<f64>,
    thresholds: Thresholds<f64>,
    flagged: Vec<usize>,
    last: &'a continuation::BranchRow<f64>,
}

fn failed_monitors(m: &BranchMonitors<f64>) -> Vec<String> {
    let p = &m.properties;
    let mut out = Vec::new();
    if !p.oscillation {
        out.push("oscillation".to_string());
    }
    if !p.monotone {
        out.push(format!("monotone (node {:?})", p.monotone_witness));
    }
    if p.curvature == Some(false) {
        out.push("curvature".to_string());
    }
    if !p.lipschitz {
        out.push(format!("lipschitz (seminorm {})", p.lipschitz_seminorm));
    }
    if !p.amplitude_gap {
        out.push(format!("amplitude_gap (a* - f(-L/2) = {})", p.trough_gap));
    }
    if !m.floor {
        out.push("delta_floor".to_string());
    }
    if !m.c_cap {
        out.push("c_cap".to_string());
    }
    if !m.amplitude_increasing {
        out.push("amplitude_increasing".to_string());
    }
    out
}

fn write_branch_outputs(cfg: &RunConfig, branch: &Branch<f64>, law_label: &str) -> Result<(), CliError> {
    let dir = output_dir(cfg)?;
    io::write_branch_csv(io::create(&dir.join("branch.csv"))?, &branch.rows)?;
    let file = CheckpointFile {
        run_config: cfg.clone(),
        checkpoint: branch.checkpoint.clone(),
    };
    write_json(&dir.join("checkpoint.json"), &file)?;

    let offset = branch.rows.len() - branch.points.len();
    let last = branch.rows.len() - 1;
    for (i, point) in branch.points.iter().enumerate() {
        let k = offset + i;
        if k % cfg.profile_every == 0 || k == last || point.flagged {
            let path = dir.join(format!("profile_{k:04}.csv"));
            io::write_profile_csv(io::create(&path)?, &point.state.f, &point.state.phi)?;
        }
    }

    let law = cfg.pressure.law()?;
    let summary = BranchSummary {
        pressure: law_label,
        period: cfg.period,
        grid_m: cfg.grid_m,
        stop_reason: branch.stop_reason,
        points: branch.rows.len(),
        steps: branch.checkpoint.steps,
        theta_extrapolated: branch.theta_extrapolated,
        theta_at_end: continuation::theoretical_theta(&law, branch.last.c).ok(),
        thresholds: branch.thresholds,
        flagged: branch
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.flagged)
            .map(|(i, _)| offset + i)
            .collect(),
        last: &branch.rows[last],
    };
    emit_json(&dir.join("branch.json"), &summary)
}

fn stop_status(branch: &Branch<f64>, cfg: &RunConfig) -> Result<(), CliError> {
    let last = branch.rows.last().expect("a branch holds at least its seed");
    match branch.stop_reason {
        StopReason::Touched | StopReason::MaxSteps => Ok(()),
        StopReason::StepUnderflow => Err(CliError::NonConvergence(format!(
            "arclength step fell below ds_min = {} at s_arc = {}, gap = {}",
            cfg.continuation.ds_min, last.s_arc, last.gap
        ))),
        StopReason::MonitorViolation => {
            let (k, point) = branch
                .points
                .iter()
                .enumerate()
                .find(|(_, p)| p.flagged)
                .expect("a monitor stop flags its point");
            Err(CliError::MonitorViolation(format!(
                "monitor violation at branch point {} (c = {}, amplitude = {}): {}",
                branch.rows.len() - branch.points.len() + k,
                point.row.c,
                point.row.amplitude,
                failed_monitors(&point.monitors).join(", ")
            )))
        }
    }
}

pub fn trace_branch(cfg: &RunConfig) -> Result<(), CliError> {
    let law = cfg.pressure.law()?;
    let branch = continuation::trace_branch(&law, cfg.period, &cfg.continuation())?;
    write_branch_outputs(cfg, &branch, law.label())?;
    stop_status(&branch, cfg)
}

fn load_checkpoint(path: &Path, overrides: &[String]) -> Result<(RunConfig, Checkpoint<f64>), CliError> {
    let file: CheckpointFile = io::read_json(path)?;
    let mut value = serde_json::to_value(&file.run_config).map_err(ionwave::Error::from)?;
    for item in overrides {
        apply_override(&mut value, item)?;
    }
    let cfg = RunConfig::from_value(value)?;
    let law = cfg.pressure.law()?;
    let ck = &file.checkpoint;
    if law.label() != ck.law_label || cfg.period != ck.period || cfg.grid_m != ck.config.grid_m {
        return Err(CliError::Validation(format!(
            "checkpoint {} was traced for `{}` with L = {}, grid_M = {}; the configuration asks for `{}` with L = {}, grid_M = {}",
            path.display(),
            ck.law_label,
            ck.period,
            ck.config.grid_m,
            law.label(),
            cfg.period,
            cfg.grid_m
        )));
    }
    Ok((cfg, file.checkpoint))
}

pub fn resume(path: &Path, overrides: &[String], max_steps: Option<usize>) -> Result<(), CliError> {
    let (mut cfg, checkpoint) = load_checkpoint(path, overrides)?;
    let max = max_steps.unwrap_or(cfg.continuation.max_steps);
    cfg.continuation.max_steps = max;
    let law = cfg.pressure.law()?;
    let branch = continuation::resume_branch(&law, &checkpoint, Some(max))?;
    write_branch_outputs(&cfg, &branch, law.label())?;
    stop_status(&branch, &cfg)
}

#[derive(Serialize)]
struct SlopeSample {
    x: f64,
    slope: f64,
}

#[derive(Serialize)]
struct LimitReport<'a> {
    pressure: &'a str,
    #[serde(rename = "L")]
    period: f64,
    #[serde(rename = "grid_M")]
    grid_m: usize,
    c: f64,
    a_star: f64,
    crest_value: f64,
    trough_value: f64,
    residual: f64,
    newton_iters: usize,
    crest_slope: f64,
    theta: f64,
    theta_potential: f64,
    slope_relative_error: f64,
    theta_forms_relative_gap: f64,
    near_crest_slopes: Vec<SlopeSample>,
    slope_fit_intercept: f64,
    slope_fit_slope: f64,
    lipschitz_seminorm: f64,
    half_holder_seminorm: f64,
    checks: &'a continuation::LimitWaveChecks,
    seed_points: usize,
    seed_gap: f64,
}

pub fn limit_wave(cfg: &RunConfig, checkpoint: Option<&Path>, overrides: &[String]) -> Result<(), CliError> {
    let (cfg, branch) = match checkpoint {
        Some(path) => {
            let (cfg, ck) = load_checkpoint(path, overrides)?;
            let law = cfg.pressure.law()?;
            let branch = continuation::resume_branch(&law, &ck, Some(ck.steps))?;
            (cfg, branch)
        }
        None => {
            let law = cfg.pressure.law()?;
            (cfg.clone(), continuation::trace_branch(&law, cfg.period, &cfg.continuation())?)
        }
    };
    if branch.stop_reason != StopReason::Touched {
        stop_status(&branch, &cfg)?;
        return Err(CliError::Validation(format!(
            "the seed branch stopped with `{}` before touching (gap = {}); raise continuation.max_steps",
            branch.stop_reason.as_str(),
            branch.last.diagnostics.gap
        )));
    }
    let law = cfg.pressure.law()?;
    let lw = continuation::solve_limit_wave(&law, cfg.period, &branch, &cfg.continuation())?;
    let (lip, holder) = continuation::holder_diagnostics(&lw.state.f);
    let dir = output_dir(&cfg)?;
    io::write_profile_csv(io::create(&dir.join("limit_profile.csv"))?, &lw.state.f, &lw.state.phi)?;
    let report = LimitReport {
        pressure: law.label(),
        period: cfg.period,
        grid_m: cfg.grid_m,
        c: lw.state.c,
        a_star: lw.state.a_star,
        crest_value: lw.state.f.crest(),
        trough_value: lw.state.f.trough(),
        residual: lw.state.diagnostics.residual,
        newton_iters: lw.newton_iters,
        crest_slope: lw.crest_slope,
        theta: lw.theta,
        theta_potential: lw.theta_potential,
        slope_relative_error: lw.slope_relative_error,
        theta_forms_relative_gap: (lw.theta_potential / lw.theta - 1.0).abs(),
        near_crest_slopes: lw.near_crest_slopes.iter().map(|&(x, slope)| SlopeSample { x, slope }).collect(),
        slope_fit_intercept: lw.slope_fit.0,
        slope_fit_slope: lw.slope_fit.1,
        lipschitz_seminorm: lip,
        half_holder_seminorm: holder,
        checks: &lw.checks,
        seed_points: branch.rows.len(),
        seed_gap: branch.last.diagnostics.gap,
    };
    emit_json(&dir.join("limit_wave.json"), &report)?;
    if lw.checks.pass() {
        Ok(())
    } else {
        Err(CliError::MonitorViolation(format!("limit wave fails its shape checks: {:?}", lw.checks)))
    }
}
