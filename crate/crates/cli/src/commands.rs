//! The three subcommands. Each writes its CSV (and for `verify` a JSON
//! verdict) plus an echo of the effective config into the output directory.

use std::fmt::Write as _;
use std::fs;

use serde::Serialize;

use punctura::bsop::{self, Spectrum};
use punctura::geometry::{Curve, CurveSpec};
use punctura::oracles;
use punctura::perturb::{self, SweepConfig, Verdict};

use crate::config::{fmt_float, ExperimentConfig};

/// Fitted slopes must match the prediction to this fraction of the slope
/// scale for a branch to pass `verify`.
pub const SLOPE_TOL: f64 = 0.05;

#[derive(Debug)]
pub enum CmdError {
    /// The config is unusable for the requested command.
    Config(String),
    /// The numerics or the output failed.
    Solver(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 3,
            CmdError::Solver(_) => 2,
        }
    }
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(m) => write!(f, "config error: {m}"),
            CmdError::Solver(m) => write!(f, "solver error: {m}"),
        }
    }
}

impl From<punctura::Error> for CmdError {
    fn from(e: punctura::Error) -> Self {
        CmdError::Solver(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Solver(format!("output: {e}"))
    }
}

type Result<T> = std::result::Result<T, CmdError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Circle,
    Grid,
    Norm,
}

fn prepare(cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&cfg.outputs)?;
    fs::write(cfg.outputs.join("config.txt"), cfg.to_text())?;
    Ok(())
}

fn unpunctured(cfg: &ExperimentConfig) -> Result<(Curve, Spectrum)> {
    let curve = Curve::build(cfg.curve, cfg.mesh)?;
    let spectrum = bsop::solve_spectrum(&curve, cfg.beta, &curve.puncture(0.0)?, cfg.search)?;
    Ok((curve, spectrum))
}

/// Writes `spectrum.csv`. `j` and `multiplicity_group` count from 1.
pub fn cmd_spectrum(cfg: &ExperimentConfig) -> Result<()> {
    prepare(cfg)?;
    let (_, spectrum) = unpunctured(cfg)?;
    let mut csv = String::from("j,kappa,lambda,multiplicity_group,value_at_origin\n");
    for (j, s) in spectrum.states.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            j + 1,
            fmt_float(s.kappa),
            fmt_float(s.lambda),
            s.group + 1,
            fmt_float(s.value_at_origin)
        );
    }
    fs::write(cfg.outputs.join("spectrum.csv"), csv)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub j: usize,
    pub group: usize,
    pub mu: f64,
    pub s_value: f64,
    pub fitted_slope: Option<f64>,
    pub raw_slope: Option<f64>,
    pub predicted_slope: f64,
    pub relative_error: Option<f64>,
    pub remainder_exponent: Option<f64>,
    pub last_remainder_ratio: Option<f64>,
    pub verdict: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupRecord {
    pub group: usize,
    pub members: Vec<usize>,
    pub predicted_trace_slope: f64,
    pub fitted_trace_slope: Option<f64>,
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictFile {
    pub beta: f64,
    pub eps0: f64,
    pub levels: usize,
    pub slope_tolerance: f64,
    pub branches: Vec<BranchRecord>,
    pub groups: Vec<GroupRecord>,
    pub all_pass: bool,
}

/// Runs the puncture sweep, writes `sweep.csv` and `verdict.json`, and
/// returns whether every branch that was not truncated passed. A branch
/// passes when its remainder diagnostic passes and its fitted slope is
/// within [`SLOPE_TOL`] of the prediction.
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<bool> {
    prepare(cfg)?;
    let (eps0, levels) = (cfg.sweep.eps0, cfg.sweep.levels);
    // The mesh is graded toward the puncture so every eps_k is a breakpoint.
    let mesh = perturb::sweep_mesh(cfg.mesh.base_panels, eps0, levels, cfg.mesh.order);
    let curve = Curve::build(cfg.curve, mesh)?;
    let report = perturb::sweep(
        &curve,
        cfg.beta,
        &SweepConfig {
            eps0,
            levels,
            search: cfg.search,
        },
    )?;
    let verdicts = perturb::remainder_diagnostic(&report)?;

    let n = report.mu.len();
    let mut csv = String::from("eps,measure,j,lambda,predicted,residual\n");
    for j in 0..n {
        let mu = fmt_float(report.mu[j]);
        let _ = writeln!(csv, "{},{},{},{mu},{mu},{}", fmt_float(0.0), fmt_float(0.0), j + 1, fmt_float(0.0));
    }
    let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
    for k in 0..report.epsilons.len() {
        for j in 0..n {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                fmt_float(report.epsilons[k]),
                fmt_float(report.measures[k]),
                j + 1,
                opt(report.lambdas[k][j]),
                fmt_float(report.predicted[k][j]),
                opt(report.residuals[k][j])
            );
        }
    }
    fs::write(cfg.outputs.join("sweep.csv"), csv)?;

    let mut group_of = vec![0; n];
    for (g, idx) in report.groups.iter().enumerate() {
        for &j in idx {
            group_of[j] = g;
        }
    }
    let branches: Vec<BranchRecord> = verdicts
        .iter()
        .map(|v| {
            let verdict = match v.verdict {
                Verdict::Truncated => Verdict::Truncated,
                Verdict::Pass if v.relative_error.is_some_and(|e| e <= SLOPE_TOL) => Verdict::Pass,
                _ => Verdict::Fail,
            };
            BranchRecord {
                j: v.j + 1,
                group: group_of[v.j] + 1,
                mu: report.mu[v.j],
                s_value: report.s_values[v.j],
                fitted_slope: v.fitted_slope,
                raw_slope: report.raw_slope[v.j],
                predicted_slope: v.predicted_slope,
                relative_error: v.relative_error,
                remainder_exponent: v.remainder_exponent,
                last_remainder_ratio: v.last_ratio,
                verdict: verdict.to_string(),
            }
        })
        .collect();
    let groups = report
        .groups
        .iter()
        .enumerate()
        .map(|(g, idx)| {
            let predicted = report.group_slopes[g];
            let fitted = report.group_fitted_slopes[g];
            GroupRecord {
                group: g + 1,
                members: idx.iter().map(|j| j + 1).collect(),
                predicted_trace_slope: predicted,
                fitted_trace_slope: fitted,
                relative_error: fitted.map(|f| (f - predicted).abs() / predicted.abs()),
            }
        })
        .collect();
    let all_pass = branches.iter().all(|b| b.verdict != "FAIL");
    let file = VerdictFile {
        beta: cfg.beta,
        eps0,
        levels,
        slope_tolerance: SLOPE_TOL,
        branches,
        groups,
        all_pass,
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| CmdError::Solver(e.to_string()))?;
    fs::write(cfg.outputs.join("verdict.json"), json + "\n")?;
    Ok(all_pass)
}

fn rel(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

/// Writes `oracle.csv` comparing the solver to one reference.
pub fn cmd_oracle(cfg: &ExperimentConfig, which: OracleKind) -> Result<()> {
    let radius = match (which, cfg.curve) {
        (OracleKind::Circle, CurveSpec::Circle { radius }) => Some(radius),
        (OracleKind::Circle, _) => {
            return Err(CmdError::Config("the circle oracle needs `kind = circle`".into()))
        }
        _ => None,
    };
    prepare(cfg)?;
    let (curve, spectrum) = unpunctured(cfg)?;
    let mut csv = String::from("source,quantity,value,reference,rel_err\n");
    let mut row = |source: &str, quantity: &str, value: f64, reference: f64| {
        let _ = writeln!(
            csv,
            "{source},{quantity},{},{},{}",
            fmt_float(value),
            fmt_float(reference),
            fmt_float(rel(value, reference))
        );
    };
    match which {
        OracleKind::Circle => {
            let modes = oracles::circle_spectrum(radius.unwrap(), cfg.beta);
            let expected: Vec<_> = modes
                .iter()
                .flat_map(|m| std::iter::repeat(m).take(m.multiplicity))
                .collect();
            if expected.len() != spectrum.states.len() {
                return Err(CmdError::Solver(format!(
                    "solver found {} states, the circle has {}",
                    spectrum.states.len(),
                    expected.len()
                )));
            }
            for (s, m) in spectrum.states.iter().zip(&expected) {
                row("circle", &format!("kappa_m{}", m.m), s.kappa, m.kappa);
            }
        }
        OracleKind::Grid => {
            let first = spectrum
                .states
                .first()
                .ok_or_else(|| CmdError::Solver("no bound state to compare".into()))?;
            let grid = oracles::grid_spectrum(&cfg.grid, &curve, cfg.beta, &curve.puncture(0.0)?, 1)?;
            row("grid", "lambda_1", grid[0], first.lambda);
        }
        OracleKind::Norm => {
            let first = spectrum
                .states
                .first()
                .ok_or_else(|| CmdError::Solver("no bound state to compare".into()))?;
            let quad = oracles::grid_norm_sq(&curve, first, &cfg.grid)?;
            row("norm", "l2_norm_sq", quad, first.l2_norm_sq);
        }
    }
    fs::write(cfg.outputs.join("oracle.csv"), csv)?;
    Ok(())
}
