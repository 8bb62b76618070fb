//! Subcommand pipelines and the mapping from library errors to exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use twave_core::bvp::{self, AdmissibilityResult, BvpError, BvpOptions, EndpointData, FloorCheck};
use twave_core::coefficients::{
    average_stats, parse_model, AverageStats, HypothesisCheck, Model, ModelError, StatsError,
};
use twave_core::profile::{self, ProfileError, ZGrid};
use twave_core::regularization::{self, GammaLimit, RegularizationError};
use twave_core::serde_ext::{extended, extended_opt};
use twave_core::wave_speed::{self, SpeedBounds, WaveSpeedError};

use crate::output::{self, cell, RunReport, Timings};
use crate::{Cli, Command};

pub const USAGE: u8 = 1;
pub const INVALID_MODEL: u8 = 2;
pub const NUMERICAL: u8 = 3;
pub const REFUSED: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure { code, error: error.into() }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::new(INVALID_MODEL, e)
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        Failure::new(NUMERICAL, e)
    }
}

impl From<BvpError> for Failure {
    fn from(e: BvpError) -> Self {
        Failure::new(NUMERICAL, e)
    }
}

impl From<ProfileError> for Failure {
    fn from(e: ProfileError) -> Self {
        Failure::new(NUMERICAL, e)
    }
}

impl From<WaveSpeedError> for Failure {
    fn from(e: WaveSpeedError) -> Self {
        let code = match e {
            WaveSpeedError::DualCase { .. } | WaveSpeedError::Refused { .. } => REFUSED,
            _ => NUMERICAL,
        };
        Failure::new(code, e)
    }
}

impl From<RegularizationError> for Failure {
    fn from(e: RegularizationError) -> Self {
        let code = match e {
            RegularizationError::EpsOutOfRange { .. } => USAGE,
            RegularizationError::Hypothesis(_) | RegularizationError::Model(_) => INVALID_MODEL,
            RegularizationError::NotAdmissible { .. } => REFUSED,
            _ => NUMERICAL,
        };
        Failure::new(code, e)
    }
}

/// Shared state of one invocation.
struct Run<'a> {
    cli: &'a Cli,
    argv: &'a [String],
    hash: String,
    timings: Timings,
    warnings: Vec<String>,
    outputs: Vec<String>,
}

impl<'a> Run<'a> {
    fn load(cli: &'a Cli, argv: &'a [String], path: &Path) -> Result<(Self, Model), Failure> {
        let bytes = fs::read(path)
            .with_context(|| format!("cannot read model file {}", path.display()))
            .map_err(|e| Failure::new(USAGE, e))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| Failure::new(INVALID_MODEL, anyhow!("{} is not UTF-8", path.display())))?;
        let mut timings = Timings::default();
        let model = timings.time("parse", || parse_model(&text))?;
        let run = Run {
            cli,
            argv,
            hash: output::model_hash(&bytes),
            timings,
            warnings: Vec::new(),
            outputs: Vec::new(),
        };
        Ok((run, model))
    }

    fn stats(&mut self, m: &Model) -> Result<AverageStats, Failure> {
        let s = self.timings.time("stats", || average_stats(m))?;
        self.warnings.extend(s.warnings.iter().cloned());
        Ok(s)
    }

    fn out_dir(&self) -> Result<Option<PathBuf>, Failure> {
        self.cli
            .out
            .as_deref()
            .map(output::ensure_dir)
            .transpose()
            .map_err(|e| Failure::new(USAGE, e))
    }

    /// Writes a CSV table into the output directory, if there is one.
    fn table(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), Failure> {
        let Some(dir) = self.out_dir()? else {
            return Ok(());
        };
        let path = dir.join(name);
        output::write_csv(&path, header, rows).map_err(|e| Failure::new(USAGE, e))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    fn finish<T: Serialize>(self, name: &str, result: T) -> Result<(), Failure> {
        self.emit(name, result, true)
    }

    /// Writes the report; `echo` repeats the warnings on stderr.
    fn emit<T: Serialize>(mut self, name: &str, result: T, echo: bool) -> Result<(), Failure> {
        let dir = self.out_dir()?;
        let json_path = dir.as_ref().map(|d| d.join(format!("{name}.json")));
        if let Some(p) = &json_path {
            self.outputs.push(p.display().to_string());
        }
        if echo && !self.cli.quiet {
            for w in &self.warnings {
                eprintln!("warning: {w}");
            }
        }
        let report = RunReport {
            model_hash: self.hash,
            command: self.argv.to_vec(),
            result,
            outputs: self.outputs,
            timings: self.timings.into_inner(),
            warnings: self.warnings,
        };
        let json = output::to_json(&report).map_err(|e| Failure::new(NUMERICAL, e))?;
        match json_path {
            Some(p) => output::write_text(&p, &json).map_err(|e| Failure::new(USAGE, e))?,
            None if !self.cli.quiet => print!("{json}"),
            None => {}
        }
        Ok(())
    }
}

pub fn run(cli: &Cli, argv: &[String]) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { model } => validate(cli, argv, model),
        Command::Bounds { model } => bounds(cli, argv, model),
        Command::Certify { model, c } => certify(cli, argv, model, *c),
        Command::Solve { model, c } => solve(cli, argv, model, *c),
        Command::Speed { model, tol } => speed(cli, argv, model, *tol),
        Command::Profile { model, c, grid } => profile(cli, argv, model, *c, *grid as usize),
        Command::RegSweep { model, eps, c } => reg_sweep(cli, argv, model, eps, *c),
    }
}

#[derive(Serialize)]
struct ValidateRecord<'a> {
    p: f64,
    theta: Vec<f64>,
    theta_star: Vec<f64>,
    checks: &'a [HypothesisCheck],
    endpoint: EndpointData,
    stats: &'a AverageStats,
}

fn validate(cli: &Cli, argv: &[String], path: &Path) -> Result<(), Failure> {
    let (mut run, m) = Run::load(cli, argv, path)?;
    let stats = run.stats(&m)?;
    let record = ValidateRecord {
        p: m.p(),
        theta: m.theta(),
        theta_star: m.theta_star(),
        checks: m.checks(),
        endpoint: bvp::endpoint_data(&m),
        stats: &stats,
    };
    run.finish("validate", record)
}

#[derive(Serialize)]
struct BoundsRecord<'a> {
    bounds: SpeedBounds,
    stats: &'a AverageStats,
}

fn bounds(cli: &Cli, argv: &[String], path: &Path) -> Result<(), Failure> {
    let (mut run, m) = Run::load(cli, argv, path)?;
    let stats = run.stats(&m)?;
    let bounds = run.timings.time("bounds", || wave_speed::bounds_c_star(&m, &stats))?;
    run.warnings.extend(bounds.notes.iter().cloned());
    run.finish("bounds", BoundsRecord { bounds, stats: &stats })
}

fn certify(cli: &Cli, argv: &[String], path: &Path, c: f64) -> Result<(), Failure> {
    let (mut run, m) = Run::load(cli, argv, path)?;
    let stats = run.stats(&m)?;
    let cert = run.timings.time("certify", || wave_speed::certify(&m, &stats, c))?;
    if cert.verdict == wave_speed::Verdict::Indeterminate {
        run.warnings
            .push(format!("certificate at c = {c} is indeterminate; use `solve`"));
    }
    run.finish("certify", cert)
}

/// Flat summary of a solver verdict; every key is present for every verdict.
#[derive(Serialize)]
struct SolveRecord {
    c: f64,
    verdict: &'static str,
    #[serde(serialize_with = "extended_opt")]
    xi_cross: Option<f64>,
    reason: Option<String>,
    #[serde(serialize_with = "extended_opt")]
    slope_at_zero: Option<f64>,
    residual_sup: Option<f64>,
    boundary_defect: Option<(f64, f64)>,
    floor_check: Option<FloorCheck>,
    mesh_points: usize,
    stiff_steps: usize,
    diagnostics: Vec<String>,
}

fn solve(cli: &Cli, argv: &[String], path: &Path, c: f64) -> Result<(), Failure> {
    let (mut run, m) = Run::load(cli, argv, path)?;
    let res = run
        .timings
        .time("solve", || bvp::solve_bvp(&m, c, &BvpOptions::default()))?;
    let mut rec = SolveRecord {
        c,
        verdict: res.label(),
        xi_cross: None,
        reason: None,
        slope_at_zero: None,
        residual_sup: None,
        boundary_defect: None,
        floor_check: None,
        mesh_points: 0,
        stiff_steps: 0,
        diagnostics: Vec::new(),
    };
    match &res {
        AdmissibilityResult::Admissible(y) => {
            rec.slope_at_zero = Some(y.slope_at_zero);
            rec.residual_sup = Some(y.residual_sup);
            rec.boundary_defect = Some(y.boundary_defect);
            rec.floor_check = y.floor_check;
            rec.mesh_points = y.mesh.len();
            rec.stiff_steps = y.stiff_steps;
            rec.diagnostics = y.diagnostics.clone();
            let rows = (0..y.mesh.len()).map(|i| {
                vec![
                    cell(y.mesh[i]),
                    cell(y.y[i]),
                    cell(y.ydot_left[i]),
                    cell(y.ydot_right[i]),
                    cell(y.residual[i]),
                ]
            });
            run.table("solve.csv", &["xi", "y", "ydot_left", "ydot_right", "residual"], rows)?;
        }
        AdmissibilityResult::Inadmissible { xi_cross, reason } => {
            rec.xi_cross = Some(*xi_cross);
            rec.reason = Some(reason.clone());
        }
        AdmissibilityResult::Indeterminate { diagnostic, slope_at_min } => {
            rec.slope_at_zero = Some(*slope_at_min);
            rec.reason = Some(diagnostic.clone());
            run.warnings.push(format!("indeterminate at c = {c}: {diagnostic}"));
        }
    }
    run.finish("solve", rec)
}

#[derive(Serialize)]
struct VerdictRow<'a> {
    c: f64,
    verdict: &'a str,
}

#[derive(Serialize)]
struct BracketRow {
    c_lo: f64,
    c_hi: f64,
}

/// `c_star` and the bracket are null when bisection was refused.
#[derive(Serialize)]
struct SpeedRecord<'a> {
    c_star: Option<f64>,
    c_lo: Option<f64>,
    c_hi: Option<f64>,
    tol: f64,
    lowest_admissible: Option<f64>,
    bounds: &'a SpeedBounds,
    verdicts: Vec<VerdictRow<'a>>,
    bracket_history: Vec<BracketRow>,
}

fn speed(cli: &Cli, argv: &[String], path: &Path, tol: f64) -> Result<(), Failure> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Failure::new(USAGE, anyhow!("--tol must be positive, got {tol}")));
    }
    let (mut run, m) = Run::load(cli, argv, path)?;
    let stats = run.stats(&m)?;
    let search = match run
        .timings
        .time("bisection", || wave_speed::find_c_star(&m, &stats, tol))
    {
        Ok(s) => s,
        Err(e @ WaveSpeedError::Refused { .. }) => {
            // Bounds only; the admissible set need not be a half-line.
            let bounds = run.timings.time("bounds", || wave_speed::bounds_c_star(&m, &stats))?;
            run.warnings.push(e.to_string());
            let rec = SpeedRecord {
                c_star: None,
                c_lo: None,
                c_hi: None,
                tol,
                lowest_admissible: None,
                bounds: &bounds,
                verdicts: Vec::new(),
                bracket_history: Vec::new(),
            };
            run.emit("speed", rec, false)?;
            return Err(Failure::new(REFUSED, e));
        }
        Err(e) => return Err(e.into()),
    };
    run.warnings.extend(search.warnings.iter().cloned());
    let rec = SpeedRecord {
        c_star: Some(search.c_star),
        c_lo: Some(search.c_lo),
        c_hi: Some(search.c_hi),
        tol: search.tol,
        lowest_admissible: Some(search.lowest_admissible),
        bounds: &search.bounds,
        verdicts: search
            .history
            .iter()
            .map(|s| VerdictRow { c: s.c, verdict: &s.verdict })
            .collect(),
        bracket_history: search
            .history
            .iter()
            .map(|s| BracketRow { c_lo: s.c_lo, c_hi: s.c_hi })
            .collect(),
    };
    run.finish("speed", rec)
}

#[derive(Serialize)]
struct ProfileRecord {
    c: f64,
    #[serde(serialize_with = "extended")]
    a: f64,
    #[serde(serialize_with = "extended")]
    b: f64,
    a_kind: profile::EndpointKind,
    b_kind: profile::EndpointKind,
    sharp_at_zero: bool,
    sharp_at_one: bool,
    kinks: Vec<f64>,
    slope_at_a: Option<f64>,
    slope_at_b: Option<f64>,
    residual: f64,
    samples: usize,
    diagnostics: Vec<String>,
}

fn profile(cli: &Cli, argv: &[String], path: &Path, c: f64, grid: usize) -> Result<(), Failure> {
    let (mut run, m) = Run::load(cli, argv, path)?;
    let res = run
        .timings
        .time("solve", || bvp::solve_bvp(&m, c, &BvpOptions::default()))?;
    let Some(y) = res.solution() else {
        return Err(Failure::new(
            REFUSED,
            anyhow!("c = {c} is {}; a profile needs an admissible speed", res.label()),
        ));
    };
    let prof = run
        .timings
        .time("reconstruct", || profile::reconstruct(&m, y, &ZGrid::Uniform(grid)))?;
    let residual = run
        .timings
        .time("residual", || profile::residual_integral_form(&m, c, &prof));
    let rows = prof
        .samples
        .iter()
        .map(|s| vec![cell(s.z), cell(s.v), cell(s.phi_v)]);
    run.table("profile.csv", &["z", "v", "phi_v"], rows)?;
    let rec = ProfileRecord {
        c,
        a: prof.a_endpoint,
        b: prof.b_endpoint,
        a_kind: prof.a_kind,
        b_kind: prof.b_kind,
        sharp_at_zero: prof.sharp_at_zero,
        sharp_at_one: prof.sharp_at_one,
        kinks: prof.kink_points.clone(),
        slope_at_a: prof.slope_at_a,
        slope_at_b: prof.slope_at_b,
        residual,
        samples: prof.samples.len(),
        diagnostics: prof.diagnostics.clone(),
    };
    run.finish("profile", rec)
}

fn gamma_rows<'a>(name: &'static str, g: &'a GammaLimit) -> impl Iterator<Item = Vec<String>> + 'a {
    g.epsilons
        .iter()
        .zip(&g.values)
        .zip(&g.gaps)
        .map(move |((&e, &v), &gap)| vec![name.to_string(), cell(e), cell(v), cell(gap)])
}

fn reg_sweep(cli: &Cli, argv: &[String], path: &Path, eps: &[f64], c: Option<f64>) -> Result<(), Failure> {
    let (mut run, m) = Run::load(cli, argv, path)?;
    let ladder = (!eps.is_empty()).then_some(eps);
    let report = run.timings.time("sweep", || {
        regularization::regularization_report(&m, c, ladder, c.is_some())
    })?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    if let Some(h) = &report.inf_avg_h {
        rows.extend(gamma_rows("inf_avg_H", h));
        if !h.converged {
            run.warnings
                .push(format!("inf_avg_H: final gap {:e} exceeds {:e}", h.final_gap, h.tolerance));
        }
    }
    rows.extend(gamma_rows("sup_avg_psi", &report.sup_avg_psi));
    if !report.sup_avg_psi.converged {
        run.warnings.push(format!(
            "sup_avg_psi: final gap {:e} exceeds {:e}",
            report.sup_avg_psi.final_gap, report.sup_avg_psi.tolerance
        ));
    }
    if let Some(d) = &report.y_distance {
        for (&e, &v) in report.epsilons.iter().zip(d) {
            rows.push(vec!["y_distance".into(), cell(e), cell(v), String::new()]);
        }
        let lost = d.iter().filter(|v| v.is_nan()).count();
        if lost > 0 {
            run.warnings
                .push(format!("{lost} regularized solves were not admissible"));
        }
    }
    run.table("reg_sweep.csv", &["functional", "eps", "value", "gap"], rows)?;
    run.finish("reg_sweep", report)
}
