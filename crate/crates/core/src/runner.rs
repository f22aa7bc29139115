//! Configuration-driven experiments: solve, export fields, write a summary
//! and evaluate the attached check.

pub mod config;
pub mod expr;
pub mod presets;

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coefficient::{
    compliance, gclosure_contains_tsearch, lens_contains, solve_auxiliary_power, solve_two_phase_with,
    CoefficientResult, Continuation, EigenPairCandidate,
};
use crate::error::{Error, Result};
use crate::grid::{integrate, integrate_cells, Grid, ScalarField};
use crate::io::{save_cell_field, save_field};
use crate::linsolve::Resolvent;
use crate::potential::{bangbang_cost, solve_bangbang_potential, solve_compliance_potential, solve_state};
use crate::source::{perimeter, solve_compliance_source, solve_eigen_source};

pub use config::{Check, ExperimentConfig, Problem, Shape, Source};
pub use presets::{find as find_preset, Preset, PRESETS};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "ELLOPT_OUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub passed: bool,
    pub detail: String,
}

/// Ordered `key = value` lines plus the optional check verdict.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    entries: Vec<(String, String)>,
    pub check: Option<CheckOutcome>,
}

/// Summary values; floats use the shortest exact decimal, switching to
/// scientific notation outside `[1e-3, 1e6)`.
trait SummaryValue {
    fn render(&self) -> String;
}

impl SummaryValue for f64 {
    fn render(&self) -> String {
        let a = self.abs();
        if a == 0.0 || (1e-3..1e6).contains(&a) || !self.is_finite() {
            self.to_string()
        } else {
            format!("{self:e}")
        }
    }
}

impl SummaryValue for usize {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl SummaryValue for bool {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl SummaryValue for &str {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl Summary {
    fn put(&mut self, key: &str, value: impl SummaryValue) {
        self.entries.push((key.to_string(), value.render()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn verdict(&mut self, passed: bool, detail: String) {
        self.check = Some(CheckOutcome { passed, detail });
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        if let Some(c) = &self.check {
            writeln!(f, "check = {} {}", if c.passed { "PASS" } else { "FAIL" }, c.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub dir: PathBuf,
    pub summary: Summary,
    /// False when a solver returned its last iterate without converging.
    pub converged: bool,
}

impl RunOutcome {
    /// 0 on success, 1 when the attached check fails, 3 on non-convergence.
    pub fn exit_code(&self) -> i32 {
        if !self.converged {
            3
        } else if self.summary.check.as_ref().is_some_and(|c| !c.passed) {
            1
        } else {
            0
        }
    }
}

/// 2 for configuration errors, 3 for solver failures, 4 for I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NotConverged { .. } | Error::LineSearch { .. } | Error::Bracket(_) => 3,
        Error::Io(_) => 4,
        _ => 2,
    }
}

/// Output root: `ELLOPT_OUT_DIR` if set, else `./ellopt-out`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("ellopt-out"), PathBuf::from)
}

pub fn output_dir(config: &ExperimentConfig, root: &Path) -> PathBuf {
    config.output.clone().unwrap_or_else(|| root.join(&config.name))
}

fn fmt_check(name: &str, value: f64, limit: f64) -> String {
    format!("{name}={value:.4e}(<={limit})")
}

/// Validates, solves, writes `<field>.csv`/`.vtk`, `config.toml` and
/// `summary.txt` into the output directory.
pub fn run(config: &ExperimentConfig, out_root: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let grid = Grid::build(config.domain.clone(), config.h)?;
    let dir = output_dir(config, out_root);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), config.to_toml()?)?;

    let mut summary = Summary::default();
    summary.put("name", config.name.as_str());
    summary.put("problem", config.problem.kind());
    summary.put("h", config.h);
    summary.put("tol", config.tol);
    summary.put("interior_nodes", grid.dof_count());
    let tol = config.tol;
    let mut converged = true;

    match &config.problem {
        Problem::CoefficientPower { p, f } => {
            let load = f.load(&grid)?;
            let res = solve_auxiliary_power(&grid, &load, *p, tol)?;
            coefficient_outputs(&res, &dir, &mut summary)?;
            if let Ok(c) = compliance(&grid, &res.a_opt, &load, tol) {
                summary.put("compliance", c);
            }
            match &config.check {
                Some(Check::PowerClosedForm { u_tol, a_tol, a_min_radius }) => {
                    let (eu, ea) = power_closed_form_errors(&res, *p, *a_min_radius);
                    summary.put("u_error", eu);
                    summary.put("a_opt_error", ea);
                    summary.verdict(
                        eu <= *u_tol && ea <= *a_tol,
                        format!("{} {}", fmt_check("u_error", eu, *u_tol), fmt_check("a_opt_error", ea, *a_tol)),
                    );
                }
                Some(Check::DiracClosedForm { tol: t, r_min, r_max }) => {
                    let e = dirac_closed_form_error(&res.u_bar, *p, *r_min, *r_max);
                    summary.put("u_error", e);
                    summary.verdict(e <= *t, fmt_check("u_error", e, *t));
                }
                _ => {}
            }
        }
        Problem::CoefficientTwoPhase { alpha, beta, f, eps_final } => {
            let cont = Continuation { eps_final: *eps_final, ..Continuation::default() };
            let res = solve_two_phase_with(&grid, &f.field(&grid)?, *alpha, *beta, tol, &cont)?;
            coefficient_outputs(&res, &dir, &mut summary)?;
            let mid = 0.5 * (alpha + beta);
            summary.put("beta_phase_area", integrate_cells(&res.a_opt.map(|a| f64::from(u8::from(a > mid)))));
        }
        Problem::PotentialCompliance { psi, f } => {
            let f = f.field(&grid)?;
            let res = solve_compliance_potential(&grid, &f, psi, tol)?;
            save_field(&res.u_bar, &dir, "u")?;
            save_field(&res.potential, &dir, "V")?;
            summary.put("cost", res.cost);
            put_report(&mut summary, &res.report);
            let relinearized = solve_state(&grid, &res.potential, &f, 1e-3 * tol)?;
            let diff = relinearized.zip_map(&res.u_bar, |a, b| a - b)?.l2_norm();
            let rel = diff / res.u_bar.l2_norm().max(f64::MIN_POSITIVE);
            summary.put("self_consistency", rel);
            if let Some(Check::SelfConsistency { tol: t }) = &config.check {
                summary.verdict(rel <= *t, fmt_check("self_consistency", rel, *t));
            }
        }
        Problem::PotentialBangbang { alpha, beta, k, f } => {
            let f = f.field(&grid)?;
            let res = solve_bangbang_potential(&grid, &f, *alpha, *beta, *k, tol)?;
            converged = res.report.converged;
            save_field(&res.u_bar, &dir, "u")?;
            save_field(&res.potential, &dir, "V")?;
            if let Some(v) = &res.adjoint {
                save_field(v, &dir, "v")?;
            }
            let constant_cost = |c: f64| -> Result<f64> {
                let v = ScalarField::constant(&grid, c);
                Ok(bangbang_cost(&solve_state(&grid, &v, &f, tol)?, &v, *k))
            };
            let (c_alpha, c_beta) = (constant_cost(*alpha)?, constant_cost(*beta)?);
            let delta = 1e-6;
            let mixed = integrate(&res.potential.map(|v| f64::from(u8::from(v > alpha + delta && v < beta - delta))));
            let high = res.potential.map(|v| f64::from(u8::from(v == *beta)));
            summary.put("cost", res.cost);
            summary.put("cost_alpha", c_alpha);
            summary.put("cost_beta", c_beta);
            summary.put("mixed_measure", mixed);
            summary.put("beta_area", integrate(&high));
            summary.put("beta_perimeter", perimeter(&high)?);
            put_report(&mut summary, &res.report);
            if let Some(Check::BangBang { purity }) = &config.check {
                let limit = purity * grid.measure();
                let best = c_alpha.min(c_beta);
                summary.verdict(
                    mixed <= limit && res.cost <= best + tol,
                    format!("{} cost={:.6e}(<={best:.6e})", fmt_check("mixed_measure", mixed, limit), res.cost),
                );
            }
        }
        Problem::SourceCompliance { alpha, beta, m } => {
            let res = solve_compliance_source(&grid, *alpha, *beta, *m, tol)?;
            save_field(&res.f_opt, &dir, "f")?;
            save_field(&res.u, &dir, "u")?;
            save_field(&res.indicator, &dir, "indicator")?;
            let layer = beta * config.h * res.perimeter;
            summary.put("s_threshold", res.s_threshold);
            summary.put("volume", res.volume);
            summary.put("area_E", res.area);
            summary.put("perimeter_E", res.perimeter);
            summary.put("volume_layer", layer);
            summary.put("convexity_defect_complement", res.convexity_defect);
            summary.put("convexity_defect_E", res.convexity_defect_e);
            summary.put("bisection_steps", res.history.len());
            put_report(&mut summary, &res.report);
            if let Some(Check::VolumeLayer { max_defect }) = &config.check {
                let gap = (res.volume - m).abs();
                // With α = 0 the set expected to be convex is the α set.
                let defect_ok = *alpha > 0.0 || res.convexity_defect <= *max_defect;
                summary.verdict(
                    gap <= layer && defect_ok,
                    format!(
                        "{} {}",
                        fmt_check("volume_gap", gap, layer),
                        fmt_check("convexity_defect", res.convexity_defect, *max_defect)
                    ),
                );
            }
        }
        Problem::SourceEigen { m } => {
            let res = solve_eigen_source(&grid, *m, tol)?;
            let u = Resolvent::new(&grid, 1e-3 * tol)?.apply(&res.f)?;
            save_field(&res.f, &dir, "f")?;
            save_field(&u, &dir, "u")?;
            summary.put("lambda", res.lambda);
            summary.put("mu1", res.mu);
            summary.put("objective", res.objective);
            summary.put("lambda_m", res.lambda * m);
            summary.put("f_norm_sq", integrate(&res.f.map(|v| v * v)));
            put_report(&mut summary, &res.report);
            match &config.check {
                Some(Check::EigenSourceLambda { expected, rel_tol }) => {
                    let rel = (res.lambda / expected - 1.0).abs();
                    summary.verdict(rel <= *rel_tol, fmt_check("lambda_rel_error", rel, *rel_tol));
                }
                Some(Check::FirstEigenvalue { expected, rel_tol }) => {
                    let rel = (res.mu / expected - 1.0).abs();
                    summary.verdict(rel <= *rel_tol, fmt_check("mu1_rel_error", rel, *rel_tol));
                }
                _ => {}
            }
        }
        Problem::GclosureScan { alpha, beta, samples, seed } => {
            let (agree, inside, table) = gclosure_scan(*alpha, *beta, *samples, *seed)?;
            fs::write(dir.join("gclosure.csv"), table)?;
            summary.put("samples", *samples);
            summary.put("agreements", agree);
            summary.put("inside", inside);
            if let Some(Check::GclosureAgreement) = &config.check {
                summary.verdict(agree == *samples, format!("agreement={agree}/{samples}"));
            }
        }
    }
    fs::write(dir.join("summary.txt"), summary.to_string())?;
    Ok(RunOutcome { name: config.name.clone(), dir, summary, converged })
}

fn put_report(summary: &mut Summary, report: &crate::linsolve::SolveReport) {
    summary.put("iterations", report.iterations);
    summary.put("final_residual", report.final_residual);
    summary.put("converged", report.converged);
}

fn coefficient_outputs(res: &CoefficientResult, dir: &Path, summary: &mut Summary) -> Result<()> {
    save_field(&res.u_bar, dir, "u")?;
    save_cell_field(&res.a_opt, dir, "a_opt")?;
    let residual = res.fenchel_residual();
    let worst = res.u_bar.grid().active_cells().iter().map(|&c| residual.get(c).abs()).fold(0.0, f64::max);
    summary.put("energy", res.energy);
    summary.put("penalty", res.penalty());
    summary.put("max_fenchel_residual", worst);
    put_report(summary, &res.report);
    Ok(())
}

/// Radial solution for `f ≡ 1` on the unit disk in two dimensions.
pub fn power_closed_form(p: f64, r: f64) -> (f64, f64) {
    let d: f64 = 2.0;
    let c = (p + 1.0) / (2.0 * p * d.powf((p - 1.0) / (p + 1.0)));
    let e = 2.0 * p / (p + 1.0);
    let u = c * (1.0 - r.powf(e));
    let grad = c * e * r.powf(e - 1.0);
    (u, grad.powf(2.0 / (p - 1.0)))
}

/// `A_p (1 − |x|^{2/(p+1)})` for a unit point mass at the origin.
pub fn dirac_closed_form(p: f64, r: f64) -> f64 {
    let a = 0.5 * (p + 1.0) * (2.0 * std::f64::consts::PI).powf((1.0 - p) / (1.0 + p));
    a * (1.0 - r.powf(2.0 / (p + 1.0)))
}

fn radius(p: [f64; 2]) -> f64 {
    p[0].hypot(p[1])
}

/// Sup error of `ū` over `max ū`, and pointwise relative error of `a_opt`
/// on active cells with `|x| ≥ r_min`.
fn power_closed_form_errors(res: &CoefficientResult, p: f64, r_min: f64) -> (f64, f64) {
    let grid = res.u_bar.grid();
    let (mut eu, mut umax) = (0.0_f64, 0.0_f64);
    for &n in grid.interior_nodes() {
        let (u, _) = power_closed_form(p, radius(grid.position(n)));
        eu = eu.max((res.u_bar.get(n) - u).abs());
        umax = umax.max(u);
    }
    let ea = grid
        .active_cells()
        .iter()
        .map(|&c| (radius(grid.cell_center(c)), c))
        .filter(|&(r, _)| r >= r_min && r < 1.0)
        .map(|(r, c)| {
            let a = power_closed_form(p, r).1;
            (res.a_opt.get(c) - a).abs() / a
        })
        .fold(0.0, f64::max);
    (eu / umax, ea)
}

fn dirac_closed_form_error(u: &ScalarField, p: f64, r_min: f64, r_max: f64) -> f64 {
    let grid = u.grid();
    grid.interior_nodes()
        .iter()
        .map(|&n| (radius(grid.position(n)), n))
        .filter(|&(r, _)| (r_min..=r_max).contains(&r))
        .map(|(r, n)| {
            let exact = dirac_closed_form(p, r);
            (u.get(n) - exact).abs() / exact
        })
        .fold(0.0, f64::max)
}

/// Returns `(agreements, inside count, CSV table)`.
fn gclosure_scan(alpha: f64, beta: f64, samples: usize, seed: u64) -> Result<(usize, usize, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut agree, mut inside) = (0, 0);
    let mut table = String::from("x,y,value\n");
    for _ in 0..samples {
        let l = [rng.gen_range(alpha..=beta), rng.gen_range(alpha..=beta)];
        let cand = EigenPairCandidate::new(l.to_vec(), alpha, beta);
        let lens = lens_contains(&cand);
        agree += usize::from(lens == gclosure_contains_tsearch(&cand));
        inside += usize::from(lens);
        writeln!(table, "{},{},{}", l[0], l[1], u8::from(lens)).map_err(|e| Error::Parse(e.to_string()))?;
    }
    Ok((agree, inside, table))
}
