//! Optimal diffusion coefficients.
//!
//! Compliance minimization over coefficients `a ≥ 0` with penalty `∫ψ(a)` is
//! solved through its conjugate auxiliary problem
//!
//! ```text
//! min_u  ∫ ψ*(|∇u|²) dx − 2 ∫ u df
//! ```
//!
//! after which the coefficient is read off from the Fenchel equality,
//! `a = (ψ*)'(|∇ū|²)`.

use std::sync::Arc;

use crate::convex::{ConvexFunctionSpec, SmoothedKink};
use crate::energy::{minimize, GradientEnergy, Jet, NewtonOptions};
use crate::error::{Error, Result};
use crate::grid::{grad_sq, integrate_cells, CellField, Grid, ScalarField};
use crate::linsolve::{assemble_diffusion, solve_with, CgOptions, Coefficient, SolveReport};

mod gclosure;

pub use gclosure::{gclosure_contains, gclosure_contains_tsearch, lens_contains, EigenPairCandidate};

/// Right-hand side of the state equation: a grid function or a point mass.
#[derive(Debug, Clone)]
pub enum Load {
    Field(ScalarField),
    /// `weight · δ_at`, lumped onto the nearest node as `weight / h²`.
    PointMass { at: [f64; 2], weight: f64 },
}

impl Load {
    /// Per-unknown nodal density `f_i` with `∫ u df ≈ h² Σ f_i u_i`.
    pub fn nodal(&self, grid: &Arc<Grid>) -> Result<Vec<f64>> {
        match self {
            Load::Field(f) => {
                if **f.grid() != **grid {
                    return Err(Error::GridMismatch);
                }
                Ok(f.to_dofs())
            }
            Load::PointMass { at, weight } => {
                let node = grid.nearest_node(*at).ok_or_else(|| {
                    Error::param("point_mass", format!("{at:?} is not near an interior node"))
                })?;
                let mut f = vec![0.0; grid.dof_count()];
                f[grid.dof(node)] = weight / (grid.h() * grid.h());
                Ok(f)
            }
        }
    }

    pub fn field(&self, grid: &Arc<Grid>) -> Result<ScalarField> {
        Ok(ScalarField::from_dofs(grid, &self.nodal(grid)?))
    }
}

/// Regularization schedule: `ε` runs from `eps_start` down to `eps_final`,
/// divided by `factor` at each level.
#[derive(Debug, Clone, Copy)]
pub struct Continuation {
    pub eps_start: f64,
    pub eps_final: f64,
    pub factor: f64,
    pub max_newton: usize,
}

impl Default for Continuation {
    fn default() -> Self {
        Continuation {
            eps_start: 1e-1,
            eps_final: 1e-6,
            factor: 10.0,
            max_newton: 200,
        }
    }
}

impl Continuation {
    fn levels(&self) -> Vec<f64> {
        let mut eps = vec![self.eps_start];
        while *eps.last().unwrap() > self.eps_final * (1.0 + 1e-9) {
            eps.push((eps.last().unwrap() / self.factor).max(self.eps_final));
        }
        eps
    }
}

#[derive(Debug, Clone)]
pub struct CoefficientResult {
    pub u_bar: ScalarField,
    /// Cell-centered optimal coefficient (zero outside the active cells).
    pub a_opt: CellField,
    /// Unregularized auxiliary objective at `ū`.
    pub energy: f64,
    pub report: SolveReport,
    pub psi: ConvexFunctionSpec,
    /// Accepted-step energies at each continuation level, as `(ε, history)`.
    pub history: Vec<(f64, Vec<f64>)>,
}

impl CoefficientResult {
    /// Per-cell `ψ(a) + ψ*(|∇ū|²) − a |∇ū|²`.
    pub fn fenchel_residual(&self) -> CellField {
        let g = grad_sq(&self.u_bar);
        let mut out = CellField::zeros(self.u_bar.grid());
        for &c in self.u_bar.grid().active_cells() {
            out.set(c, self.psi.fenchel_residual(self.a_opt.get(c), g.get(c)));
        }
        out
    }

    /// `∫ ψ(a_opt)`.
    pub fn penalty(&self) -> f64 {
        integrate_cells(&self.a_opt.map(|a| self.psi.value(a)))
    }
}

/// Unregularized auxiliary objective `h² Σ ψ*(G_c) − 2 h² Σ f_i u_i`.
pub fn auxiliary_energy(psi: &ConvexFunctionSpec, u: &ScalarField, f_nodal: &[f64]) -> f64 {
    let grid = u.grid();
    let g = grad_sq(u);
    let cells = integrate_cells(&g.map(|t| psi.conjugate(t)));
    let h2 = grid.h() * grid.h();
    let load: f64 = u.to_dofs().iter().zip(f_nodal).map(|(u, f)| u * f).sum();
    cells - 2.0 * h2 * load
}

/// `h² Σ w_c Φ(G_c) − 2 h² Σ f_i u_i` for a cell density `Φ`.
fn load_energy<'a>(grid: &Arc<Grid>, f: &'a [f64], density: impl Fn(f64) -> Jet + 'a) -> GradientEnergy<'a> {
    GradientEnergy::new(grid, density, move |i, x| [-2.0 * f[i] * x, -2.0 * f[i], 0.0])
}

/// Regularized auxiliary energy for `ψ(s) = s^p/p` at smoothing `eps`,
/// with `f` given per unknown.
pub fn power_energy<'a>(grid: &Arc<Grid>, f: &'a [f64], p: f64, eps: f64) -> GradientEnergy<'a> {
    let psi = ConvexFunctionSpec::PowerOverP { p };
    load_energy(grid, f, move |g| {
        let t = g + eps * eps;
        [psi.conjugate(t), psi.conjugate_derivative(t), psi.conjugate_second_derivative(t)]
    })
}

/// Smoothed two-phase auxiliary energy with kink half-width `eps`.
pub fn two_phase_energy<'a>(grid: &Arc<Grid>, f: &'a [f64], alpha: f64, beta: f64, eps: f64) -> GradientEnergy<'a> {
    let kink = SmoothedKink { alpha, beta, k: 1.0, eps };
    load_energy(grid, f, move |g| kink.eval(g))
}

/// Accepted-step energies per continuation level.
type EnergyHistory = Vec<(f64, Vec<f64>)>;

fn run_continuation<'a>(
    grid: &Arc<Grid>,
    f: &'a [f64],
    tol: f64,
    cont: &Continuation,
    what: &'static str,
    energy_at: impl Fn(f64) -> GradientEnergy<'a>,
) -> Result<(Vec<f64>, SolveReport, EnergyHistory)> {
    let h2 = grid.h() * grid.h();
    let scale = 2.0 * h2 * f.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut u = vec![0.0; grid.dof_count()];
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut final_residual = 0.0;
    if scale == 0.0 {
        let report = SolveReport {
            iterations: 0,
            final_residual: 0.0,
            objective: None,
            converged: true,
        };
        return Ok((u, report, history));
    }
    let levels = cont.levels();
    for (k, &eps) in levels.iter().enumerate() {
        let energy = energy_at(eps);
        let level_tol = if k + 1 == levels.len() { tol } else { tol.max(1e-6) };
        let opts = NewtonOptions {
            tol: level_tol,
            scale,
            max_iter: cont.max_newton,
        };
        let (next, trace) = minimize(&energy, u, &opts, what)?;
        u = next;
        iterations += trace.iterations;
        final_residual = trace.gradient_norm / scale;
        history.push((eps, trace.energies));
    }
    let report = SolveReport {
        iterations,
        final_residual,
        objective: None,
        converged: true,
    };
    Ok((u, report, history))
}

/// Optimal coefficient for `ψ(s) = s^p/p`: minimizes
/// `∫ (p−1)/p |∇u|^{2p/(p−1)} − 2 ∫ u df` with `|∇u|² → |∇u|² + ε²`
/// continuation, then sets `a_opt = |∇ū|^{2/(p−1)}`.
pub fn solve_auxiliary_power(grid: &Arc<Grid>, f: &Load, p: f64, tol: f64) -> Result<CoefficientResult> {
    solve_auxiliary_power_with(grid, f, p, tol, &Continuation::default())
}

pub fn solve_auxiliary_power_with(
    grid: &Arc<Grid>,
    f: &Load,
    p: f64,
    tol: f64,
    cont: &Continuation,
) -> Result<CoefficientResult> {
    let psi = ConvexFunctionSpec::PowerOverP { p };
    psi.validate()?;
    let f = f.nodal(grid)?;
    let (u, mut report, history) =
        run_continuation(grid, &f, tol, cont, "power auxiliary problem", |eps| power_energy(grid, &f, p, eps))?;
    let u_bar = ScalarField::from_dofs(grid, &u);
    let a_opt = grad_sq(&u_bar).map(|t| psi.conjugate_derivative(t));
    let energy = auxiliary_energy(&psi, &u_bar, &f);
    report.objective = Some(energy);
    Ok(CoefficientResult {
        u_bar,
        a_opt,
        energy,
        report,
        psi,
        history,
    })
}

/// Two-phase optimal coefficient, `ψ(s) = s` on `[alpha, beta]`: minimizes
/// `∫ (|∇u|² − 1)(β 1_{|∇u|>1} + α 1_{|∇u|<1}) − 2 f u` with the kink at
/// `|∇u|² = 1` smoothed over a band of half-width `ε`.
///
/// Off the band the coefficient is `α` or `β`; inside it is the derivative
/// of the smoothed conjugate, which minimizes the smoothed Fenchel gap over
/// `[α, β]` cell by cell.
pub fn solve_two_phase(
    grid: &Arc<Grid>,
    f: &ScalarField,
    alpha: f64,
    beta: f64,
    tol: f64,
) -> Result<CoefficientResult> {
    solve_two_phase_with(grid, f, alpha, beta, tol, &Continuation::default())
}

pub fn solve_two_phase_with(
    grid: &Arc<Grid>,
    f: &ScalarField,
    alpha: f64,
    beta: f64,
    tol: f64,
    cont: &Continuation,
) -> Result<CoefficientResult> {
    if !(alpha > 0.0 && alpha < beta && beta.is_finite()) {
        return Err(Error::param("alpha/beta", format!("need 0 < alpha < beta, got {alpha}, {beta}")));
    }
    let psi = ConvexFunctionSpec::LinearOnInterval { alpha, beta, k: 1.0 };
    let fv = Load::Field(f.clone()).nodal(grid)?;
    let smooth = move |eps: f64| SmoothedKink { alpha, beta, k: 1.0, eps };
    let (u, mut report, history) = run_continuation(grid, &fv, tol, cont, "two-phase auxiliary problem", |eps| {
        two_phase_energy(grid, &fv, alpha, beta, eps)
    })?;
    let u_bar = ScalarField::from_dofs(grid, &u);
    let eps_final = history.last().map_or(cont.eps_final, |(e, _)| *e);
    let a_opt = grad_sq(&u_bar).map(|g| smooth(eps_final).eval(g)[1]);
    let energy = auxiliary_energy(&psi, &u_bar, &fv);
    report.objective = Some(energy);
    Ok(CoefficientResult {
        u_bar,
        a_opt,
        energy,
        report,
        psi,
        history,
    })
}

/// State of `−div(a∇u) = f` together with its compliance `∫ f u`.
pub fn compliance_state(grid: &Arc<Grid>, a: &CellField, f: &Load, tol: f64) -> Result<(f64, ScalarField)> {
    if let Some(&c) = grid.active_cells().iter().find(|&&c| !(a.get(c) > 0.0)) {
        return Err(Error::param("a", format!("must be positive on active cells, got {} at cell {c}", a.get(c))));
    }
    let op = assemble_diffusion(grid, Coefficient::Cells(a))?;
    let load = f.field(grid)?;
    let (u, _) = solve_with(&op, &load, &CgOptions::new(tol).jacobi())?;
    Ok((load.dot(&u)?, u))
}

/// `C(a) = ∫ f u_a`.
pub fn compliance(grid: &Arc<Grid>, a: &CellField, f: &Load, tol: f64) -> Result<f64> {
    compliance_state(grid, a, f, tol).map(|(c, _)| c)
}

/// Discrete `∫ ½ a |∇u|² − f u`; at the state `u_a` this is `E(a) = −C(a)/2`.
pub fn diffusion_energy(a: &CellField, f: &Load, u: &ScalarField) -> Result<f64> {
    let grid = u.grid();
    let g = grad_sq(u);
    let mut quad = CellField::zeros(grid);
    for &c in grid.active_cells() {
        quad.set(c, 0.5 * a.get(c) * g.get(c));
    }
    let fv = f.nodal(grid)?;
    let h2 = grid.h() * grid.h();
    let load: f64 = u.to_dofs().iter().zip(&fv).map(|(u, f)| u * f).sum();
    Ok(integrate_cells(&quad) - h2 * load)
}
