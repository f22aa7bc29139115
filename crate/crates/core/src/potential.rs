//! Optimal potentials for `−Δu + V u = f`.
//!
//! For the compliance cost the potential is eliminated: `ū` minimizes
//!
//! ```text
//! ∫ |∇u|² + ψ*(u²) − 2 f u
//! ```
//!
//! and `V_opt = (ψ*)'(ū²)`. General costs go through the adjoint state, and
//! the linear cost with a two-valued potential is handled by a monotone
//! descent fixed point on the switching set `{ū v > k}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convex::ConvexFunctionSpec;
use crate::energy::{minimize, GradientEnergy, NewtonOptions};
use crate::error::{Error, Result};
use crate::grid::{integrate, Grid, ScalarField};
use crate::linsolve::{assemble_schrodinger, solve_with, CgOptions, SolveReport};

#[derive(Debug, Clone)]
pub struct PotentialResult {
    pub u_bar: ScalarField,
    pub potential: ScalarField,
    pub adjoint: Option<ScalarField>,
    /// Value of the control problem at `(ū, V)`.
    pub cost: f64,
    pub report: SolveReport,
}

fn check_grid(grid: &Arc<Grid>, f: &ScalarField) -> Result<()> {
    if Arc::ptr_eq(f.grid(), grid) || **f.grid() == **grid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `(−Δ + V) u = f`.
pub fn solve_state(grid: &Arc<Grid>, v: &ScalarField, f: &ScalarField, tol: f64) -> Result<ScalarField> {
    check_grid(grid, v)?;
    let op = assemble_schrodinger(grid, v)?;
    Ok(solve_with(&op, f, &CgOptions::new(tol).jacobi())?.0)
}

/// `(−Δ + V) v = ∂_s j`.
pub fn solve_adjoint(grid: &Arc<Grid>, v: &ScalarField, rhs_sj: &ScalarField, tol: f64) -> Result<ScalarField> {
    solve_state(grid, v, rhs_sj, tol)
}

/// `ψ*(t)` and its first two derivatives, with `t ψ*''(t)` returned in
/// place of the second derivative so that `t = 0` stays finite.
fn conjugate_jet(psi: &ConvexFunctionSpec, t: f64) -> [f64; 3] {
    let t_d2 = if t > 0.0 { t * psi.conjugate_second_derivative(t) } else { 0.0 };
    [psi.conjugate(t), psi.conjugate_derivative(t), t_d2]
}

/// Discrete `∫ |∇u|² + ψ*(u²) − 2 f u`.
pub fn auxiliary_potential_energy(psi: &ConvexFunctionSpec, u: &ScalarField, f: &ScalarField) -> Result<f64> {
    u.check_same_grid(f)?;
    let fv = f.to_dofs();
    let value = potential_energy(u.grid(), psi, &fv).value(&u.to_dofs());
    Ok(value)
}

/// The eliminated energy minimized by [`solve_compliance_potential`].
pub fn potential_energy<'a>(grid: &Arc<Grid>, psi: &'a ConvexFunctionSpec, f: &'a [f64]) -> GradientEnergy<'a> {
    GradientEnergy::new(
        grid,
        |g| [g, 1.0, 0.0],
        move |i, u| {
            let [p0, p1, tp2] = conjugate_jet(psi, u * u);
            [p0 - 2.0 * f[i] * u, 2.0 * u * p1 - 2.0 * f[i], 2.0 * p1 + 4.0 * tp2]
        },
    )
}

/// Optimal potential for the compliance `∫ f u` plus `∫ ψ(V)`.
///
/// `ψ` must be superlinear. Newton on the eliminated problem is tried
/// first; if its line search stalls, damped Picard iteration on
/// `(−Δ + (ψ*)'(u²)) u = f` takes over.
pub fn solve_compliance_potential(
    grid: &Arc<Grid>,
    f: &ScalarField,
    psi: &ConvexFunctionSpec,
    tol: f64,
) -> Result<PotentialResult> {
    psi.validate()?;
    if !psi.is_superlinear() {
        return Err(Error::param("psi", format!("{psi:?} is not superlinear")));
    }
    check_grid(grid, f)?;
    let fv = f.to_dofs();
    let h2 = grid.h() * grid.h();
    let scale = 2.0 * h2 * fv.iter().map(|v| v * v).sum::<f64>().sqrt();

    let (u, mut report) = if scale == 0.0 {
        let report = SolveReport { iterations: 0, final_residual: 0.0, objective: None, converged: true };
        (vec![0.0; grid.dof_count()], report)
    } else {
        let energy = potential_energy(grid, psi, &fv);
        let opts = NewtonOptions { tol, scale, max_iter: 200 };
        match minimize(&energy, vec![0.0; grid.dof_count()], &opts, "potential auxiliary problem") {
            Ok((u, trace)) => {
                let report = SolveReport {
                    iterations: trace.iterations,
                    final_residual: trace.gradient_norm / scale,
                    objective: None,
                    converged: true,
                };
                (u, report)
            }
            Err(Error::LineSearch { .. }) | Err(Error::NotConverged { .. }) => picard(grid, f, psi, tol)?,
            Err(e) => return Err(e),
        }
    };

    let u_bar = ScalarField::from_dofs(grid, &u);
    let potential = u_bar.map(|u| psi.conjugate_derivative(u * u));
    let cost = f.dot(&u_bar)? + integrate(&potential.map(|v| psi.value(v)));
    report.objective = Some(auxiliary_potential_energy(psi, &u_bar, f)?);
    Ok(PotentialResult { u_bar, potential, adjoint: None, cost, report })
}

fn picard(grid: &Arc<Grid>, f: &ScalarField, psi: &ConvexFunctionSpec, tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    let mut u = ScalarField::zeros(grid);
    for it in 1..=1000 {
        let v = u.map(|u| psi.conjugate_derivative(u * u));
        let next = solve_state(grid, &v, f, 0.01 * tol)?;
        let change = next.zip_map(&u, |a, b| a - b)?.l2_norm();
        let size = next.l2_norm().max(f64::MIN_POSITIVE);
        u = next.zip_map(&u, |a, b| 0.5 * (a + b))?;
        if change <= tol * size {
            let report = SolveReport { iterations: it, final_residual: change / size, objective: None, converged: true };
            return Ok((u.to_dofs(), report));
        }
    }
    Err(Error::NotConverged {
        what: "potential Picard iteration",
        report: SolveReport { iterations: 1000, final_residual: f64::NAN, objective: None, converged: false },
    })
}

/// Pointwise residuals of `ū v ∈ ∂ψ(V)` and `h₋(ū v) ≤ V ≤ h(ū v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialOptimality {
    /// `max |ψ(V) + ψ*(ū v) − V ū v|` over interior nodes.
    pub fenchel_residual: f64,
    /// `max (h₋(ū v) − V)₊ ∨ (V − h(ū v))₊`.
    pub h_violation: f64,
}

pub fn check_optimality_potential(
    u_bar: &ScalarField,
    v: &ScalarField,
    potential: &ScalarField,
    psi: &ConvexFunctionSpec,
) -> Result<PotentialOptimality> {
    u_bar.check_same_grid(v)?;
    u_bar.check_same_grid(potential)?;
    let mut out = PotentialOptimality { fenchel_residual: 0.0, h_violation: 0.0 };
    for &n in u_bar.grid().interior_nodes() {
        let t = u_bar.get(n) * v.get(n);
        let pot = potential.get(n);
        let r = psi.fenchel_residual(pot, t);
        out.fenchel_residual = out.fenchel_residual.max(if r.is_nan() { f64::INFINITY } else { r.abs() });
        let (lo, hi) = (psi.h_minus(t), psi.h(t));
        let violation = if lo.is_nan() || hi.is_nan() { f64::INFINITY } else { (lo - pot).max(pot - hi).max(0.0) };
        out.h_violation = out.h_violation.max(violation);
    }
    Ok(out)
}

/// Damping schedule of [`solve_bangbang_potential`].
#[derive(Debug, Clone, Copy)]
pub struct BangBangOptions {
    pub theta: f64,
    pub min_theta: f64,
    pub max_iter: usize,
}

impl Default for BangBangOptions {
    fn default() -> Self {
        BangBangOptions { theta: 0.5, min_theta: 1.0 / 1024.0, max_iter: 200 }
    }
}

/// `∫ (u + k V)`.
pub fn bangbang_cost(u: &ScalarField, potential: &ScalarField, k: f64) -> f64 {
    integrate(u) + k * integrate(potential)
}

/// Minimizes `∫ (u + k V)` over potentials `α ≤ V ≤ β`.
pub fn solve_bangbang_potential(
    grid: &Arc<Grid>,
    f: &ScalarField,
    alpha: f64,
    beta: f64,
    k: f64,
    tol: f64,
) -> Result<PotentialResult> {
    solve_bangbang_potential_with(grid, f, alpha, beta, k, tol, &BangBangOptions::default())
}

/// Starting from the cheaper constant potential, each step solves the state
/// and the adjoint `(−Δ + V) v = 1`, builds the switching target
/// `V* = β on {u v > k}, α elsewhere`, and moves toward it: the full step if
/// it lowers the cost, otherwise the largest damped step `V + θ(V* − V)`
/// that does. The iteration stops when the target equals the iterate.
/// If no damped step lowers the cost, or after the iteration cap, the last
/// iterate is returned with `converged = false`.
pub fn solve_bangbang_potential_with(
    grid: &Arc<Grid>,
    f: &ScalarField,
    alpha: f64,
    beta: f64,
    k: f64,
    tol: f64,
    opts: &BangBangOptions,
) -> Result<PotentialResult> {
    if !(alpha >= 0.0 && alpha < beta && beta.is_finite()) {
        return Err(Error::param("alpha/beta", format!("need 0 <= alpha < beta, got {alpha}, {beta}")));
    }
    if !(k >= 0.0) {
        return Err(Error::param("k", format!("must be nonnegative, got {k}")));
    }
    check_grid(grid, f)?;
    if let Some(&n) = grid.interior_nodes().iter().find(|&&n| f.get(n) < 0.0) {
        return Err(Error::Negative { what: "source", value: f.get(n), index: n });
    }
    let ones = ScalarField::constant(grid, 1.0);
    let evaluate = |v: &ScalarField| -> Result<(ScalarField, f64)> {
        let u = solve_state(grid, v, f, tol)?;
        let c = bangbang_cost(&u, v, k);
        Ok((u, c))
    };

    let low = ScalarField::constant(grid, alpha);
    let high = ScalarField::constant(grid, beta);
    let (u_low, c_low) = evaluate(&low)?;
    let (u_high, c_high) = evaluate(&high)?;
    let (mut v, mut u, mut cost) = if c_high < c_low { (high, u_high, c_high) } else { (low, u_low, c_low) };

    let mut converged = false;
    let mut iterations = 0;
    let mut adjoint = solve_adjoint(grid, &v, &ones, tol)?;
    while iterations < opts.max_iter {
        let target = u.zip_map(&adjoint, |u, w| if u * w > k { beta } else { alpha })?;
        if grid.interior_nodes().iter().all(|&n| target.get(n) == v.get(n)) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = None;
        let mut theta = 1.0;
        while theta >= opts.min_theta {
            let trial = v.zip_map(&target, |a, b| a + theta * (b - a))?;
            let (ut, ct) = evaluate(&trial)?;
            if ct < cost {
                accepted = Some((trial, ut, ct));
                break;
            }
            theta = if theta == 1.0 { opts.theta } else { 0.5 * theta };
        }
        let Some((nv, nu, nc)) = accepted else { break };
        v = nv;
        u = nu;
        cost = nc;
        adjoint = solve_adjoint(grid, &v, &ones, tol)?;
    }

    let report = SolveReport { iterations, final_residual: 0.0, objective: Some(cost), converged };
    Ok(PotentialResult { u_bar: u, potential: v, adjoint: Some(adjoint), cost, report })
}
