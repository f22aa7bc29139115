//! Optimal sources `f` for `−Δu = f`, and diagnostics for the sets they
//! switch on.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::convex::{ConvexFunctionSpec, SmoothedKink};
use crate::energy::{minimize, GradientEnergy, NewtonOptions};
use crate::error::{Error, Result};
use crate::grid::{integrate, Grid, ScalarField};
use crate::linsolve::{smallest_eigenpair, Resolvent, SolveReport};

/// `w = R(∂_s j) + ∂_z j`.
pub fn compute_w(resolvent: &Resolvent, ds_j: &ScalarField, dz_j: &ScalarField) -> Result<ScalarField> {
    resolvent.apply(ds_j)?.zip_map(dz_j, |a, b| a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    LambdaZero,
    LambdaPositive,
}

#[derive(Debug, Clone)]
pub struct OptimalityReport {
    pub w: ScalarField,
    /// NaN when no multiplier saturating the constraint could be bracketed.
    pub lambda: f64,
    pub branch: Branch,
    pub max_residual: f64,
    /// `∫ ψ(f)`.
    pub constraint_value: f64,
}

/// Worst violation of the `λ = 0` sign and saturation conditions.
fn lambda_zero_residual(f: &ScalarField, psi: &ConvexFunctionSpec, w: &ScalarField) -> f64 {
    let (lo, hi) = psi.domain();
    let mut worst: f64 = 0.0;
    for &n in f.grid().interior_nodes() {
        let (wn, fn_) = (w.get(n), f.get(n));
        if hi == f64::INFINITY {
            worst = worst.max(-wn);
        }
        if lo == f64::NEG_INFINITY {
            worst = worst.max(wn);
        }
        if wn > 0.0 {
            worst = worst.max((fn_ - lo).abs());
        }
        if wn < 0.0 {
            worst = worst.max((fn_ - hi).abs());
        }
    }
    worst
}

fn lambda_positive_residual(f: &ScalarField, psi: &ConvexFunctionSpec, w: &ScalarField, lambda: f64) -> f64 {
    f.grid()
        .interior_nodes()
        .iter()
        .map(|&n| psi.fenchel_residual(f.get(n), -w.get(n) / lambda).abs())
        .fold(0.0, f64::max)
}

/// Finds the multiplier `λ > 0` with `∫ ψ((ψ*)'(−w/λ)) = m` by bracketing on
/// `log λ` and bisecting.
fn saturating_lambda(psi: &ConvexFunctionSpec, w: &ScalarField, m: f64) -> Option<f64> {
    let excess = |lambda: f64| {
        let f = w.map(|w| psi.conjugate_derivative(-w / lambda));
        integrate(&f.map(|s| psi.value(s))) - m
    };
    // The excess is nonincreasing in λ.
    let (mut lo, mut hi) = (1.0, 1.0);
    let mut steps = 0;
    while excess(lo) < 0.0 {
        lo *= 0.5;
        steps += 1;
        if steps > 200 {
            return None;
        }
    }
    while excess(hi) > 0.0 {
        hi *= 2.0;
        steps += 1;
        if steps > 400 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    Some((lo * hi).sqrt())
}

/// Tests the optimality alternative for a source `f` with constraint
/// `∫ ψ(f) ≤ m` and adjoint quantity `w`, reporting the branch with the
/// smaller residual.
pub fn check_source_optimality(
    f: &ScalarField,
    psi: &ConvexFunctionSpec,
    m: f64,
    w: &ScalarField,
) -> Result<OptimalityReport> {
    f.check_same_grid(w)?;
    psi.validate()?;
    let constraint_value = integrate(&f.map(|s| psi.value(s)));
    let zero = lambda_zero_residual(f, psi, w);
    let lambda = saturating_lambda(psi, w, m).unwrap_or(f64::NAN);
    let positive = if lambda.is_nan() { f64::INFINITY } else { lambda_positive_residual(f, psi, w, lambda) };
    let (branch, lambda, max_residual) =
        if positive < zero { (Branch::LambdaPositive, lambda, positive) } else { (Branch::LambdaZero, 0.0, zero) };
    Ok(OptimalityReport { w: w.clone(), lambda, branch, max_residual, constraint_value })
}

/// Inner solver that produced the state at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerSolver {
    Picard,
    SmoothedNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub s: f64,
    pub volume: f64,
    pub inner: InnerSolver,
}

#[derive(Debug, Clone)]
pub struct BangBangResult {
    pub f_opt: ScalarField,
    pub u: ScalarField,
    /// Indicator of the `β` set `E = {u ≤ s}`.
    pub indicator: ScalarField,
    pub s_threshold: f64,
    /// `∫ f_opt`.
    pub volume: f64,
    /// `|E|`.
    pub area: f64,
    pub perimeter: f64,
    /// Defect of the `α` set `{u > s}`, the one expected to be convex.
    pub convexity_defect: f64,
    /// Defect of `E` itself.
    pub convexity_defect_e: f64,
    pub history: Vec<BisectionStep>,
    pub report: SolveReport,
}

fn switch(u: &ScalarField, s: f64, alpha: f64, beta: f64) -> ScalarField {
    u.map(|u| if u <= s { beta } else { alpha })
}

fn same_set(a: &ScalarField, b: &ScalarField) -> bool {
    a.grid().interior_nodes().iter().all(|&n| a.get(n) == b.get(n))
}

/// Picard on `f ↦ β 1{R(f) ≤ s} + α 1{R(f) > s}` with damping 0.5 on `f`.
/// Once the switched set has been stable for three iterations it is accepted
/// if it reproduces itself; `None` when no such fixed point is reached.
fn inner_picard(resolvent: &Resolvent, s: f64, alpha: f64, beta: f64, start: &ScalarField) -> Result<Option<ScalarField>> {
    let mut f = switch(start, s, alpha, beta);
    let mut set = f.clone();
    let mut stable = 0;
    for _ in 0..PICARD_CAP {
        let next = switch(&resolvent.apply(&f)?, s, alpha, beta);
        stable = if same_set(&next, &set) { stable + 1 } else { 0 };
        f = f.zip_map(&next, |a, b| 0.5 * (a + b))?;
        set = next;
        if stable >= 3 {
            let u = resolvent.apply(&set)?;
            return Ok(same_set(&switch(&u, s, alpha, beta), &set).then_some(u));
        }
    }
    Ok(None)
}

const PICARD_CAP: usize = 30;

/// `∫ |∇u|² − 2 ∫ G(u)` with `G' = β` below `s`, `α` above, and the kink
/// smoothed over half-width `eps`.
pub fn source_state_energy(grid: &Arc<Grid>, s: f64, alpha: f64, beta: f64, eps: f64) -> GradientEnergy<'static> {
    // −2G(u) as a convex kink: slope −2β left of s, −2α right of it.
    let kink = SmoothedKink { alpha: -2.0 * beta, beta: -2.0 * alpha, k: s, eps };
    GradientEnergy::new(grid, |g| [g, 1.0, 0.0], move |_, x| kink.eval(x))
}

/// The state is also the minimizer of the convex energy
/// `∫ |∇u|² − 2 ∫ G(u)` with `G' = β` below `s` and `α` above it. Its
/// subdifferential at `s` is `[α, β]`, which admits the plateaus `{u = s}`
/// that the Picard map cannot represent (for `α = 0` the discrete maximum
/// principle rules out any self-consistent `α` set). The kink is smoothed
/// with half-width `eps`.
fn inner_newton(grid: &Arc<Grid>, s: f64, alpha: f64, beta: f64, eps: f64, start: Vec<f64>, tol: f64) -> Result<Vec<f64>> {
    let h2 = grid.h() * grid.h();
    let scale = 2.0 * h2 * beta * (grid.dof_count() as f64).sqrt();
    let energy = source_state_energy(grid, s, alpha, beta, eps);
    let opts = NewtonOptions { tol, scale, max_iter: 200 };
    Ok(minimize(&energy, start, &opts, "source inner problem")?.0)
}

/// Minimizes the compliance `∫ f R(f)` over `α ≤ f ≤ β` with `∫ f ≥ m`.
///
/// The optimum is `β` where the state is below a threshold `s` and `α`
/// above it; `s` is found by bisection on the volume `∫ f`, which grows with
/// `s`. For each `s` the switching set comes from damped Picard iteration,
/// or from the smoothed convex energy when Picard finds no fixed point.
pub fn solve_compliance_source(grid: &Arc<Grid>, alpha: f64, beta: f64, m: f64, tol: f64) -> Result<BangBangResult> {
    if !(alpha >= 0.0 && alpha < beta && beta.is_finite()) {
        return Err(Error::param("alpha/beta", format!("need 0 <= alpha < beta, got {alpha}, {beta}")));
    }
    let omega = grid.measure();
    if !(alpha * omega < m && m < beta * omega) {
        return Err(Error::param(
            "m",
            format!("need alpha|Ω| < m < beta|Ω| = ({}, {}), got {m}", alpha * omega, beta * omega),
        ));
    }
    let resolvent = Resolvent::new(grid, 0.01 * tol)?;
    let top = resolvent.apply(&ScalarField::constant(grid, beta))?;
    let mut history = Vec::new();
    let mut warm = top.to_dofs();

    // Switching state at threshold s: (the state deciding the set, volume).
    let mut state_at = |s: f64| -> Result<(ScalarField, f64)> {
        let start = ScalarField::from_dofs(grid, &warm);
        let (u, inner) = match inner_picard(&resolvent, s, alpha, beta, &start)? {
            Some(u) => (u, InnerSolver::Picard),
            None => {
                let mut u = warm.clone();
                for eps in [1e-1, 1e-2] {
                    u = inner_newton(grid, s, alpha, beta, eps * s, u, tol)?;
                }
                warm = u.clone();
                (ScalarField::from_dofs(grid, &u), InnerSolver::SmoothedNewton)
            }
        };
        let volume = integrate(&switch(&u, s, alpha, beta));
        history.push(BisectionStep { s, volume, inner });
        Ok((u, volume))
    };

    // As s → 0 the β set shrinks to a boundary layer and the volume tends
    // to α|Ω| < m; above max R(β) everything is switched to β.
    let mut s_lo = 0.0;
    let mut s_hi = top.max_abs();
    let (mut u_hi, v_hi) = state_at(s_hi)?;
    if v_hi < m {
        return Err(Error::Bracket(format!("volume {v_hi} at s = {s_hi} is below m = {m}")));
    }
    // The volume moves in whole nodes, so stop once the excess is below a
    // tenth of a cell layer along the switching boundary.
    let layer = |u: &ScalarField, s: f64| -> Result<f64> {
        Ok(beta * grid.h() * perimeter(&u.map(|u| if u <= s { 1.0 } else { 0.0 }))?)
    };
    let mut iterations = 0;
    let mut excess = v_hi - m;
    while iterations < 100 && s_hi - s_lo > 1e-12 * s_hi && excess > 0.1 * layer(&u_hi, s_hi)? {
        iterations += 1;
        let s = 0.5 * (s_lo + s_hi);
        let (u, v) = state_at(s)?;
        if v >= m {
            s_hi = s;
            u_hi = u;
            excess = v - m;
        } else {
            s_lo = s;
        }
    }

    let f_opt = switch(&u_hi, s_hi, alpha, beta);
    let indicator = u_hi.map(|u| if u <= s_hi { 1.0 } else { 0.0 });
    let complement = indicator.map(|v| 1.0 - v);
    let u = resolvent.apply(&f_opt)?;
    let volume = integrate(&f_opt);
    let area = integrate(&indicator);
    let perimeter_e = perimeter(&indicator)?;
    let defect = match convexity_defect(&complement) {
        Err(Error::EmptySet) => 0.0,
        other => other?,
    };
    let convexity_defect_e = convexity_defect(&indicator)?;
    let report = SolveReport {
        iterations,
        final_residual: (volume - m).abs() / m,
        objective: Some(f_opt.dot(&u)?),
        converged: true,
    };
    Ok(BangBangResult {
        f_opt,
        u,
        indicator,
        s_threshold: s_hi,
        volume,
        area,
        perimeter: perimeter_e,
        convexity_defect: defect,
        convexity_defect_e,
        history,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct EigenSourceResult {
    pub f: ScalarField,
    pub lambda: f64,
    /// Smallest Dirichlet eigenvalue `μ₁`, with `λ = 1/μ₁²`.
    pub mu: f64,
    /// `½ ∫ u_f²`, equal to `λ m`.
    pub objective: f64,
    pub report: SolveReport,
}

/// Maximizes `½ ∫ u_f²` subject to `∫ f² ≤ 2m`: `f = √(2m) φ₁`, `λ = 1/μ₁²`.
pub fn solve_eigen_source(grid: &Arc<Grid>, m: f64, tol: f64) -> Result<EigenSourceResult> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::param("m", format!("must be positive, got {m}")));
    }
    let pair = smallest_eigenpair(grid, tol)?;
    let f = pair.vector.scaled((2.0 * m).sqrt());
    let u = Resolvent::new(grid, 0.01 * tol)?.apply(&f)?;
    let objective = 0.5 * integrate(&u.map(|u| u * u));
    Ok(EigenSourceResult { f, lambda: 1.0 / (pair.value * pair.value), mu: pair.value, objective, report: pair.report })
}

fn check_binary(indicator: &ScalarField) -> Result<()> {
    match indicator.values().iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(node) => Err(Error::NonBinary { value: indicator.get(node), node }),
        None => Ok(()),
    }
}

/// `h` times the number of lattice edges between interior nodes whose
/// endpoints differ in the indicator: the length, in the Manhattan metric,
/// of the boundary of the union of dual cells inside the domain.
pub fn perimeter(indicator: &ScalarField) -> Result<f64> {
    check_binary(indicator)?;
    let grid = indicator.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let v = indicator.values();
    let differs = |a: usize, b: usize| grid.is_interior(a) && grid.is_interior(b) && v[a] != v[b];
    let mut count = 0usize;
    for j in 0..ny {
        for i in 0..nx {
            let n = grid.node_id(i, j);
            if i + 1 < nx && differs(n, grid.node_id(i + 1, j)) {
                count += 1;
            }
            if j + 1 < ny && differs(n, grid.node_id(i, j + 1)) {
                count += 1;
            }
        }
    }
    Ok(count as f64 * grid.h())
}

fn cross(o: [i64; 2], a: [i64; 2], b: [i64; 2]) -> i128 {
    (a[0] - o[0]) as i128 * (b[1] - o[1]) as i128 - (a[1] - o[1]) as i128 * (b[0] - o[0]) as i128
}

/// Twice the area of the convex hull, by Andrew's monotone chain.
fn hull_area2(mut pts: Vec<[i64; 2]>) -> i128 {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return 0;
    }
    let mut hull: Vec<[i64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[i64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    (0..hull.len())
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
            a[0] as i128 * b[1] as i128 - b[0] as i128 * a[1] as i128
        })
        .sum::<i128>()
        .abs()
}

/// `(|hull(E)| − |E|) / |E|` with `E` the union of the dual cells of the
/// marked nodes.
pub fn convexity_defect(indicator: &ScalarField) -> Result<f64> {
    check_binary(indicator)?;
    let grid = indicator.grid();
    let mut corners = Vec::new();
    let mut count = 0usize;
    for n in 0..grid.node_count() {
        if indicator.get(n) != 1.0 {
            continue;
        }
        count += 1;
        // Dual-cell corners in half-spacing units.
        let [kx, ky] = grid.lattice_index(n);
        for (dx, dy) in [(-1, -1), (1, -1), (-1, 1), (1, 1)] {
            corners.push([2 * kx + dx, 2 * ky + dy]);
        }
    }
    if count == 0 {
        return Err(Error::EmptySet);
    }
    // Areas in units of (h/2)²; each dual cell has area 4.
    let hull = hull_area2(corners) as f64 / 2.0;
    let area = 4.0 * count as f64;
    Ok((hull - area) / area)
}
