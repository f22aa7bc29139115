//! Discrete gradient energies and a damped Newton minimizer.
//!
//! Every auxiliary problem in the crate has the form
//!
//! ```text
//! J(u) = h² Σ_cells w_c Φ(G_c(u)) + h² Σ_nodes φ_i(u_i)
//! ```
//!
//! with `G_c` the squared-gradient density of [`crate::grid::grad_sq`], `w_c`
//! the cell quadrature weight, `Φ` convex nondecreasing and `φ_i` convex. `J` is
//! then convex, its gradient and Hessian are assembled exactly, and Newton
//! with Armijo backtracking converges globally.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{CellStencil, Grid, NO_DOF};
use crate::linsolve::{conjugate_gradient, CgOptions, CsrMatrix, SolveReport};

/// `(value, first derivative, second derivative)`.
pub type Jet = [f64; 3];

pub struct GradientEnergy<'a> {
    grid: Arc<Grid>,
    cell: Box<dyn Fn(f64) -> Jet + 'a>,
    node: Box<dyn Fn(usize, f64) -> Jet + 'a>,
}

struct CellLocal {
    g: f64,
    /// `∂G/∂u` at the four corners.
    dg: [f64; 4],
}

fn corner_values(s: &CellStencil, u: &[f64]) -> [f64; 4] {
    s.dofs.map(|d| if d == NO_DOF { 0.0 } else { u[d] })
}

impl<'a> GradientEnergy<'a> {
    /// `cell` gives the jet of `Φ` at `G`; `node` the jet of `φ_i` at `u_i`,
    /// indexed by unknown.
    pub fn new(
        grid: &Arc<Grid>,
        cell: impl Fn(f64) -> Jet + 'a,
        node: impl Fn(usize, f64) -> Jet + 'a,
    ) -> Self {
        GradientEnergy {
            grid: Arc::clone(grid),
            cell: Box::new(cell),
            node: Box::new(node),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn inv_h2(&self) -> f64 {
        1.0 / (self.grid.h() * self.grid.h())
    }

    fn local(&self, s: &CellStencil, u: &[f64]) -> CellLocal {
        let inv_h2 = self.inv_h2();
        let mut g = 0.0;
        let mut dg = [0.0; 4];
        for (e, d) in s.differences(corner_values(s, u)) {
            g += e.weight * d * d;
            for k in 0..2 {
                dg[e.corners[k]] += 2.0 * e.weight * d * e.coefs[k] * inv_h2;
            }
        }
        CellLocal { g: g * inv_h2, dg }
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        let h2 = self.grid.h() * self.grid.h();
        let cells: f64 = self
            .grid
            .stencils()
            .iter()
            .map(|s| s.weight * (self.cell)(self.local(s, u).g)[0])
            .sum();
        let nodes: f64 = u.iter().enumerate().map(|(i, &x)| (self.node)(i, x)[0]).sum();
        h2 * (cells + nodes)
    }

    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let h2 = self.grid.h() * self.grid.h();
        let mut grad: Vec<f64> = u.iter().enumerate().map(|(i, &x)| h2 * (self.node)(i, x)[1]).collect();
        for s in self.grid.stencils() {
            let loc = self.local(s, u);
            let d1 = s.weight * (self.cell)(loc.g)[1];
            for k in 0..4 {
                if s.dofs[k] != NO_DOF {
                    grad[s.dofs[k]] += h2 * d1 * loc.dg[k];
                }
            }
        }
        grad
    }

    pub fn hessian(&self, u: &[f64]) -> CsrMatrix {
        let h2 = self.grid.h() * self.grid.h();
        let n = u.len();
        let mut triplets = Vec::with_capacity(16 * self.grid.stencils().len() + n);
        for (i, &x) in u.iter().enumerate() {
            triplets.push((i, i, h2 * (self.node)(i, x)[2]));
        }
        for s in self.grid.stencils() {
            let loc = self.local(s, u);
            let [_, d1, d2] = (self.cell)(loc.g);
            let w = s.weight;
            // h² G is a sum of weighted squared differences, so its Hessian
            // is twice the weighted sum of coefficient outer products.
            let mut block = [[0.0; 4]; 4];
            for e in &s.edges {
                for a in 0..2 {
                    for b in 0..2 {
                        block[e.corners[a]][e.corners[b]] += 2.0 * e.weight * e.coefs[a] * e.coefs[b];
                    }
                }
            }
            for a in 0..4 {
                if s.dofs[a] == NO_DOF {
                    continue;
                }
                for b in 0..4 {
                    if s.dofs[b] == NO_DOF {
                        continue;
                    }
                    let v = w * (h2 * d2 * loc.dg[a] * loc.dg[b] + d1 * block[a][b]);
                    if v != 0.0 {
                        triplets.push((s.dofs[a], s.dofs[b], v));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(n, triplets)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Stop when `‖∇J‖ ≤ tol · scale`.
    pub tol: f64,
    pub scale: f64,
    pub max_iter: usize,
}

/// Iterate history of one Newton run.
#[derive(Debug, Clone, Default)]
pub struct NewtonTrace {
    pub energies: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Stopped because the Newton step fell below the floating-point
    /// resolution of the iterate, with the gradient still above tolerance.
    pub precision_floor: bool,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

type Accepted = (Vec<f64>, f64, Option<Vec<f64>>);

/// Armijo backtracking along `dir`; returns the trial point, its energy and,
/// when computed, its gradient.
fn line_search(energy: &GradientEnergy<'_>, u: &[f64], j: f64, g: &[f64], gnorm: f64, dir: &[f64]) -> Option<Accepted> {
    let slope = dir.iter().zip(g).map(|(s, g)| s * g).sum::<f64>();
    let mut t = 1.0;
    while t > 1e-12 {
        let trial: Vec<f64> = u.iter().zip(dir).map(|(u, d)| u + t * d).collect();
        let jt = energy.value(&trial);
        if jt <= j + 1e-4 * t * slope {
            return Some((trial, jt, None));
        }
        // Near the minimizer energy differences drown in rounding; fall
        // back to gradient-norm decrease as the merit function.
        if (jt - j).abs() <= 1e-13 * (1.0 + j.abs()) {
            let gt = energy.gradient(&trial);
            if norm(&gt) < gnorm {
                return Some((trial, jt.min(j), Some(gt)));
            }
        }
        t *= 0.5;
    }
    None
}

/// Damped Newton for a convex [`GradientEnergy`], with the Newton system
/// solved inexactly by Jacobi-preconditioned CG.
pub fn minimize(
    energy: &GradientEnergy<'_>,
    mut u: Vec<f64>,
    opts: &NewtonOptions,
    what: &'static str,
) -> Result<(Vec<f64>, NewtonTrace)> {
    let scale = if opts.scale > 0.0 { opts.scale } else { 1.0 };
    let mut trace = NewtonTrace::default();
    let mut j = energy.value(&u);
    trace.energies.push(j);
    let mut g = energy.gradient(&u);
    let mut gnorm = norm(&g);
    while gnorm > opts.tol * scale {
        if trace.iterations >= opts.max_iter {
            trace.gradient_norm = gnorm;
            return Err(Error::NotConverged {
                what,
                report: SolveReport {
                    iterations: trace.iterations,
                    final_residual: gnorm / scale,
                    objective: Some(j),
                    converged: false,
                },
            });
        }
        let hess = energy.hessian(&u);
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let forcing = (gnorm / scale).sqrt().clamp(1e-10, 0.1);
        // A loosely solved Newton system can give a useless direction when
        // the Hessian is badly conditioned; retry once with a tight solve.
        let mut step_size = f64::INFINITY;
        let accepted = [forcing, 1e-12].into_iter().find_map(|forcing| {
            let (step, _) = conjugate_gradient(&hess, &rhs, None, &CgOptions::new(forcing).jacobi());
            let slope: f64 = step.iter().zip(&g).map(|(s, g)| s * g).sum();
            let dir = if slope < 0.0 { step } else { rhs.clone() };
            step_size = max_abs(&dir);
            line_search(energy, &u, j, &g, gnorm, &dir)
        });
        let Some((trial, jt, gt)) = accepted else {
            trace.gradient_norm = gnorm;
            // The Newton step is below the floating-point resolution of u:
            // no representable iterate is better.
            if step_size <= 8.0 * f64::EPSILON * max_abs(&u) {
                trace.precision_floor = true;
                return Ok((u, trace));
            }
            return Err(Error::LineSearch {
                what,
                gradient_norm: gnorm,
            });
        };
        u = trial;
        j = jt;
        g = gt.unwrap_or_else(|| energy.gradient(&u));
        gnorm = norm(&g);
        trace.energies.push(j);
        trace.iterations += 1;
    }
    trace.gradient_norm = gnorm;
    Ok((u, trace))
}
