//! Sparse symmetric operators on the interior unknowns, conjugate gradients,
//! the Dirichlet resolvent and the smallest Dirichlet eigenpair.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellField, CellStencil, Grid, ScalarField, NO_DOF};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles an `n × n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yr = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let triplets = (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v)))
            .collect();
        CsrMatrix::from_triplets(self.n, triplets)
    }

    /// Bitwise equality with the transpose.
    pub fn is_symmetric(&self) -> bool {
        *self == self.transpose()
    }

    /// Returns `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> CsrMatrix {
        let mut triplets: Vec<_> = (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect();
        triplets.extend(d.iter().enumerate().map(|(i, &v)| (i, i, v)));
        CsrMatrix::from_triplets(self.n, triplets)
    }
}

/// Convergence telemetry shared by every iterative solver in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual (linear solves) or relative gradient norm
    /// (minimizations) at exit.
    pub final_residual: f64,
    pub objective: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    #[default]
    None,
    Jacobi,
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub tol: f64,
    /// Defaults to `10 n`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl CgOptions {
    pub fn new(tol: f64) -> Self {
        CgOptions {
            tol,
            max_iter: None,
            preconditioner: Preconditioner::None,
        }
    }

    pub fn jacobi(mut self) -> Self {
        self.preconditioner = Preconditioner::Jacobi;
        self
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients for SPD `a`. Never fails: the report
/// tells whether the relative residual `‖b − Ax‖/‖b‖` reached `opts.tol`.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &CgOptions,
) -> (Vec<f64>, SolveReport) {
    let n = a.dim();
    let bnorm = norm(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        let report = SolveReport {
            iterations: 0,
            final_residual: 0.0,
            objective: None,
            converged: true,
        };
        return (x, report);
    }
    let inv_diag: Option<Vec<f64>> = match opts.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Jacobi => Some(
            a.diagonal()
                .into_iter()
                .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        ),
    };
    let precondition = |r: &[f64], z: &mut [f64]| match &inv_diag {
        Some(inv) => z.iter_mut().zip(r.iter().zip(inv)).for_each(|(z, (r, d))| *z = r * d),
        None => z.copy_from_slice(r),
    };

    let mut r = a.mul_vec(&x);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let mut res = norm(&r) / bnorm;
    let mut it = 0;
    while res > opts.tol && it < max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let step = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += step * p);
        r.iter_mut().zip(&ap).for_each(|(r, ap)| *r -= step * ap);
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        res = norm(&r) / bnorm;
        it += 1;
    }
    let report = SolveReport {
        iterations: it,
        final_residual: res,
        objective: None,
        converged: res <= opts.tol,
    };
    (x, report)
}

/// A symmetric operator over the interior nodes of a grid.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    grid: Arc<Grid>,
    matrix: CsrMatrix,
}

/// Diffusion coefficient for [`assemble_diffusion`].
#[derive(Debug, Clone, Copy)]
pub enum Coefficient<'a> {
    Constant(f64),
    /// Node values; edge coefficients are harmonic means of the endpoints.
    /// On edges leaving the interior the interior endpoint's value is used.
    Nodal(&'a ScalarField),
    /// Cell values; the operator is the exact Hessian of
    /// `½ Σ_c w_c a_c h² G_c(u)` with the density of [`crate::grid::grad_sq`].
    Cells(&'a CellField),
}

impl LinearOperator {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn apply(&self, u: &ScalarField) -> ScalarField {
        ScalarField::from_dofs(&self.grid, &self.matrix.mul_vec(&u.to_dofs()))
    }

    pub fn is_symmetric(&self) -> bool {
        self.matrix.is_symmetric()
    }

    /// Adds a nonnegative potential on the diagonal.
    pub fn with_potential(&self, v: &ScalarField) -> Result<LinearOperator> {
        let d = v.to_dofs();
        if let Some((i, &x)) = d.iter().enumerate().find(|(_, &x)| x < 0.0 || !x.is_finite()) {
            return Err(Error::Negative {
                what: "potential",
                value: x,
                index: self.grid.node_of_dof(i),
            });
        }
        Ok(LinearOperator {
            grid: Arc::clone(&self.grid),
            matrix: self.matrix.add_diagonal(&d),
        })
    }
}

fn check_nonnegative(values: impl Iterator<Item = (usize, f64)>, what: &'static str) -> Result<()> {
    for (index, value) in values {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::Negative { what, value, index });
        }
    }
    Ok(())
}

/// Discretizes `−div(a ∇u)` with homogeneous Dirichlet conditions. In the
/// interior this is the 5-point pattern; cut cells at the boundary use the
/// ghost differences of [`CellStencil`].
pub fn assemble_diffusion(grid: &Arc<Grid>, a: Coefficient<'_>) -> Result<LinearOperator> {
    match a {
        Coefficient::Constant(c) => check_nonnegative(std::iter::once((0, c)), "coefficient")?,
        Coefficient::Nodal(f) => {
            if !Arc::ptr_eq(f.grid(), grid) && **f.grid() != **grid {
                return Err(Error::GridMismatch);
            }
            check_nonnegative(grid.interior_nodes().iter().map(|&n| (n, f.get(n))), "coefficient")?
        }
        Coefficient::Cells(f) => {
            if !Arc::ptr_eq(f.grid(), grid) && **f.grid() != **grid {
                return Err(Error::GridMismatch);
            }
            check_nonnegative(grid.active_cells().iter().map(|&c| (c, f.get(c))), "coefficient")?
        }
    }
    // Coefficient on a given edge of a given cell.
    let edge_coefficient = |s: &CellStencil, corners: [usize; 2]| -> f64 {
        match a {
            Coefficient::Constant(c) => c,
            Coefficient::Cells(f) => f.get(s.cell),
            Coefficient::Nodal(f) => {
                let [p, q] = corners.map(|k| s.nodes[k]);
                let (ap, aq) = (f.get(p), f.get(q));
                match (grid.is_interior(p), grid.is_interior(q)) {
                    (true, false) => ap,
                    (false, true) => aq,
                    _ if ap + aq > 0.0 => 2.0 * ap * aq / (ap + aq),
                    _ => 0.0,
                }
            }
        }
    };

    // Hessian of ½ Σ_c w_c h² a G_c(u), divided by h².
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut triplets = Vec::with_capacity(16 * grid.stencils().len());
    for s in grid.stencils() {
        for e in &s.edges {
            let w = s.weight * e.weight * edge_coefficient(s, e.corners) * inv_h2;
            for x in 0..2 {
                let row = s.dofs[e.corners[x]];
                if row == NO_DOF {
                    continue;
                }
                for y in 0..2 {
                    let col = s.dofs[e.corners[y]];
                    let v = w * e.coefs[x] * e.coefs[y];
                    if col != NO_DOF && v != 0.0 {
                        triplets.push((row, col, v));
                    }
                }
            }
        }
    }
    Ok(LinearOperator {
        grid: Arc::clone(grid),
        matrix: CsrMatrix::from_triplets(grid.dof_count(), triplets),
    })
}

/// Discretizes `−Δu + V u`.
pub fn assemble_schrodinger(grid: &Arc<Grid>, v: &ScalarField) -> Result<LinearOperator> {
    assemble_diffusion(grid, Coefficient::Constant(1.0))?.with_potential(v)
}

/// Solves `A u = f` by conjugate gradients to relative residual `tol`.
pub fn solve(a: &LinearOperator, f: &ScalarField, tol: f64) -> Result<(ScalarField, SolveReport)> {
    solve_with(a, f, &CgOptions::new(tol))
}

pub fn solve_with(
    a: &LinearOperator,
    f: &ScalarField,
    opts: &CgOptions,
) -> Result<(ScalarField, SolveReport)> {
    if !Arc::ptr_eq(f.grid(), &a.grid) && **f.grid() != *a.grid {
        return Err(Error::GridMismatch);
    }
    let (x, report) = conjugate_gradient(&a.matrix, &f.to_dofs(), None, opts);
    if !report.converged {
        return Err(Error::NotConverged {
            what: "conjugate gradients",
            report,
        });
    }
    Ok((ScalarField::from_dofs(&a.grid, &x), report))
}

/// The solution operator `f ↦ u` of `−Δu = f`, `u = 0` on the boundary.
#[derive(Debug, Clone)]
pub struct Resolvent {
    laplacian: LinearOperator,
    tol: f64,
}

impl Resolvent {
    pub fn new(grid: &Arc<Grid>, tol: f64) -> Result<Self> {
        Ok(Resolvent {
            laplacian: assemble_diffusion(grid, Coefficient::Constant(1.0))?,
            tol,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.laplacian.grid()
    }

    pub fn laplacian(&self) -> &LinearOperator {
        &self.laplacian
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        solve_with(&self.laplacian, f, &CgOptions::new(self.tol).jacobi()).map(|(u, _)| u)
    }
}

/// Result of [`smallest_eigenpair`].
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    /// Nonnegative, unit `L²` norm.
    pub vector: ScalarField,
    pub report: SolveReport,
}

/// Smallest eigenvalue of the discrete Dirichlet Laplacian by inverse power
/// iteration. Stops when `‖Aφ − μφ‖ / (μ ‖φ‖) ≤ tol`.
pub fn smallest_eigenpair(grid: &Arc<Grid>, tol: f64) -> Result<Eigenpair> {
    let a = assemble_diffusion(grid, Coefficient::Constant(1.0))?;
    let m = &a.matrix;
    let n = grid.dof_count();
    let inner = CgOptions::new((0.01 * tol).max(1e-14)).jacobi();
    let mut x = vec![1.0; n];
    let mut mu = 0.0;
    let mut res = f64::INFINITY;
    let max_iter = 1000;
    let mut it = 0;
    while it < max_iter {
        let nrm = norm(&x);
        x.iter_mut().for_each(|v| *v /= nrm);
        let ax = m.mul_vec(&x);
        mu = dot(&x, &ax);
        res = ax.iter().zip(&x).map(|(a, x)| (a - mu * x).powi(2)).sum::<f64>().sqrt() / mu;
        if res <= tol {
            break;
        }
        let (y, _) = conjugate_gradient(m, &x, Some(&x), &inner);
        x = y;
        it += 1;
    }
    let report = SolveReport {
        iterations: it,
        final_residual: res,
        objective: Some(mu),
        converged: res <= tol,
    };
    if !report.converged {
        return Err(Error::NotConverged {
            what: "inverse power iteration",
            report,
        });
    }
    if x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let scale = 1.0 / (norm(&x) * grid.h());
    x.iter_mut().for_each(|v| *v *= scale);
    Ok(Eigenpair {
        value: mu,
        vector: ScalarField::from_dofs(grid, &x),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainSpec;

    #[test]
    fn unit_coefficient_gives_five_point_rows() {
        let g = Grid::build(DomainSpec::UnitSquare, 0.25).unwrap();
        let a = assemble_diffusion(&g, Coefficient::Constant(1.0)).unwrap();
        let h2 = 0.0625;
        let center = g.dof(g.nearest_node([0.5, 0.5]).unwrap());
        let row: Vec<f64> = a.matrix().row(center).map(|(_, v)| v * h2).collect();
        assert_eq!(row, vec![-1.0, -1.0, 4.0, -1.0, -1.0]);
        assert!(a.is_symmetric());
    }

    #[test]
    fn coefficient_forms_agree_for_constants() {
        let g = Grid::build(DomainSpec::unit_disk(), 0.1).unwrap();
        let a1 = assemble_diffusion(&g, Coefficient::Constant(2.5)).unwrap();
        let nodal = ScalarField::constant(&g, 2.5);
        let a2 = assemble_diffusion(&g, Coefficient::Nodal(&nodal)).unwrap();
        let cells = CellField::constant(&g, 2.5);
        let a3 = assemble_diffusion(&g, Coefficient::Cells(&cells)).unwrap();
        assert_eq!(a1.matrix(), a2.matrix());
        assert_eq!(a1.matrix(), a3.matrix());
    }

    #[test]
    fn negative_inputs_are_rejected() {
        let g = Grid::build(DomainSpec::UnitSquare, 0.25).unwrap();
        assert!(assemble_diffusion(&g, Coefficient::Constant(-1.0)).is_err());
        let v = ScalarField::constant(&g, -0.5);
        assert!(matches!(assemble_schrodinger(&g, &v), Err(Error::Negative { .. })));
    }

    #[test]
    fn zero_potential_matches_laplacian() {
        let g = Grid::build(DomainSpec::unit_disk(), 0.125).unwrap();
        let lap = assemble_diffusion(&g, Coefficient::Constant(1.0)).unwrap();
        let s = assemble_schrodinger(&g, &ScalarField::zeros(&g)).unwrap();
        assert_eq!(lap.matrix(), s.matrix());
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = Grid::build(DomainSpec::unit_disk(), 0.125).unwrap();
        let lap = assemble_diffusion(&g, Coefficient::Constant(1.0)).unwrap();
        let (u, rep) = solve(&lap, &ScalarField::zeros(&g), 1e-10).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert!(rep.converged);
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let g = Grid::build(DomainSpec::unit_disk(), 0.05).unwrap();
        let lap = assemble_diffusion(&g, Coefficient::Constant(1.0)).unwrap();
        let opts = CgOptions {
            tol: 1e-12,
            max_iter: Some(3),
            preconditioner: Preconditioner::None,
        };
        let f = ScalarField::constant(&g, 1.0);
        assert!(matches!(solve_with(&lap, &f, &opts), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, 2.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0]), vec![6.0, 2.0]);
        assert!(m.is_symmetric());
    }
}
