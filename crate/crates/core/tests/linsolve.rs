mod common;

use std::f64::consts::PI;

use common::{preset_domains, random_field, rng, self_adjoint_gap};
use ellopt::grid::{CellField, DomainSpec, Grid, ScalarField};
use ellopt::linsolve::{
    assemble_diffusion, assemble_schrodinger, smallest_eigenpair, solve, Coefficient, Resolvent,
};
use proptest::prelude::*;

fn max_error(u: &ScalarField, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let g = u.grid();
    g.interior_nodes()
        .iter()
        .map(|&n| {
            let [x, y] = g.position(n);
            (u.get(n) - exact(x, y)).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let exact = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
    let errors: Vec<f64> = [16.0, 32.0, 64.0]
        .iter()
        .map(|n| {
            let g = Grid::build(DomainSpec::UnitSquare, 1.0 / n).unwrap();
            let f = ScalarField::from_fn(&g, |x, y| 2.0 * PI * PI * exact(x, y));
            let (u, _) = solve(&Resolvent::new(&g, 1e-12).unwrap().laplacian().clone(), &f, 1e-12).unwrap();
            max_error(&u, exact)
        })
        .collect();
    for w in errors.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!(rate > 1.8, "errors {errors:?}");
    }
}

#[test]
fn radial_poisson_on_the_disk_converges() {
    let errors: Vec<f64> = [16.0, 32.0, 64.0]
        .iter()
        .map(|n| {
            let g = Grid::build(DomainSpec::unit_disk(), 1.0 / n).unwrap();
            let u = Resolvent::new(&g, 1e-12).unwrap().apply(&ScalarField::constant(&g, 1.0)).unwrap();
            max_error(&u, |x, y| (1.0 - x * x - y * y) / 4.0)
        })
        .collect();
    assert!(errors[0] < 1e-3, "errors {errors:?}");
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "errors {errors:?}");
}

#[test]
fn operators_are_exactly_symmetric() {
    let mut rng = rng(7);
    for (_, domain) in preset_domains() {
        let g = Grid::build(domain, 1.0 / 16.0).unwrap();
        let cells = random_field(&mut rng, g.cell_count(), 0.5, 2.0);
        let mut a = CellField::zeros(&g);
        for (c, v) in cells.into_iter().enumerate() {
            a.set(c, v);
        }
        let nodal = ScalarField::from_dofs(&g, &random_field(&mut rng, g.dof_count(), 0.5, 2.0));
        assert!(assemble_diffusion(&g, Coefficient::Cells(&a)).unwrap().is_symmetric());
        assert!(assemble_diffusion(&g, Coefficient::Nodal(&nodal)).unwrap().is_symmetric());
        assert!(assemble_schrodinger(&g, &nodal).unwrap().is_symmetric());
    }
}

#[test]
fn resolvent_is_self_adjoint_on_every_domain() {
    let tol = 1e-10;
    let mut rng = rng(11);
    for (name, domain) in preset_domains() {
        let g = Grid::build(domain, 1.0 / 32.0).unwrap();
        for _ in 0..20 {
            let gap = self_adjoint_gap(&g, tol, &mut rng);
            assert!(gap <= 10.0 * tol, "{name}: {gap:e}");
        }
    }
}

#[test]
fn constant_potential_shifts_the_spectrum() {
    let g = Grid::build(DomainSpec::UnitSquare, 1.0 / 16.0).unwrap();
    let c = 3.5;
    let lap = Resolvent::new(&g, 1e-12).unwrap().laplacian().clone();
    let shifted = assemble_schrodinger(&g, &ScalarField::constant(&g, c)).unwrap();
    for r in 0..lap.matrix().dim() {
        for (col, v) in shifted.matrix().row(r) {
            let expect = lap.matrix().get(r, col) + if r == col { c } else { 0.0 };
            assert_eq!(v, expect);
        }
    }
    let pair = smallest_eigenpair(&g, 1e-10).unwrap();
    let phi = pair.vector.to_dofs();
    let sphi = shifted.matrix().mul_vec(&phi);
    let res = sphi.iter().zip(&phi).map(|(a, p)| (a - (pair.value + c) * p).powi(2)).sum::<f64>().sqrt();
    let norm = phi.iter().map(|p| p * p).sum::<f64>().sqrt();
    assert!(res <= 1e-8 * (pair.value + c) * norm);
}

#[test]
fn square_eigenvalue_converges_to_two_pi_squared() {
    let g = Grid::build(DomainSpec::UnitSquare, 1.0 / 32.0).unwrap();
    let pair = smallest_eigenpair(&g, 1e-10).unwrap();
    assert!((pair.value / (2.0 * PI * PI) - 1.0).abs() < 0.005);
    assert!(pair.vector.values().iter().all(|&v| v >= 0.0));
    let norm_sq = ellopt::grid::integrate(&pair.vector.map(|v| v * v));
    assert!((norm_sq - 1.0).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn maximum_principle(seed in any::<u64>(), disk in any::<bool>(), a_lo in 0.1f64..1.0) {
        let domain = if disk { DomainSpec::unit_disk() } else { DomainSpec::UnitSquare };
        let g = Grid::build(domain, 1.0 / 12.0).unwrap();
        let mut rng = rng(seed);
        let f = ScalarField::from_dofs(&g, &random_field(&mut rng, g.dof_count(), 0.0, 1.0));
        let mut a = CellField::zeros(&g);
        for c in 0..g.cell_count() {
            a.set(c, a_lo + rand::Rng::gen_range(&mut rng, 0.0..1.0));
        }
        let op = assemble_diffusion(&g, Coefficient::Cells(&a)).unwrap();
        let (u, report) = solve(&op, &f, 1e-12).unwrap();
        prop_assert!(report.converged && report.final_residual <= 1e-12);
        prop_assert!(u.values().iter().all(|&v| v >= -1e-14));
    }

    #[test]
    fn zero_load_gives_zero_state(n in 8usize..20) {
        let g = Grid::build(DomainSpec::unit_disk(), 1.0 / n as f64).unwrap();
        let u = Resolvent::new(&g, 1e-10).unwrap().apply(&ScalarField::zeros(&g)).unwrap();
        prop_assert_eq!(u.max_abs(), 0.0);
    }
}
