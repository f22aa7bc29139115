//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use ellopt::convex::ConvexFunctionSpec;
use ellopt::energy::GradientEnergy;
use ellopt::grid::{DomainSpec, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn all_psi() -> Vec<ConvexFunctionSpec> {
    vec![
        ConvexFunctionSpec::Quadratic,
        ConvexFunctionSpec::PowerOverP { p: 2.0 },
        ConvexFunctionSpec::PowerOverP { p: 3.0 },
        ConvexFunctionSpec::PowerOverP { p: 1.5 },
        ConvexFunctionSpec::LinearOnInterval { alpha: 0.5, beta: 2.0, k: 1.0 },
        ConvexFunctionSpec::LinearOnInterval { alpha: 0.0, beta: 1.0, k: 3.0 },
        ConvexFunctionSpec::IndicatorInterval { alpha: 0.0, beta: 1.0 },
        ConvexFunctionSpec::IndicatorInterval { alpha: 1.0, beta: 2.0 },
    ]
}

/// `sup_s { s t − ψ(s) }` by sampling `dom ψ` and refining the best sample
/// with a ternary search on the concave objective.
pub fn brute_conjugate(psi: &ConvexFunctionSpec, t: f64) -> f64 {
    let obj = |s: f64| s * t - psi.value(s);
    let (lo, hi) = psi.domain();
    let hi = if hi.is_finite() {
        hi
    } else {
        // Grow the window until the concave objective falls at its right end.
        let mut b = 1.0;
        while obj(b) >= obj(b * (1.0 - 1e-3)) {
            b *= 2.0;
        }
        b
    };
    let n = 4000;
    let step = (hi - lo) / n as f64;
    let samples = (0..=n).map(|i| lo + step * i as f64);
    let best = samples.clone().max_by(|a, b| obj(*a).total_cmp(&obj(*b))).unwrap();
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if obj(m1) < obj(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    [lo, hi, best, 0.5 * (a + b)].into_iter().map(obj).fold(f64::NEG_INFINITY, f64::max)
}

/// `8 × 8` interior nodes.
pub fn small_square() -> Arc<Grid> {
    Grid::build(DomainSpec::UnitSquare, 1.0 / 9.0).unwrap()
}

pub fn random_field(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// `‖∇J − ∇_FD J‖∞ / ‖∇J‖∞` with central differences of step `δ`.
pub fn gradient_error(energy: &GradientEnergy<'_>, u: &[f64], delta: f64) -> f64 {
    let g = energy.gradient(u);
    let mut x = u.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..u.len() {
        x[i] = u[i] + delta;
        let jp = energy.value(&x);
        x[i] = u[i] - delta;
        let jm = energy.value(&x);
        x[i] = u[i];
        worst = worst.max(((jp - jm) / (2.0 * delta) - g[i]).abs());
    }
    let scale = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    worst / scale.max(f64::MIN_POSITIVE)
}

/// Dense matrix-vector product of the Hessian against the FD derivative of
/// the gradient, as `‖H v − (∇J(u+δv) − ∇J(u−δv))/2δ‖∞ / ‖H v‖∞`.
pub fn hessian_error(energy: &GradientEnergy<'_>, u: &[f64], v: &[f64], delta: f64) -> f64 {
    let hv = energy.hessian(u).mul_vec(v);
    let plus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + delta * b).collect();
    let minus: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - delta * b).collect();
    let (gp, gm) = (energy.gradient(&plus), energy.gradient(&minus));
    let worst = hv.iter().zip(gp.iter().zip(&gm)).map(|(h, (p, m))| (h - (p - m) / (2.0 * delta)).abs()).fold(0.0, f64::max);
    worst / hv.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE)
}

pub fn preset_domains() -> Vec<(&'static str, DomainSpec)> {
    vec![
        ("unit-square", DomainSpec::UnitSquare),
        ("unit-disk", DomainSpec::unit_disk()),
        ("ellipse", DomainSpec::Ellipse { a: 2.0, b: 1.0 }),
    ]
}

/// `|∫ g R(f) − ∫ f R(g)| / max(∫ g R(f), ∫ f R(g))` for random `f, g ∈ [0, 1)`.
pub fn self_adjoint_gap(grid: &Arc<Grid>, tol: f64, rng: &mut ChaCha8Rng) -> f64 {
    use ellopt::grid::ScalarField;
    use ellopt::linsolve::Resolvent;
    let r = Resolvent::new(grid, tol).unwrap();
    let n = grid.dof_count();
    let f = ScalarField::from_dofs(grid, &random_field(rng, n, 0.0, 1.0));
    let g = ScalarField::from_dofs(grid, &random_field(rng, n, 0.0, 1.0));
    let a = g.dot(&r.apply(&f).unwrap()).unwrap();
    let b = f.dot(&r.apply(&g).unwrap()).unwrap();
    (a - b).abs() / a.abs().max(b.abs())
}

/// Worst gradient error of each discrete energy over `fields` random
/// interior fields at smoothing `eps`; returns `(name, worst, worst Hessian)`.
pub fn energy_derivative_errors(grid: &Arc<Grid>, fields: usize, eps: f64, seed: u64) -> Vec<(&'static str, f64, f64)> {
    use ellopt::coefficient::{power_energy, two_phase_energy};
    use ellopt::potential::potential_energy;
    use ellopt::source::source_state_energy;

    let n = grid.dof_count();
    let mut rng = rng(seed);
    let load = random_field(&mut rng, n, 0.0, 2.0);
    let quadratic = ConvexFunctionSpec::Quadratic;
    let cubic = ConvexFunctionSpec::PowerOverP { p: 3.0 };
    let h = grid.h();
    // Field amplitudes put |∇u|² on both sides of the kinks.
    let cases: Vec<(&'static str, GradientEnergy<'_>, f64, f64)> = vec![
        ("dirichlet", GradientEnergy::new(grid, |g| [g, 1.0, 0.0], |_, _| [0.0; 3]), -1.0, 1.0),
        ("power p=2", power_energy(grid, &load, 2.0, eps), -1.0, 1.0),
        ("power p=3", power_energy(grid, &load, 3.0, eps), -1.0, 1.0),
        ("power p=1.5", power_energy(grid, &load, 1.5, eps), -1.0, 1.0),
        ("two-phase", two_phase_energy(grid, &load, 1.0, 2.0, eps), 0.0, 1.5 * h),
        ("potential quadratic", potential_energy(grid, &quadratic, &load), -1.0, 1.0),
        ("potential p=3", potential_energy(grid, &cubic, &load), -1.0, 1.0),
        ("source state", source_state_energy(grid, 0.05, 0.0, 1.0, eps), 0.0, 0.1),
    ];
    cases
        .into_iter()
        .map(|(name, energy, lo, hi)| {
            let (mut grad, mut hess) = (0.0_f64, 0.0_f64);
            for _ in 0..fields {
                let u = random_field(&mut rng, n, lo, hi);
                let v = random_field(&mut rng, n, -1.0, 1.0);
                let delta = 1e-6 * (hi - lo);
                grad = grad.max(gradient_error(&energy, &u, delta));
                hess = hess.max(hessian_error(&energy, &u, &v, 1e-6));
            }
            (name, grad, hess)
        })
        .collect()
}
