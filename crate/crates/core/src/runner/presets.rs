//! Named, ready-to-run configurations.

use super::config::{Check, ExperimentConfig, Problem, Shape, Source};
use crate::convex::ConvexFunctionSpec;
use crate::grid::DomainSpec;

pub const DEFAULT_H: f64 = 1.0 / 64.0;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> (DomainSpec, Problem, Option<Check>),
}

impl Preset {
    pub fn config(&self, h: Option<f64>) -> ExperimentConfig {
        let (domain, problem, check) = (self.build)();
        ExperimentConfig {
            name: self.name.to_string(),
            h: h.unwrap_or(DEFAULT_H),
            tol: 1e-8,
            output: None,
            domain,
            problem,
            check,
        }
    }
}

fn balls_and_bar_source() -> Source {
    Source::IndicatorUnion {
        shapes: vec![
            Shape::Ball { center: [0.35, 0.45], radius: 0.2 },
            Shape::Ball { center: [-0.35, 0.45], radius: 0.2 },
            Shape::Box { min: [-0.5, -0.5], max: [0.5, -0.25] },
        ],
        value: 1.0,
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "ex1-disk-f1-p2",
        description: "power-law coefficient, unit disk, f = 1, p = 2; closed-form u and a_opt",
        build: || {
            (
                DomainSpec::unit_disk(),
                Problem::CoefficientPower { p: 2.0, f: Source::Constant { value: 1.0 } },
                Some(Check::PowerClosedForm { u_tol: 0.02, a_tol: 0.05, a_min_radius: 0.1 }),
            )
        },
    },
    Preset {
        name: "ex1-disk-dirac-p2",
        description: "power-law coefficient, unit disk, unit point mass at 0, p = 2; closed-form u",
        build: || {
            (
                DomainSpec::unit_disk(),
                Problem::CoefficientPower { p: 2.0, f: Source::PointMass { at: [0.0, 0.0], weight: 1.0 } },
                Some(Check::DiracClosedForm { tol: 0.08, r_min: 0.3, r_max: 0.8 }),
            )
        },
    },
    Preset {
        name: "ex2-two-phase-disk",
        description: "two-phase coefficient in [1, 2], unit disk, f = 4",
        build: || {
            (
                DomainSpec::unit_disk(),
                // Below 1e-4 the smoothed energy moves by under 1e-6 relative
                // while the solve time grows sixfold.
                Problem::CoefficientTwoPhase {
                    alpha: 1.0,
                    beta: 2.0,
                    f: Source::Constant { value: 4.0 },
                    eps_final: 1e-4,
                },
                None,
            )
        },
    },
    Preset {
        name: "potential-compliance-disk",
        description: "compliance-optimal potential with quadratic cost, unit disk, f = 1",
        build: || {
            (
                DomainSpec::unit_disk(),
                Problem::PotentialCompliance { psi: ConvexFunctionSpec::Quadratic, f: Source::Constant { value: 1.0 } },
                Some(Check::SelfConsistency { tol: 1e-6 }),
            )
        },
    },
    Preset {
        name: "ex31-bangbang-potential",
        description: "bang-bang potential in {0, 1}, k = 0.00225, two balls and a bar as source",
        build: || {
            (
                DomainSpec::unit_disk(),
                Problem::PotentialBangbang { alpha: 0.0, beta: 1.0, k: 0.00225, f: balls_and_bar_source() },
                Some(Check::BangBang { purity: 0.01 }),
            )
        },
    },
    Preset {
        name: "complper-disk",
        description: "compliance-optimal source in [0, 1] with volume pi/2, unit disk",
        build: || {
            (
                DomainSpec::unit_disk(),
                Problem::SourceCompliance { alpha: 0.0, beta: 1.0, m: std::f64::consts::FRAC_PI_2 },
                Some(Check::VolumeLayer { max_defect: 0.05 }),
            )
        },
    },
    Preset {
        name: "eig-ellipse",
        description: "eigenvalue source, ellipse with semi-axes 2 and 1, m = 1/2; lambda = 0.0785912",
        build: || {
            (
                DomainSpec::Ellipse { a: 2.0, b: 1.0 },
                Problem::SourceEigen { m: 0.5 },
                Some(Check::EigenSourceLambda { expected: 0.0785912, rel_tol: 0.02 }),
            )
        },
    },
    Preset {
        name: "eig-square",
        description: "eigenvalue source, unit square, m = 1/2; first eigenvalue 2 pi^2",
        build: || {
            (
                DomainSpec::UnitSquare,
                Problem::SourceEigen { m: 0.5 },
                Some(Check::FirstEigenvalue { expected: 2.0 * std::f64::consts::PI * std::f64::consts::PI, rel_tol: 0.005 }),
            )
        },
    },
    Preset {
        name: "gclosure-scan",
        description: "G-closure membership, sampled t-search against the lens, materials 1 and 2",
        build: || {
            (
                DomainSpec::UnitSquare,
                Problem::GclosureScan { alpha: 1.0, beta: 2.0, samples: 10_000, seed: 1 },
                Some(Check::GclosureAgreement),
            )
        },
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
