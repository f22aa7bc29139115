//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

mod common;

use std::path::Path;
use std::time::Instant;

use ellopt::coefficient::{gclosure_contains_tsearch, lens_contains, EigenPairCandidate};
use ellopt::grid::Grid;
use ellopt::io::read_csv;
use ellopt::runner::{find_preset, run, RunOutcome};

struct Verdict {
    passed: bool,
    detail: String,
}

type Criterion<'a> = Box<dyn Fn() -> Result<Verdict, String> + 'a>;

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn run_preset(name: &str, h: Option<f64>, root: &Path) -> Result<RunOutcome, String> {
    let config = find_preset(name).ok_or(format!("no preset {name}"))?.config(h);
    run(&config, &root.join(format!("{name}-{}", config.h.recip().round()))).map_err(|e| e.to_string())
}

fn number(outcome: &RunOutcome, key: &str) -> f64 {
    outcome.summary.get(key).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

fn preset_check(outcome: &RunOutcome) -> Verdict {
    match &outcome.summary.check {
        Some(c) => verdict(c.passed && outcome.converged, c.detail.clone()),
        None => verdict(false, "no check attached"),
    }
}

fn ex1(root: &Path) -> Result<Verdict, String> {
    let start = Instant::now();
    let outcome = run_preset("ex1-disk-f1-p2", None, root)?;
    let secs = start.elapsed().as_secs_f64();
    let check = preset_check(&outcome);
    Ok(verdict(check.passed && secs <= 60.0, format!("{} runtime={secs:.1}s(<=60)", check.detail)))
}

fn dirac(root: &Path) -> Result<Verdict, String> {
    Ok(preset_check(&run_preset("ex1-disk-dirac-p2", None, root)?))
}

fn eigen(root: &Path) -> Result<Verdict, String> {
    let square = preset_check(&run_preset("eig-square", None, root)?);
    let ellipse = preset_check(&run_preset("eig-ellipse", None, root)?);
    Ok(verdict(square.passed && ellipse.passed, format!("square: {} ellipse: {}", square.detail, ellipse.detail)))
}

fn self_consistency(root: &Path) -> Result<Verdict, String> {
    Ok(preset_check(&run_preset("potential-compliance-disk", None, root)?))
}

fn bang_bang(root: &Path) -> Result<Verdict, String> {
    let fine = run_preset("ex31-bangbang-potential", None, root)?;
    let coarse = run_preset("ex31-bangbang-potential", Some(1.0 / 32.0), root)?;
    let check = preset_check(&fine);
    let (pf, pc) = (number(&fine, "beta_perimeter"), number(&coarse, "beta_perimeter"));
    let ratio = pf.max(pc) / pf.min(pc);
    let passed = check.passed && pf.is_finite() && pf > 0.0 && ratio <= 1.5;
    Ok(verdict(passed, format!("{} perimeter h={pf:.4} 2h={pc:.4} ratio={ratio:.3}(<=1.5)", check.detail)))
}

fn compliance_source(root: &Path) -> Result<Verdict, String> {
    let outcome = run_preset("complper-disk", None, root)?;
    let check = preset_check(&outcome);
    let config = find_preset("complper-disk").unwrap().config(None);
    let grid = Grid::build(config.domain.clone(), config.h).map_err(|e| e.to_string())?;
    let file = std::fs::File::open(outcome.dir.join("f.csv")).map_err(|e| e.to_string())?;
    let f = read_csv(&grid, file).map_err(|e| e.to_string())?;
    let binary = grid.interior_nodes().iter().all(|&n| matches!(f.get(n), 0.0 | 1.0));
    let reported = ["convexity_defect_complement", "convexity_defect_E"].iter().all(|k| number(&outcome, k).is_finite());
    Ok(verdict(
        check.passed && binary && reported,
        format!(
            "{} binary={binary} defect_E={}",
            check.detail,
            outcome.summary.get("convexity_defect_E").unwrap_or("?")
        ),
    ))
}

fn convex_suite() -> Result<Verdict, String> {
    let (mut conj, mut young, mut monotone) = (0.0_f64, f64::INFINITY, true);
    let lin = |n: usize, lo: f64, hi: f64| (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64);
    for psi in common::all_psi() {
        for t in lin(401, 0.0, 10.0) {
            let exact = psi.conjugate(t);
            conj = conj.max((exact - common::brute_conjugate(&psi, t)).abs() / exact.abs().max(1.0));
        }
        for s in lin(100, -1.0, 5.0) {
            for t in lin(100, -5.0, 10.0) {
                young = young.min(psi.fenchel_residual(s, t));
            }
        }
        let ts: Vec<f64> = lin(1001, -5.0, 10.0).collect();
        monotone &= ts.windows(2).all(|w| psi.h(w[0]) <= psi.h(w[1]) && psi.h_minus(w[0]) <= psi.h_minus(w[1]));
        monotone &= ts.iter().all(|&t| psi.h_minus(t) <= psi.h(t));
    }
    Ok(verdict(
        conj <= 1e-8 && young >= -1e-12 && monotone,
        format!("conjugate_error={conj:.2e}(<=1e-8) min_young={young:.2e}(>=-1e-12) h_monotone={monotone}"),
    ))
}

fn gradient_checks() -> Result<Verdict, String> {
    let errors = common::energy_derivative_errors(&common::small_square(), 20, 1e-2, 2024);
    let (name, worst) = errors.iter().map(|(n, g, _)| (*n, *g)).max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    Ok(verdict(worst <= 1e-5, format!("{} energies, worst={worst:.2e} ({name}) (<=1e-5)", errors.len())))
}

fn gclosure(root: &Path) -> Result<Verdict, String> {
    let check = preset_check(&run_preset("gclosure-scan", None, root)?);
    let boundary = [4.0 / 3.0, 5.0 / 3.0].iter().all(|&l2| {
        let cand = EigenPairCandidate::new(vec![1.5, l2], 1.0, 2.0);
        lens_contains(&cand) && gclosure_contains_tsearch(&cand)
    });
    Ok(verdict(check.passed && boundary, format!("{} boundary_inside={boundary}", check.detail)))
}

fn self_adjoint() -> Result<Verdict, String> {
    let tol = 1e-10;
    let mut rng = common::rng(10);
    let mut parts = Vec::new();
    let mut passed = true;
    for (name, domain) in common::preset_domains() {
        let grid = Grid::build(domain, 1.0 / 64.0).map_err(|e| e.to_string())?;
        let worst = (0..20).map(|_| common::self_adjoint_gap(&grid, tol, &mut rng)).fold(0.0, f64::max);
        passed &= worst <= 10.0 * tol;
        parts.push(format!("{name}={worst:.1e}"));
    }
    Ok(verdict(passed, format!("{} (<={:.0e})", parts.join(" "), 10.0 * tol)))
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let root = dir.path();
    let criteria: [(&str, Criterion<'_>); 10] = [
        ("power-law coefficient regression", Box::new(|| ex1(root))),
        ("point-mass regression", Box::new(|| dirac(root))),
        ("eigenvalues", Box::new(|| eigen(root))),
        ("potential self-consistency", Box::new(|| self_consistency(root))),
        ("bang-bang potential", Box::new(|| bang_bang(root))),
        ("compliance source", Box::new(|| compliance_source(root))),
        ("convex-analysis suite", Box::new(convex_suite)),
        ("gradient checks", Box::new(gradient_checks)),
        ("G-closure oracle equivalence", Box::new(|| gclosure(root))),
        ("resolvent self-adjointness", Box::new(self_adjoint)),
    ];
    let mut failures = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        let v = criterion().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        failures += usize::from(!v.passed);
        println!("criterion {:2} {}: {} | {}", i + 1, if v.passed { "PASS" } else { "FAIL" }, name, v.detail);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
