use std::fs;

use ellopt::grid::{DomainSpec, Grid, ScalarField};
use ellopt::io::{read_csv, write_csv, write_vtk};
use ellopt::runner::{exit_code, find_preset, run, ExperimentConfig, PRESETS};
use ellopt::Error;
use proptest::prelude::*;

#[test]
fn every_preset_round_trips_through_toml() {
    for p in PRESETS {
        let config = p.config(Some(1.0 / 16.0));
        config.validate().unwrap();
        let text = config.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), config, "{}", p.name);
    }
}

#[test]
fn runs_are_byte_for_byte_deterministic() {
    let config = find_preset("ex1-disk-f1-p2").unwrap().config(Some(1.0 / 16.0));
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run(&config, a.path()).unwrap();
    let second = run(&config, b.path()).unwrap();
    for file in ["u.csv", "u.vtk", "a_opt.csv", "a_opt.vtk", "summary.txt", "config.toml"] {
        let (x, y) = (fs::read(first.dir.join(file)).unwrap(), fs::read(second.dir.join(file)).unwrap());
        assert!(!x.is_empty() && x == y, "{file} differs");
    }
    let scan = find_preset("gclosure-scan").unwrap().config(None);
    let (c, d) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (s1, s2) = (run(&scan, c.path()).unwrap(), run(&scan, d.path()).unwrap());
    assert_eq!(fs::read(s1.dir.join("gclosure.csv")).unwrap(), fs::read(s2.dir.join("gclosure.csv")).unwrap());
    assert_eq!(s1.summary.check.unwrap().passed, true);
}

#[test]
fn outputs_have_the_documented_formats() {
    let config = find_preset("potential-compliance-disk").unwrap().config(Some(1.0 / 16.0));
    let dir = tempfile::tempdir().unwrap();
    let outcome = run(&config, dir.path()).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    let csv = fs::read_to_string(outcome.dir.join("u.csv")).unwrap();
    assert!(csv.starts_with("x,y,value\n"));
    let vtk = fs::read_to_string(outcome.dir.join("V.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));
    assert!(vtk.contains("DATASET STRUCTURED_POINTS") && vtk.contains("NaN"));
    let summary = fs::read_to_string(outcome.dir.join("summary.txt")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("check = PASS")), "{summary}");
    let saved = ExperimentConfig::from_toml(&fs::read_to_string(outcome.dir.join("config.toml")).unwrap()).unwrap();
    assert_eq!(saved, config);
}

#[test]
fn explicit_output_directory_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = find_preset("eig-square").unwrap().config(Some(1.0 / 16.0));
    config.output = Some(dir.path().join("custom"));
    let outcome = run(&config, &dir.path().join("ignored")).unwrap();
    assert!(outcome.dir.ends_with("custom") && outcome.dir.join("f.csv").exists());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn invalid_configs_map_to_exit_code_two() {
    let cases = [
        "name = \"x\"\nh = 0.1\n[domain]\nkind = \"unit_square\"\n[problem]\nkind = \"coefficient_two_phase\"\nalpha = 2.0\nbeta = 1.0\nf = { kind = \"constant\", value = 1.0 }\n",
        "name = \"x\"\nh = -1.0\n[domain]\nkind = \"unit_square\"\n[problem]\nkind = \"source_eigen\"\nm = 1.0\n",
        "name = \"x\"\nh = 0.1\n[domain]\nkind = \"unit_square\"\n[problem]\nkind = \"no_such_problem\"\n",
        "name = \"x\"\nh = 0.1\nbogus = 3\n[domain]\nkind = \"unit_square\"\n[problem]\nkind = \"source_eigen\"\nm = 1.0\n",
    ];
    let dir = tempfile::tempdir().unwrap();
    for text in cases {
        let err = ExperimentConfig::from_toml(text).and_then(|c| run(&c, dir.path()).map(|_| ())).unwrap_err();
        assert_eq!(exit_code(&err), 2, "{err}");
    }
}

#[test]
fn error_classes_have_distinct_exit_codes() {
    let io = Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "x"));
    assert_eq!(exit_code(&io), 4);
    assert_eq!(exit_code(&Error::Bracket("x".into())), 3);
    assert_eq!(exit_code(&Error::GridMismatch), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn csv_round_trip_is_exact(seed in any::<u64>(), n in 4usize..20) {
        let g = Grid::build(DomainSpec::unit_disk(), 1.0 / n as f64).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| (seed as f64 * 1e-3 + x).sin() * y.exp());
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let back = read_csv(&g, buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), f.values());
        let mut vtk = Vec::new();
        write_vtk(&f, "f", &mut vtk).unwrap();
        let masked = g.node_count() - g.dof_count();
        prop_assert_eq!(String::from_utf8(vtk).unwrap().matches("NaN").count(), masked);
    }
}
