use std::path::PathBuf;
use std::process::Command;

use jetgeom::expr::numerically_equivalent;
use jetgeom::models::{cancer_domain, cancer_model};
use jetgeom_cli::main_with;
use jetgeom_cli::system_file::{parse_system_file, SystemFileError};

fn run(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("jetgeom").chain(args.iter().copied()).map(String::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let status = main_with(&argv, &mut out, &mut err);
    (status, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn system_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../systems").join(name)
}

#[test]
fn analyze_hiv_passes_every_check() {
    let (status, out, _) = run(&["analyze", "--model", "hiv1"]);
    assert_eq!(status, 0, "{}", out);
    assert!(out.contains("PASS"));
    assert!(!out.contains("FAIL"));
    assert!(out.contains("torsion"), "{}", out);
    assert!(out.contains("EYM"), "{}", out);
}

#[test]
fn hiv_critical_level_is_the_line() {
    let (status, out, _) = run(&["levelset", "--model", "hiv1", "--C", "0.125", "--k", "1", "--n", "1", "--delta", "1"]);
    assert_eq!(status, 0);
    assert!(out.contains("Line T=0.5, V=0"), "{}", out);
}

#[test]
fn hiv_levels_above_and_below_critical() {
    let (status, out, _) = run(&["levelset", "--model", "hiv1", "--C", "1", "--k", "1", "--n", "1", "--delta", "1"]);
    assert_eq!(status, 0);
    assert!(out.contains("EllipticCylinder"), "{}", out);
    let (status, out, _) = run(&["levelset", "--model", "hiv1", "--C", "0.1", "--k", "1", "--n", "1", "--delta", "1"]);
    assert_eq!(status, 0);
    assert!(out.contains("EmptySet"), "{}", out);
}

#[test]
fn cancer_trace_passes_the_geodesic_check() {
    let (status, out, err) = run(&["trace", "--model", "cancer", "--x0", "1,1", "--t", "5", "--dt", "0.001", "--check-geodesic"]);
    assert_eq!(status, 0, "{}", err);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("t,P,Q"));
    assert_eq!(lines.count(), 5001);
    assert!(err.contains("PASS geodesic-residual"), "{}", err);
}

#[test]
fn trace_writes_csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let (status, out, _) = run(&["trace", "--model", "hiv1", "--x0", "1,1,1", "--t", "1", "--out", path.to_str().unwrap()]);
    assert_eq!(status, 0);
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("t,T,T_star,V\n"));
    assert!(!out.contains("t,T,T_star,V"));
}

#[test]
fn coarse_trace_fails_the_geodesic_check() {
    let (status, _, err) = run(&["trace", "--model", "cancer", "--x0", "1,1", "--t", "5", "--dt", "0.25", "--check-geodesic"]);
    assert_eq!(status, 1, "{}", err);
    assert!(err.contains("FAIL geodesic-residual"), "{}", err);
}

#[test]
fn verify_passes_for_both_models() {
    for model in ["cancer", "hiv1"] {
        let (status, out, _) = run(&["verify", "--model", model, "--samples", "200"]);
        assert_eq!(status, 0, "{}", out);
        assert!(out.contains("PASS golden:EYM"), "{}", out);
        assert!(!out.contains("FAIL"));
    }
}

#[test]
fn cancer_file_matches_the_builtin_model() {
    let text = std::fs::read_to_string(system_path("cancer.sys")).unwrap();
    let s = parse_system_file(&text).unwrap();
    let (builtin, _) = cancer_model(1.0, 1.0, 1.0, 1.0).unwrap();
    assert_eq!(s.states(), builtin.states());
    let dom = cancer_domain();
    let bind = |sys: &jetgeom::OdeSystem, e: &jetgeom::Expr| {
        sys.params().iter().fold(e.clone(), |acc, (name, v)| acc.substitute(name, &jetgeom::Expr::num(*v)))
    };
    for (a, b) in s.components().iter().zip(builtin.components()) {
        assert!(numerically_equivalent(&bind(&s, a), &bind(&builtin, b), &dom).unwrap());
    }
}

#[test]
fn shipped_files_verify() {
    for name in ["cancer.sys", "hiv1.sys"] {
        let path = system_path(name);
        let (status, out, _) = run(&["verify", "--file", path.to_str().unwrap(), "--samples", "100"]);
        assert_eq!(status, 0, "{}: {}", name, out);
    }
}

#[test]
fn missing_equation_names_the_variable() {
    let err = parse_system_file("vars: P Q\neq P: -P\n").unwrap_err();
    assert_eq!(err, SystemFileError::MissingEquation("Q".into()));
    assert!(err.to_string().contains('Q'));
}

#[test]
fn undeclared_identifier_names_the_symbol() {
    let err = parse_system_file("vars: P Q\neq P: -P + z\neq Q: P\n").unwrap_err();
    assert!(matches!(&err, SystemFileError::UndeclaredIdentifier { name, .. } if name == "z"), "{:?}", err);
    assert!(err.to_string().contains("`z`"));
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.sys");
    std::fs::write(&path, "vars: P Q\neq P: -P\n").unwrap();
    let (status, _, err) = run(&["analyze", "--file", path.to_str().unwrap()]);
    assert_eq!(status, 2);
    assert!(err.contains("error:") && err.contains('Q'), "{}", err);
    let (status, _, _) = run(&["analyze", "--file", dir.path().join("absent.sys").to_str().unwrap()]);
    assert_eq!(status, 2);
    let (status, _, _) = run(&["analyze", "--model", "cancer", "--param", "a=-1"]);
    assert_eq!(status, 2);
    let (status, _, _) = run(&["frobnicate"]);
    assert_eq!(status, 2);
}

#[test]
fn reruns_are_byte_identical() {
    let cases: [&[&str]; 4] = [
        &["analyze", "--model", "cancer", "--seed", "7"],
        &["verify", "--model", "hiv1", "--samples", "50", "--seed", "3"],
        &["trace", "--model", "hiv1", "--x0", "2,1,3", "--t", "0.5"],
        &["levelset", "--model", "cancer", "--level", "1", "--grid", "32"],
    ];
    for args in cases {
        assert_eq!(run(args), run(args), "{:?}", args);
    }
}

#[test]
fn binary_outputs_are_byte_identical_and_exit_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_jetgeom");
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let path = dir.path().join(format!("{}.csv", tag));
        let status = Command::new(bin)
            .args(["levelset", "--model", "cancer", "--C", "0", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(String::from_utf8_lossy(&outputs[0]).starts_with("P,Q\n"));

    let output = Command::new(bin).args(["analyze", "--model", "hiv1"]).output().unwrap();
    assert!(output.status.success());
    let failed = Command::new(bin)
        .args(["trace", "--model", "cancer", "--x0", "1,1", "--t", "5", "--dt", "0.25", "--check-geodesic"])
        .output()
        .unwrap();
    assert_eq!(failed.status.code(), Some(1));
}
