use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use cccp::beamform::ExperimentConfig;
use cccp::files::{from_json, ResultFile};
use cccp::validate::ValidationReport;
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn cccp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cccp"))
        .args(args)
        .env_remove("CCCP_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn solve_to(dir: &Path, problem: &Path, method: &str) -> (PathBuf, ResultFile) {
    let out = dir.join(format!("{method}.json"));
    let o = cccp(&["solve", problem.to_str().unwrap(), "--method", method, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let result = ResultFile::parse(&fs::read_to_string(&out).unwrap()).unwrap();
    (out, result)
}

#[test]
fn individual_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let (_, result) = solve_to(dir.path(), &data("individual.json"), "individual");
    let golden: Value = serde_json::from_str(&fs::read_to_string(data("golden_individual.json")).unwrap()).unwrap();
    let sol = result.solution.unwrap();
    assert!((sol.objective - golden["objective"].as_f64().unwrap()).abs() < 1e-6);
    assert!((sol.z.re[0] - golden["z"]["re"][0].as_f64().unwrap()).abs() < 1e-6);
    assert!((sol.z.im[0] - golden["z"]["im"][0].as_f64().unwrap()).abs() < 1e-6);
}

#[test]
fn joint_bounds_are_ordered() {
    let o = cccp(&["solve", data("joint_two_row.json").to_str().unwrap(), "--method", "joint-bounds"]);
    assert_eq!(code(&o), 0);
    let r = ResultFile::parse(&stdout(&o)).unwrap();
    let b = r.bounds.unwrap();
    assert!(b.lower <= b.upper, "{b:?}");
    assert_eq!(b.points, 10);
}

#[test]
fn every_method_runs_on_the_joint_example() {
    for method in ["individual", "joint-lower", "joint-upper", "joint-bounds", "joint-grid"] {
        let o = cccp(&["solve", data("joint_two_row.json").to_str().unwrap(), "--method", method, "--tangents", "5"]);
        assert_eq!(code(&o), 0, "{method}: {}", stderr(&o));
    }
}

fn edited(dir: &Path, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(data("individual.json")).unwrap();
    assert!(text.contains(from));
    let path = dir.join("edited.json");
    fs::write(&path, text.replacen(from, to, 1)).unwrap();
    path
}

#[test]
fn malformed_level_exits_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = edited(dir.path(), "\"p\": 0.9", "\"p\": 1.2");
    let out = dir.path().join("never.json");
    let o = cccp(&["solve", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("rows[0].p"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_method_is_rejected() {
    let o = cccp(&["solve", data("individual.json").to_str().unwrap(), "--method", "joint"]);
    assert_ne!(code(&o), 0);
}

#[test]
fn infeasible_problem_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("joint_two_row.json")).unwrap();
    let path = dir.path().join("infeasible.json");
    fs::write(&path, text.replacen("\"mean_re\": 1.5", "\"mean_re\": -1.5", 1)).unwrap();
    let out = dir.path().join("r.json");
    let o = cccp(&["solve", path.to_str().unwrap(), "--method", "individual", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let r = ResultFile::parse(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(r.solution.is_none());
}

fn validate(problem: &Path, solution: &Path, extra: &[&str]) -> (i32, ValidationReport) {
    let mut args = vec!["validate", problem.to_str().unwrap(), "--solution", solution.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = cccp(&args);
    let report = from_json(&stdout(&o)).unwrap_or_else(|e| panic!("{e}: {}", stderr(&o)));
    (code(&o), report)
}

#[test]
fn validate_individual_solution() {
    let dir = tempfile::tempdir().unwrap();
    let (sol, _) = solve_to(dir.path(), &data("individual.json"), "individual");
    let (c, report) = validate(&data("individual.json"), &sol, &["--seed", "3"]);
    assert_eq!(c, 0);
    assert_eq!(report.samples, 100_000);
    for (row, target) in report.rows.iter().zip([0.9, 0.95]) {
        assert!(row.probability >= target - 0.01, "{row:?}");
    }
}

#[test]
fn validate_single_row_joint_equals_marginal() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(data("joint_two_row.json")).unwrap()).unwrap();
    doc["rows"].as_array_mut().unwrap().truncate(1);
    let path = dir.path().join("one_row.json");
    fs::write(&path, doc.to_string()).unwrap();
    let (sol, _) = solve_to(dir.path(), &path, "joint-grid");
    let (c, report) = validate(&path, &sol, &[]);
    assert_eq!(c, 0);
    assert_eq!(report.joint.as_ref().unwrap().probability, report.rows[0].probability);
}

#[test]
fn validate_joint_grid_solution_and_detect_violation() {
    let dir = tempfile::tempdir().unwrap();
    let problem = data("joint_two_row.json");
    let (sol, result) = solve_to(dir.path(), &problem, "joint-grid");
    let (c, report) = validate(&problem, &sol, &["--samples", "100000"]);
    assert_eq!(c, 0);
    assert!(report.joint.unwrap().probability >= 0.9 - 0.01);

    let mut bad = result.clone();
    let s = bad.solution.as_mut().unwrap();
    s.z.re.iter_mut().chain(s.z.im.iter_mut()).for_each(|v| *v *= 3.0);
    let bad_path = dir.path().join("bad.json");
    fs::write(&bad_path, bad.to_json().unwrap()).unwrap();
    let (c, report) = validate(&problem, &bad_path, &[]);
    assert_eq!(c, 2);
    assert!(!report.pass());
}

#[test]
fn validate_dimension_mismatch_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (sol, _) = solve_to(dir.path(), &data("individual.json"), "individual");
    let o = cccp(&["validate", data("joint_two_row.json").to_str().unwrap(), "--solution", sol.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn result_file_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = cccp(&[
        "solve",
        data("joint_two_row.json").to_str().unwrap(),
        "--method",
        "joint-bounds",
        "--validate",
        "20000",
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(&out).unwrap();
    let parsed = ResultFile::parse(&text).unwrap();
    assert_eq!(format!("{}\n", parsed.to_json().unwrap()), text);
    assert_eq!(parsed.seed, Some(11));
    assert_eq!(parsed.validation.unwrap().samples, 20000);
}

#[test]
fn bundled_configs_equal_defaults() {
    let fig1: ExperimentConfig = from_json(&fs::read_to_string(data("fig1.json")).unwrap()).unwrap();
    assert_eq!(fig1, ExperimentConfig::fig1());
    let fig2: ExperimentConfig = from_json(&fs::read_to_string(data("fig2.json")).unwrap()).unwrap();
    assert_eq!(fig2, ExperimentConfig::fig2());
    let sc = &fig1.scenario;
    assert_eq!((sc.sensors, sc.snapshots, sc.confidence, sc.spacing), (8, 100, 0.95, 0.5));
    assert_eq!(fig1.inr_db, vec![5.0, 20.0, 40.0]);
    assert_eq!((fig2.scenario.alpha, fig2.inr_db.clone(), fig2.scenario.runs), (Some(0.7), vec![20.0], 100));
}

fn beamform(experiment: &str, out: &Path, seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cccp"));
    cmd.args(["beamform", "--experiment", experiment, "--runs", "2", "--out", out.to_str().unwrap()]);
    match seed {
        Some(s) => cmd.env("CCCP_SEED", s),
        None => cmd.env_remove("CCCP_SEED"),
    };
    cmd.output().unwrap()
}

#[test]
fn fig1_smoke_is_fast_and_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let start = Instant::now();
    let o = beamform("fig1", &a, None);
    assert!(start.elapsed() < Duration::from_secs(60));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&beamform("fig1", &b, None)), 0);
    for name in ["fig1_inr5.csv", "fig1_inr20.csv", "fig1_inr40.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("fig1_inr20.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("snr_db,method,mean_sinr_db,std_sinr_db,runs,failures"));
    assert_eq!(lines.count(), 9 * 3);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 20240101);
    assert_eq!(manifest["files"][0]["scenario"]["sensors"], 8);
    assert_eq!(manifest["files"][0]["scenario"]["runs"], 2);
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&beamform("fig1", &a, Some("7"))), 0);
    assert_eq!(code(&beamform("fig1", &b, None)), 0);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_ne!(fs::read(a.join("fig1_inr20.csv")).unwrap(), fs::read(b.join("fig1_inr20.csv")).unwrap());
}

#[test]
fn fig2_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let o = beamform("fig2", dir.path(), None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("fig2_inr20.csv")).unwrap();
    assert!(csv.contains(",joint,") && csv.contains(",individual,"));
}

#[test]
fn config_without_alpha_fails_for_fig2() {
    let dir = tempfile::tempdir().unwrap();
    let o = cccp(&[
        "beamform",
        "--experiment",
        "fig2",
        "--config",
        data("fig1.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
}
