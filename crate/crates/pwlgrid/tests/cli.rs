//! Drives the command-line tool on the bundled 14-bus data.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pwlgrid::{mps, pipeline};
use pwlgrid_core::grid::Network;
use pwlgrid_core::lp::{solve_milp, MilpConfig};
use pwlgrid_core::uc::Formulation;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pwlgrid"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn inputs() -> Vec<String> {
    vec![
        "--case".into(),
        data("case14.m").display().to_string(),
        "--uc".into(),
        data("uc14.toml").display().to_string(),
        "--derate".into(),
        "0.3".into(),
        "--periods".into(),
        "0,6".into(),
    ]
}

fn with_inputs<'a>(head: &[&'a str], input: &'a [String], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(input.iter().map(String::as_str)).chain(tail.iter().copied()).collect()
}

#[test]
fn build_writes_an_mps_file_identical_to_the_library_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dc.mps");
    let input = inputs();
    let p = path.display().to_string();
    let stdout = ok(&with_inputs(&["build", "--formulation", "dc", "--stats"], &input, &["--mps", &p]));
    assert!(!stdout.is_empty());

    let case = pipeline::load_case(&data("case14.m"), 0.3).unwrap();
    let net = Network::build(&case).unwrap();
    let inst = pipeline::load_instance(&data("uc14.toml"), &case, Some(&[0, 6])).unwrap();
    let lin = pipeline::linearization_point(&net, &inst, &Default::default()).unwrap();
    let uc = pipeline::build_formulation(Formulation::Dc, &inst, &net, &lin, None).unwrap();
    let parsed = mps::parse_mps(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!(mps::same_structure(&uc.milp, &parsed));
}

#[test]
fn solve_then_verify_round_trips_a_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("linear.sched").display().to_string();
    let report = dir.path().join("linear.report").display().to_string();
    let input = inputs();
    let stdout = ok(&with_inputs(&["solve", "--formulation", "linear"], &input, &["--out", &sched]));
    assert!(stdout.contains("status"));
    let verdict = ok(&with_inputs(&["verify-schedule", "--schedule", &sched], &input, &["--out", &report]));
    assert!(verdict.contains("verdict feasible"), "{verdict}");
    assert!(Path::new(&report).exists());
}

#[test]
fn export_engine_accepts_an_external_solution() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("dc.mps");
    let solution = dir.path().join("dc.sol");
    let input = inputs();
    let m = model.display().to_string();
    ok(&with_inputs(&["solve", "--formulation", "dc", "--engine", "export"], &input, &["--mps", &m]));

    // Stand-in for an external solver: solve the exported file in-process.
    let milp = mps::parse_mps(&std::fs::read_to_string(&model).unwrap()).unwrap();
    let sol = solve_milp(&milp, &MilpConfig::default(), &pipeline::WallClock::start()).unwrap();
    std::fs::write(&solution, mps::write_solution(&milp, &sol.x)).unwrap();

    let s = solution.display().to_string();
    let stdout = ok(&with_inputs(&["solve", "--formulation", "dc", "--engine", "export"], &input, &["--solution", &s]));
    let imported: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("imported objective "))
        .expect("objective line")
        .trim()
        .parse()
        .unwrap();
    assert!((imported - sol.objective).abs() <= 1e-6 * (1.0 + sol.objective.abs()));

    // A corrupted point is rejected with a location.
    let bad: String = mps::write_solution(&milp, &sol.x)
        .lines()
        .enumerate()
        .map(|(k, l)| if k == 0 { format!("{} 1e6\n", l.split_whitespace().next().unwrap()) } else { format!("{l}\n") })
        .collect();
    std::fs::write(&solution, bad).unwrap();
    let out = run(&with_inputs(&["solve", "--formulation", "dc", "--engine", "export"], &input, &["--solution", &s]));
    assert!(!out.status.success());
}

#[test]
fn report_regenerates_tables_from_a_scenario_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scenarios.csv");
    std::fs::write(
        &csv,
        "scheme,index,formulation,uc_status,verdict,uc_objective,gap,acopf_objective,flow_err_ft,flow_err_tf\n\
         uniform,0,nn,optimal,feasible,10,0,11,0.1,0.2\n\
         uniform,0,linear,optimal,feasible,10,0,11,0.3,0.4\n\
         uniform,0,dc,optimal,infeasible,9,0,,,\n",
    )
    .unwrap();
    let out = dir.path().join("reports");
    let stdout = ok(&["report", "--scenarios", &csv.display().to_string(), "--out", &out.display().to_string()]);
    assert!(stdout.contains("formulation"));
    for name in ["tally.txt", "scenarios.csv", "flow_errors.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let flows = std::fs::read_to_string(out.join("flow_errors.csv")).unwrap();
    assert_eq!(flows.lines().count(), 3);
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let out = run(&["build", "--formulation", "dc", "--case", "missing.m", "--uc", "missing.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.m"));

    let input = inputs();
    let out = run(&with_inputs(&["build", "--formulation", "nn"], &input, &[]));
    assert!(!out.status.success(), "the nn formulation needs a model");

    let out = run(&with_inputs(&["build", "--formulation", "ac"], &input, &[]));
    assert!(!out.status.success());
}
