use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use updoubling::john_nirenberg::tail_distribution;
use updoubling::rbmo::{build_problem, solve_rbmo};
use updoubling::{Ball, Generator, SpaceFunction};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_updoubling"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s3_args() -> Vec<String> {
    vec![
        "rbmo".into(),
        "--space".into(),
        fixture("s3.json").display().to_string(),
        "--lambda".into(),
        "fit(1)".into(),
        "--function".into(),
        "[0,0,1]".into(),
    ]
}

#[test]
fn s3_family_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let args = s3_args();
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = run(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let produced = std::fs::read_to_string(dir.path().join("family.json")).unwrap();
    let golden = std::fs::read_to_string(fixture("s3_family.json")).unwrap();
    assert_eq!(produced, golden);
    for name in ["slacks.csv", "ball_bounds.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "jn",
        "--generate",
        "cantor_dust(3)",
        "--function",
        "random",
        "--seed",
        "7",
    ];
    assert_eq!(code(&run(&args, a.path())), 0);
    assert_eq!(code(&run(&args, b.path())), 0);
    for name in ["jn.json", "tail.csv", "tail.gp", "lp.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
}

#[test]
fn constant_function_gives_zero_norm() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["rbmo", "--generate", "uniform_grid(6,1)", "--function", "constant(3.5)"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("family.json")).unwrap()).unwrap();
    assert_eq!(doc["A"], 0.0);
}

#[test]
fn large_space_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["rbmo", "--generate", "uniform_grid(25,1)"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("25 points"), "{}", stderr(&o));
    assert!(stderr(&o).contains("--force"));
    assert!(!dir.path().join("family.json").exists());
}

#[test]
fn rho_at_most_one_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["jn", "--generate", "uniform_grid(4,1)", "--rho", "1"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("rho"));
}

#[test]
fn missing_space_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["analyze", "--space", "/nonexistent/space.json"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("/nonexistent/space.json"));
}

#[test]
fn analyze_passes_on_grid_with_ball_measure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["analyze", "--generate", "uniform_grid(16,1)"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in ["diagnostics.json", "lambda.json", "kernel_sweep.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn analyze_reports_misfit_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "analyze",
            "--generate",
            "uniform_grid(10,1)",
            "--lambda",
            "power(0.5,1)",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("domination fails at B("), "{}", stderr(&o));
}

#[test]
fn constant_function_tail_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["jn", "--generate", "uniform_grid(8,1)", "--function", "constant(1)"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("tail.csv")).unwrap(),
        "t,tail,envelope\n"
    );
}

#[test]
fn spike_tail_rows_match_recount() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "jn",
            "--generate",
            "uniform_grid(8,1)",
            "--function",
            "spike(3)",
            "--t-grid",
            "0:1:11",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let space = Generator::UniformGrid { n: 8, dim: 1 }.build().unwrap();
    let f = SpaceFunction::spike(8, 3);
    let lambda = updoubling::dominating::DominatingFunction::ball_measure(&space);
    let family = solve_rbmo(&build_problem(&space, &lambda, &f, 2.0).unwrap()).unwrap();
    let b0 = Ball::new(0, 14.0).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("tail.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    for (i, row) in rows.iter().enumerate() {
        let cols: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        let t = i as f64 / 10.0;
        assert!((cols[0] - t).abs() < 1e-15);
        assert_eq!(cols[1], tail_distribution(&space, &f, &family, &b0, t).unwrap());
    }
}

#[test]
fn maximal_and_generate_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["maximal", "--generate", "cantor_dust(4)"], dir.path())), 0);
    assert!(dir.path().join("maximal.json").exists());
    assert_eq!(
        code(&run(
            &["generate", "--generate", "segment_plus_cluster(5,10)"],
            dir.path()
        )),
        0
    );
    let doc = std::fs::read_to_string(dir.path().join("space.json")).unwrap();
    let space = updoubling::Space::from_json(&doc).unwrap();
    assert_eq!(space.len(), 6);
    assert!(std::fs::read_to_string(dir.path().join("balls.csv"))
        .unwrap()
        .starts_with("center,radius,members,measure"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"generate": "uniform_grid(30,1)", "rho": 3.0}"#).unwrap();
    let cfg = config.display().to_string();
    let refused = run(&["rbmo", "--config", &cfg], dir.path());
    assert_eq!(code(&refused), 2);
    let o = run(
        &["rbmo", "--config", &cfg, "--generate", "uniform_grid(5,1)"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("family.json")).unwrap()).unwrap();
    assert_eq!(doc["rho"], 3.0);
}
