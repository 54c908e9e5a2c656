use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gfpk(mode: &str, toml: &str, dir: &Path) -> Output {
    let config = dir.join("run.toml");
    std::fs::write(&config, toml).unwrap();
    Command::new(env!("CARGO_BIN_EXE_gfpk"))
        .arg(mode)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--threads")
        .arg("2")
        .output()
        .expect("gfpk runs")
}

fn report(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("out/report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn solve_linear_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
        k = 2
        degree = 10
        quadrature = 14
        [drift]
        kind = "constant"
        value = [0.3, -0.2]
    "#;
    let out = gfpk("solve-linear", toml, dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["pass"], true);
    assert_eq!(r["mode"], "solve-linear");
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("out/density.json").exists());

    let verify_dir = tempfile::tempdir().unwrap();
    let density = dir.path().join("out/density.json");
    let toml = format!(
        r#"
        k = 2
        degree = 10
        quadrature = 14
        [drift]
        kind = "constant"
        value = [0.3, -0.2]
        [verify]
        input = "{}"
        "#,
        density.display()
    );
    let out = gfpk("verify", &toml, verify_dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(verify_dir.path())["pass"], true);
}

#[test]
fn verify_rejects_a_wrong_density() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
        k = 1
        degree = 8
        quadrature = 12
        [drift]
        kind = "constant"
        value = [0.3]
    "#;
    assert_eq!(code(&gfpk("solve-linear", toml, dir.path())), 0);
    // the same density checked against a different drift
    let other = tempfile::tempdir().unwrap();
    let toml = format!(
        r#"
        k = 1
        degree = 8
        quadrature = 12
        [drift]
        kind = "constant"
        value = [-0.3]
        [verify]
        input = "{}"
        "#,
        dir.path().join("out/density.json").display()
    );
    let out = gfpk("verify", &toml, other.path());
    assert_eq!(code(&out), 1);
    assert_eq!(report(other.path())["pass"], false);
}

#[test]
fn unknown_key_is_a_config_error_with_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
        k = 1
        degree = 4
        quadrature = 6
        dampnig = 0.5
        [drift]
        kind = "zero"
    "#;
    let out = gfpk("solve-linear", toml, dir.path());
    assert_eq!(code(&out), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn too_few_nodes_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
        k = 1
        degree = 8
        quadrature = 4
        [drift]
        kind = "zero"
    "#;
    assert_eq!(code(&gfpk("solve-linear", toml, dir.path())), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn sweep_over_constant_drifts() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
        k = 1
        degree = 12
        quadrature = 16
        [drift]
        kind = "constant"
        value = [1.0]
        [sweep]
        values = [0.0, 0.1, 0.2]
    "#;
    let out = gfpk("sweep", toml, dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        // shifted Gaussian: ‖exp(u x − u²/2)‖² in L²(γ) is exp(u²)
        let u: f64 = row[0].parse().unwrap();
        let l2sq: f64 = row[3].parse().unwrap();
        assert!((l2sq - (u * u).exp()).abs() < 1e-8, "u = {u}: {l2sq}");
    }
    let d01: f64 = rows[0][4].parse().unwrap();
    let d12: f64 = rows[1][4].parse().unwrap();
    assert!(d01 > 0.0 && d12 > d01);
    assert!(dir.path().join("out/sweep.json").exists());
}

#[test]
fn small_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
        k = 2
        degree = 6
        quadrature = 10
        [drift]
        kind = "componentwise"
        measure_quadrature = 6
        components = [
            { type = "vlasov_tanh", scale = 0.3, coord = 0 },
            { type = "tanh", scale = 0.3, coord = 1 },
        ]
        [ladder]
        bound_c = 0.3
    "#;
    let out = gfpk("ladder", toml, dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/ladder.csv")).unwrap();
    assert!(csv.starts_with("k,m_k,bound,eps_quad,pass,d_next"));
    assert_eq!(csv.lines().count(), 3);
    let ladder: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/ladder.json")).unwrap())
            .unwrap();
    assert_eq!(ladder["levels"].as_array().unwrap().len(), 2);
}

#[test]
fn sde_oracle_on_a_shifted_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
        k = 1
        degree = 10
        quadrature = 14
        seed = 7
        [drift]
        kind = "constant"
        value = [0.3]
        [oracle]
        kind = "sde"
        dt = 0.01
        steps = 2000
        particles = 20
        batches = 10
    "#;
    let out = gfpk("oracle-compare", toml, dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/oracle.csv").exists());
}

#[test]
fn non_convergence_is_a_solver_error_with_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
        k = 1
        degree = 8
        quadrature = 12
        [drift]
        kind = "vlasov"
        measure_quadrature = 8
        kernel = { type = "tanh", scale = [0.2] }
        [fixed_point]
        tolerance = 1e-14
        max_iterations = 2
    "#;
    let out = gfpk("solve-nonlinear", toml, dir.path());
    assert_eq!(code(&out), 3);
    let r = report(dir.path());
    assert!(r["error"].is_string());
    let trace = std::fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);
}

#[test]
fn failed_sweep_row_is_a_check_failure() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
        k = 1
        degree = 8
        quadrature = 12
        [drift]
        kind = "vlasov"
        measure_quadrature = 8
        kernel = { type = "tanh", scale = [1.0] }
        [fixed_point]
        tolerance = 1e-14
        max_iterations = 2
        [sweep]
        values = [0.0, 0.5]
    "#;
    let out = gfpk("sweep", toml, dir.path());
    assert_eq!(code(&out), 1);
    let checks = report(dir.path())["checks"].as_array().unwrap().clone();
    assert_eq!(checks[0]["pass"], true);
    assert_eq!(checks[1]["pass"], false);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "k = 1\ndegree = 4\nquadrature = 6\nseed = 1\n[drift]\nkind = \"zero\"\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gfpk"))
        .args(["solve-linear", "--seed", "42", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(report(dir.path())["seed"], 42);
}
