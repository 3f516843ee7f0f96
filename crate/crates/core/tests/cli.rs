use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use brw::config::parse_config_str;
use brw::output::config_from_comments;

const REFERENCE: &str = "dim = 1
[[kernel]]
offset = [1]
rate = 0.5
[[kernel]]
offset = [-1]
rate = 0.5
[[sources]]
position = [0]
coefficients = [1.0, -3.0, 2.0]
";

fn brw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brw")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn lambda0_of_the_reference_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ref.toml", REFERENCE);
    let out = brw(&["lambda0", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let lambda0 = v["result"]["lambda0"].as_f64().unwrap();
    assert!((lambda0 - 0.4142136).abs() < 1e-7);
    assert!(v["result"]["residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["header"]["command"], "lambda0");
    assert_eq!(v["header"]["config"]["sources"][0]["coefficients"][2], 2.0);
}

#[test]
fn broken_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let asymmetric = REFERENCE.replacen("rate = 0.5", "rate = 0.7", 1);
    let cfg = write(dir.path(), "asym.toml", &asymmetric);
    let out = brw(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kernel"));

    let unknown = format!("{REFERENCE}beta_total = 3\n");
    let cfg = write(dir.path(), "unknown.toml", &unknown);
    let out = brw(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta_total"));

    let out = brw(&["validate", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn subcritical_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("dim = 3\n");
    for axis in 0..3 {
        for sign in [1, -1] {
            let mut offset = [0; 3];
            offset[axis] = sign;
            text.push_str(&format!("[[kernel]]\noffset = {offset:?}\nrate = 0.5\n"));
        }
    }
    text.push_str("[[sources]]\nposition = [0, 0, 0]\ncoefficients = [0.5, -1.5, 1.0]\n");
    let cfg = write(dir.path(), "weak.toml", &text);
    let out = brw(&["lambda0", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["result"]["verdict"], "absent");
}

#[test]
fn csv_outputs_carry_a_reproducible_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ref.toml", REFERENCE);
    let out = brw(&["symbol", cfg.to_str().unwrap(), "--points", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "theta1,phi");
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[5], "3.141592653589793,-2");
    let recovered = parse_config_str(&config_from_comments(&text)).unwrap();
    assert_eq!(recovered.file, parse_config_str(REFERENCE).unwrap().file);

    let path = dir.path().join("moments.csv");
    let out = brw(&["moments", cfg.to_str().unwrap(), "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["n", "x1", "y1", "C_xy", "C_x", "D_bound_margin"]);
    let first = reader.records().next().unwrap().unwrap();
    assert_eq!(&first[0], "1");
}

#[test]
fn simulate_is_reproducible_from_its_own_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ref.toml", REFERENCE);
    let run = |out_dir: &Path, cfg: &Path| {
        std::fs::create_dir_all(out_dir).unwrap();
        let out = brw(&[
            "simulate",
            cfg.to_str().unwrap(),
            "--seed",
            "4",
            "--replicas",
            "300",
            "--horizon",
            "4",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(out_dir.join("runs.csv")).unwrap()
    };
    let first = run(&dir.path().join("a"), &cfg);
    assert!(first.contains("# seed = 4"));
    let replay = write(dir.path(), "replay.toml", &config_from_comments(&first));
    let second = run(&dir.path().join("b"), &replay);
    let body = |t: &str| t.lines().filter(|l| !l.starts_with('#')).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(body(&first), body(&second));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/report.json")).unwrap()).unwrap();
    assert_eq!(report["header"]["seed"], 4);
    assert_eq!(report["result"]["replicas"], 300);
}

#[test]
fn spectrum_and_carleman() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ref.toml", REFERENCE);
    let out = brw(&["spectrum", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let eigs = v["result"]["positive_eigs"].as_array().unwrap();
    assert_eq!(eigs.len(), 1);
    assert!((v["result"]["psi_sources"][0].as_f64().unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-9);

    let out = brw(&["carleman", cfg.to_str().unwrap(), "--x", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["result"]["x"], serde_json::json!([1]));
    assert_eq!(v["result"]["bound_holds"], true);
}
