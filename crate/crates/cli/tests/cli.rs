use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

const ORTHOGONAL: &str = r#"{
  "instance": {"tubes": {"n": 2, "d": 2, "tubes": [
    {"anchor": [0, 0], "direction": [1, 0], "weight": 1, "family": 1},
    {"anchor": [0, 0], "direction": [0, 1], "weight": 1, "family": 2}
  ]}},
  "grid_h": 0.01
}"#;

fn kakeya(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kakeya"));
    c.args(args).env_remove("KAKEYA_OUT_DIR");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(_dir: &Path, cmd: &str, cfg: &Path, out: &Path) -> Output {
    kakeya(&[cmd, cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[])
}

fn csv(path: &Path) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap().to_string();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (comment, header, rows)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn appendix_check_writes_margins() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "a.json", r#"{"n": 2, "trials": 200}"#);
    let out = tmp.path().join("out");
    let o = run(tmp.path(), "appendix-check", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, header, rows) = csv(&out.join("appendix-check.csv"));
    assert_eq!(header, ["trial", "degree", "a", "b", "area", "bound", "margin"]);
    assert_eq!(rows.len(), 200);
    for r in &rows {
        let v: Vec<f64> = r[2..].iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[0] + v[1] <= 1.0 + 1e-12);
        assert!((v[4] - (v[2] - v[3])).abs() < 1e-9 * (1.0 + v[2].abs()));
    }
    let summary = json(&out.join("appendix-check.json"));
    assert_eq!(summary["status"], "PASS");
}

#[test]
fn orthogonal_pair_has_ratio_four() {
    // two crossed unit tubes: the product of indicators integrates to 4 = 2 x 2
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "k.json", ORTHOGONAL);
    let out = tmp.path().join("out");
    let o = run(tmp.path(), "kakeya-verify", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("kakeya-verify.json"));
    let ratio = s["results"]["ratio"][0].as_f64().unwrap();
    assert!((ratio - 4.0).abs() < 1e-6, "{ratio}");
    assert_eq!(s["results"]["rhs"][0].as_f64().unwrap(), 1.0);
}

#[test]
fn tube_file_is_read_relative_to_the_config() {
    let tmp = TempDir::new().unwrap();
    let doc: Value = serde_json::from_str(ORTHOGONAL).unwrap();
    std::fs::create_dir(tmp.path().join("data")).unwrap();
    write(&tmp.path().join("data"), "tubes.json", &doc["instance"]["tubes"].to_string());
    let cfg = write(tmp.path(), "k.json", r#"{"instance": {"tube_file": "data/tubes.json"}, "grid_h": 0.01}"#);
    let out = tmp.path().join("out");
    let o = run(tmp.path(), "kakeya-verify", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("kakeya-verify.json"));
    // the echoed config carries the tubes, not the path
    assert!(s["parameters"]["instance"]["tube_file"].is_null());
    assert_eq!(s["parameters"]["instance"]["tubes"]["tubes"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_field_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.json", "{\n  \"trials\": 3\n}\n");
    let out = tmp.path().join("out");
    let o = run(tmp.path(), "appendix-check", &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    let prefix = format!("{}:", cfg.display());
    assert!(err.contains(&prefix), "{err}");
    assert!(err.contains("missing field `n`"), "{err}");
    assert!(!out.exists());
}

#[test]
fn out_of_range_value_points_at_its_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.json", "{\n  \"n\": 2,\n  \"trials\": 0\n}\n");
    let out = tmp.path().join("out");
    let o = run(tmp.path(), "cylinder-check", &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&format!("{}:3:", cfg.display())), "{err}");
    assert!(!out.exists());
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "bad.json", r#"{"n": 2, "trails": 3}"#);
    let out = tmp.path().join("out");
    let o = run(tmp.path(), "appendix-check", &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trails"));
    assert!(!out.exists());
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(kakeya(&["no-such-command", "x.json"], &[]).status.code(), Some(1));
    assert_eq!(kakeya(&["bisect", "x.json", "--jobs", "0"], &[]).status.code(), Some(1));
    assert_eq!(kakeya(&["--help"], &[]).status.code(), Some(0));
    let v = kakeya(&["--version"], &[]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn runs_are_deterministic_across_job_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"n": 2, "trials": 6, "seed": 11}"#);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    let p = cfg.to_str().unwrap();
    for (dir, jobs) in [(&a, "1"), (&b, "1"), (&c, "3")] {
        let o = kakeya(&["cylinder-check", p, "--out", dir.to_str().unwrap(), "--jobs", jobs], &[]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["cylinder-check.json", "cylinder-check.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(x, std::fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn outputs_carry_version_and_config_hash() {
    use sha2::{Digest, Sha256};
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"n": 2, "trials": 2}"#);
    let out = tmp.path().join("out");
    assert_eq!(run(tmp.path(), "cylinder-check", &cfg, &out).status.code(), Some(0));
    let s = json(&out.join("cylinder-check.json"));
    assert_eq!(s["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(s["command"], "cylinder-check");
    let digest = Sha256::digest(serde_json::to_vec(&s["parameters"]).unwrap());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(s["config_sha256"], hex.as_str());
    let (comment, _, _) = csv(&out.join("cylinder-check.csv"));
    assert!(comment.starts_with('#'));
    assert!(comment.contains(env!("CARGO_PKG_VERSION")));
    assert!(comment.contains(&hex));
}

#[test]
fn out_dir_falls_back_to_the_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"n": 2, "trials": 2}"#);
    let env_dir = tmp.path().join("from-env");
    let o = kakeya(&["cylinder-check", cfg.to_str().unwrap()], &[("KAKEYA_OUT_DIR", &env_dir)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.join("cylinder-check.csv").exists());
    // --out wins over the environment
    let flag_dir = tmp.path().join("from-flag");
    let o = kakeya(
        &["cylinder-check", cfg.to_str().unwrap(), "--out", flag_dir.to_str().unwrap()],
        &[("KAKEYA_OUT_DIR", &env_dir.join("unused"))],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.join("cylinder-check.csv").exists());
    assert!(!env_dir.join("unused").exists());
}

#[test]
fn failing_check_exits_two_with_a_summary() {
    // a budget below 1 cannot hold: the ratio of a flat zero set is 1
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"n": 2, "trials": 3, "budget": 0.5}"#);
    let out = tmp.path().join("out");
    let o = run(tmp.path(), "cylinder-check", &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let s = json(&out.join("cylinder-check.json"));
    assert_eq!(s["status"], "FAIL");
    assert!(!s["failures"].as_array().unwrap().is_empty());
}

#[test]
fn bisect_reports_a_positive_constant() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "b.json",
        r#"{"weights": [{"corner": [0, 0], "value": 2.0}, {"corner": [1, 0], "value": 1.0}]}"#,
    );
    let out = tmp.path().join("out");
    let o = run(tmp.path(), "bisect", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("bisect.json"));
    assert_eq!(s["results"]["converged"], true);
    assert!(s["results"]["fitted_constants"]["c"].as_f64().unwrap() > 0.0);
    let (_, header, rows) = csv(&out.join("bisect.csv"));
    assert_eq!(header, ["corner_1", "corner_2", "weight", "area", "area_over_weight"]);
    assert_eq!(rows.len(), 2);
}

#[test]
fn net_build_writes_the_net_document() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "n.json",
        r#"{"n": 2, "net": {"pool": 500, "quiet_samples": 1500, "v_min": 0.25, "ratio_cap": 4}, "coverage_probes": 100}"#,
    );
    let out = tmp.path().join("out");
    let o = run(tmp.path(), "net-build", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&out.join("net-build.json"));
    let r = &s["results"];
    assert!(r["min_separation"].as_f64().unwrap() >= 0.25);
    assert!(r["min_colour_separation"].as_f64().unwrap() >= r["conflict_radius"].as_f64().unwrap());
    let doc = json(&out.join("net-build-net.json"));
    assert_eq!(doc["config_sha256"], s["config_sha256"]);
    let (_, _, rows) = csv(&out.join("net-build.csv"));
    assert_eq!(rows.len() as u64, r["elements"].as_u64().unwrap());
}
