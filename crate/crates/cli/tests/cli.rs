use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use zdcover_core::staircase;

fn zdcover(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zdcover"))
        .args(args)
        .current_dir(dir)
        .env_remove("ZDCOVER_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn empty_argv_prints_usage_and_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let o = zdcover(d.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o) + &String::from_utf8_lossy(&o.stderr);
    assert!(text.contains("Usage"), "{text}");
}

#[test]
fn usage_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(
        zdcover(d.path(), &["build", "--colour", "red"])
            .status
            .code(),
        Some(2)
    );
    let o = zdcover(d.path(), &["expansion", "--word", "h"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not hyperbolic"));
    fs::write(d.path().join("bad.cfg"), "word = hv\ncolour = red\n").unwrap();
    let o = zdcover(d.path(), &["frobenius", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn verify_gauss_suite_passes_and_writes_manifest() {
    let d = tempfile::tempdir().unwrap();
    let o = zdcover(d.path(), &["verify", "--suite", "gauss"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("[PASS] criterion  7"));
    let m = json(&d.path().join("zdcover-verify.manifest.json"));
    assert_eq!(m["config"]["suite"], "gauss");
    assert_eq!(m["success"], true);
}

#[test]
fn csv_outputs_are_deterministic_and_name_their_manifest() {
    let d = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "frobenius",
            "--word",
            "hv",
            "--K",
            "5,50",
            "--samples",
            "300",
            "--seed",
            "11",
            "--out",
            out,
        ]
    };
    assert!(zdcover(d.path(), &args("a.csv")).status.success());
    assert!(zdcover(d.path(), &args("b.csv")).status.success());
    let a = fs::read_to_string(d.path().join("a.csv")).unwrap();
    let b = fs::read_to_string(d.path().join("b.csv")).unwrap();
    assert!(a.starts_with("# manifest: a.csv.manifest.json\nsample,K,FK_0\n"));
    let body = |s: &str| s.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(body(&a), body(&b));
    assert_eq!(a.lines().count(), 2 + 600);
    // no temporary files are left behind
    let names: Vec<String> = fs::read_dir(d.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| !n.contains(".tmp")), "{names:?}");
}

#[test]
fn flow_csv_has_documented_columns() {
    let d = tempfile::tempdir().unwrap();
    let o = zdcover(
        d.path(),
        &[
            "flow",
            "--model",
            "windtree",
            "--word",
            "hv",
            "--t",
            "10,100",
            "--samples",
            "5",
            "--out",
            "f.csv",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.path().join("f.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# manifest: f.csv.manifest.json"));
    assert_eq!(lines.next(), Some("sample,t,square,u,v,index_0,index_1"));
    assert_eq!(lines.count(), 10);
}

#[test]
fn manifest_reruns_to_identical_output() {
    let d = tempfile::tempdir().unwrap();
    let first = zdcover(
        d.path(),
        &[
            "frobenius",
            "--word",
            "vh",
            "--K",
            "20",
            "--samples",
            "100",
            "--seed",
            "5",
            "--out",
            "x.csv",
        ],
    );
    assert!(first.status.success());
    let before = fs::read_to_string(d.path().join("x.csv")).unwrap();
    fs::rename(
        d.path().join("x.csv.manifest.json"),
        d.path().join("m.json"),
    )
    .unwrap();
    let again = zdcover(d.path(), &["--config", "m.json"]);
    assert!(
        again.status.success(),
        "{}",
        String::from_utf8_lossy(&again.stderr)
    );
    assert_eq!(fs::read_to_string(d.path().join("x.csv")).unwrap(), before);
    assert_eq!(
        json(&d.path().join("m.json"))["config"],
        json(&d.path().join("x.csv.manifest.json"))["config"]
    );
}

#[test]
fn flags_override_config_file() {
    let d = tempfile::tempdir().unwrap();
    fs::write(
        d.path().join("run.cfg"),
        "# staircase run\nword = hv\nK = 7\nsamples = 4\nseed = 1\n",
    )
    .unwrap();
    let o = zdcover(
        d.path(),
        &["frobenius", "--config", "run.cfg", "--samples", "2"],
    );
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 3, "{out}");
    assert!(out.lines().nth(1).unwrap().starts_with("0,7,"));
}

#[test]
fn windtree_sigma_is_a_two_by_two_block() {
    let d = tempfile::tempdir().unwrap();
    let o = zdcover(
        d.path(),
        &[
            "stats",
            "--task",
            "sigma",
            "--model",
            "windtree",
            "--word",
            "hv",
            "--samples",
            "2000",
            "--out",
            "s.json",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&d.path().join("s.json"));
    assert_eq!(v["manifest"], "s.json.manifest.json");
    let est = v["estimate"].as_array().unwrap();
    assert_eq!(est.len(), 2);
    assert!(est.iter().all(|r| r.as_array().unwrap().len() == 2));
    assert_eq!(v["per_lag"].as_array().unwrap().len(), 21);
    assert_eq!(v["n_samples"], 2000);
}

#[test]
fn gauss_prints_re_im_pairs() {
    let d = tempfile::tempdir().unwrap();
    let o = zdcover(
        d.path(),
        &["gauss", "--j", "3", "--sigma", "1", "--L", "1", "--oracle"],
    );
    assert!(o.status.success());
    let rows: Vec<(f64, f64)> = stdout(&o)
        .lines()
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 2);
    let exact = 2.0 * (2.0 * std::f64::consts::PI).sqrt() * (-0.5f64).exp();
    assert_eq!(rows[0].0, 0.0);
    for (re, im) in rows {
        assert!(re.abs() < 1e-12 && (im - exact).abs() < 1e-10);
    }
    let o = zdcover(
        d.path(),
        &[
            "gauss",
            "--j",
            "1",
            "--L",
            "0.5,-1",
            "--Sigma",
            "1.2,0.3,0.9",
        ],
    );
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn build_reads_surface_files() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("s4.txt"), staircase(4).unwrap().to_text()).unwrap();
    let o = zdcover(d.path(), &["build", "--file", "s4.txt"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n_squares"], 4);
    let o = zdcover(d.path(), &["build", "--file", "missing.txt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.txt"));
}

#[test]
fn workers_env_is_honoured_without_changing_results() {
    let d = tempfile::tempdir().unwrap();
    let run = |workers: &str, out: &str| {
        Command::new(env!("CARGO_BIN_EXE_zdcover"))
            .args([
                "frobenius",
                "--word",
                "hv",
                "--K",
                "30",
                "--samples",
                "5000",
                "--out",
                out,
            ])
            .current_dir(d.path())
            .env("ZDCOVER_WORKERS", workers)
            .output()
            .unwrap()
    };
    assert!(run("1", "one.csv").status.success());
    assert!(run("3", "three.csv").status.success());
    assert_eq!(
        json(&d.path().join("three.csv.manifest.json"))["workers"],
        3
    );
    let body = |n: &str| {
        fs::read_to_string(d.path().join(n))
            .unwrap()
            .lines()
            .skip(1)
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(body("one.csv"), body("three.csv"));
}
