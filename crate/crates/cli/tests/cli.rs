use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("problems")
        .join(format!("{name}.json"))
}

fn potlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_potlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn run_ok(args: &[&str], out: &Path) {
    let o = potlab(args, out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

#[test]
fn every_command_writes_its_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let p = problem("interval");
    let p = p.to_str().unwrap();
    let cases: [(&[&str], &[&str]); 6] = [
        (&["ortho"], &["ortho.csv", "ortho_n1.json", "ortho_n3.json"]),
        (&["christoffel", "--grid", "21"], &["christoffel_n2.csv"]),
        (
            &["partition", "--samples", "10000"],
            &["free_energy.svg", "partition.csv"],
        ),
        (
            &["equilibrium", "-M", "200"],
            &["equilibrium.csv", "equilibrium.json"],
        ),
        (
            &["fekete", "-M", "200"],
            &[
                "fekete.csv",
                "fekete_n3.json",
                "fekete_weak_star.svg",
                "transfinite.json",
            ],
        ),
        (
            &["deviation", "--dump"],
            &["deviation.csv", "deviation.svg", "samples_n2.csv"],
        ),
    ];
    for (args, expected) in cases {
        let out = tmp.path().join(args[0]);
        let mut full = args.to_vec();
        full.extend(["--problem", p, "-n", "1..3"]);
        run_ok(&full, &out);
        let got = files(&out);
        for f in expected {
            assert!(
                got.iter().any(|g| g == f),
                "{}: missing {f} in {got:?}",
                args[0]
            );
        }
    }
    let csv = std::fs::read_to_string(tmp.path().join("partition/partition.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "n,log_Z_norm,log_Z_gram,log_Z_mc,stderr,free_energy"
    );
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn unbounded_writes_the_free_energy_table() {
    let tmp = tempfile::tempdir().unwrap();
    let p = problem("real_line");
    run_ok(
        &["unbounded", "--problem", p.to_str().unwrap(), "-n", "2,4"],
        tmp.path(),
    );
    let csv = std::fs::read_to_string(tmp.path().join("unbounded.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,A,log_Z_fullline,log_Z_restricted,free_energy_fullline,free_energy_restricted,delta_w_energy_route"
    );
    assert_eq!(lines.count(), 2);
    assert!(tmp.path().join("restriction_n4.json").exists());
}

#[test]
fn artifacts_are_byte_identical_across_runs_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let p = problem("two_intervals");
    let args = [
        "partition",
        "--problem",
        p.to_str().unwrap(),
        "-n",
        "1..3",
        "--samples",
        "20000",
    ];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run_ok(&args, &a);
    let o = Command::new(env!("CARGO_BIN_EXE_potlab"))
        .args(args)
        .arg("--out")
        .arg(&b)
        .env("POTLAB_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    for f in files(&a) {
        assert_eq!(
            std::fs::read(a.join(&f)).unwrap(),
            std::fs::read(b.join(&f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn malformed_problem_files_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\"domain\": {\"kind\": \"circle\", \"params\": {\"radius\": 1.0}},\n \"weight\": {\"kind\": \"unit\"},\n \"measure\": {\"order\": -4}}",
    )
    .unwrap();
    let o = potlab(
        &["ortho", "--problem", bad.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("measure.order") && err.contains("line 3"),
        "{err}"
    );

    let missing = tmp.path().join("missing.json");
    let o = potlab(
        &["ortho", "--problem", missing.to_str().unwrap()],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));

    let o = potlab(
        &["ortho", "--problem", bad.to_str().unwrap(), "-n", "4..2"],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));

    let p = problem("interval");
    let o = potlab(
        &[
            "deviation",
            "--problem",
            p.to_str().unwrap(),
            "-n",
            "2",
            "--eta",
            "0.9",
        ],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failures_exit_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let coarse = tmp.path().join("coarse.json");
    std::fs::write(
        &coarse,
        r#"{"domain": {"kind": "interval-union", "params": {"intervals": [[-1.0, 1.0]]}},
            "weight": {"kind": "unit"}, "measure": {"order": 3}}"#,
    )
    .unwrap();
    let o = potlab(
        &["ortho", "--problem", coarse.to_str().unwrap(), "-n", "5"],
        &tmp.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("quadrature order"));
}

#[test]
fn truncated_verify_skips_asymptotic_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let o = potlab(&["verify", "--suite", "core", "-n", "1..5"], tmp.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(
        stdout.contains("[SKIP]") && !stdout.contains("[FAIL]"),
        "{stdout}"
    );
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("verify_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report.as_array().unwrap().len(), 9);

    let o = potlab(&["verify", "--suite", "extended"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}
