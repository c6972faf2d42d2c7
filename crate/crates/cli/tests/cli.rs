use std::path::Path;
use std::process::{Command, Output};

use ovalwig::dump::{read_dump, write_dump};
use ovalwig::report::CSV_COLUMNS;

fn ovalwig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ovalwig")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// value printed on a `key value` line
fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn solve_disk(dir: &Path) -> Output {
    ovalwig(&["solve", "--theta", "0", "--a", "1", "--b", "1", "--count", "2", "--h", "0.03125", "--dump", p(dir)])
}

#[test]
fn solve_reports_disk_fundamental() {
    let dir = tempfile::tempdir().unwrap();
    let o = solve_disk(dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let k: f64 = text.lines().nth(1).unwrap().split(' ').nth(1).unwrap().parse().unwrap();
    assert!((k - 2.404826).abs() < 1e-3, "{k}");
    assert!(dir.path().join("mode_0.hdr").exists() && dir.path().join("mode_1.bin").exists());
}

#[test]
fn field_dump_pipeline_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(solve_disk(d).status.success());
    let field = d.join("w0");
    let o = ovalwig(&[
        "wigner",
        "--mode",
        p(&d.join("mode_0")),
        "--out",
        p(&field),
        "--stride",
        "2",
        "--momentum-points",
        "24",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let made = stdout(&o);

    // re-ingesting the dump reproduces the entropy to the last digit
    let o = ovalwig(&["entropy", p(&field.with_extension("hdr"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    let again = stdout(&o);
    for key in ["h_r", "h_i", "N"] {
        assert_eq!(value(&made, key), value(&again, key));
    }

    let o = ovalwig(&["check", p(&field), "--mode", p(&d.join("mode_0"))]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("pass ")));
    assert!(stdout(&o).contains("position_marginal"));
    let o = ovalwig(&["check", p(&d.join("mode_1"))]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn check_flags_broken_symmetry() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(solve_disk(d).status.success());
    let field = d.join("w0");
    let o = ovalwig(&[
        "wigner",
        "--mode",
        p(&d.join("mode_0")),
        "--out",
        p(&field),
        "--stride",
        "2",
        "--momentum-points",
        "24",
    ]);
    assert!(o.status.success());
    let mut dump = read_dump(&field).unwrap();
    let block = dump.shape[2] * dump.shape[3];
    let positions = dump.values.len() / block;
    dump.values[positions / 2 * block + 5 * dump.shape[3] + 6] += 1e-9;
    write_dump(&d.join("bent"), &dump).unwrap();
    let o = ovalwig(&["check", p(&d.join("bent"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL inversion_asymmetry"), "{}", stdout(&o));
}

#[test]
fn fisher_rejects_mismatched_grids() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(solve_disk(d).status.success());
    for (name, stride) in [("a", "2"), ("b", "3")] {
        let o = ovalwig(&[
            "wigner",
            "--mode",
            p(&d.join("mode_0")),
            "--out",
            p(&d.join(name)),
            "--stride",
            stride,
            "--momentum-points",
            "24",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = ovalwig(&[
        "fisher",
        "--lower",
        p(&d.join("a")),
        "--center",
        p(&d.join("b")),
        "--upper",
        p(&d.join("a")),
        "--delta",
        "0.001",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("different grids"), "{}", stderr(&o));
}

#[test]
fn truncated_payload_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(solve_disk(d).status.success());
    let bin = d.join("mode_0.bin");
    let bytes = std::fs::read(&bin).unwrap();
    std::fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
    let o = ovalwig(&["check", p(&d.join("mode_0"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bytes"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "samples = 5\nmomentum_pionts = 32\n").unwrap();
    let o = ovalwig(&["sweep", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("momentum_pionts"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(ovalwig(&["sweep"]).status.code(), Some(1));
    assert_eq!(ovalwig(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ovalwig(&["--help"]).status.code(), Some(0));
}

const FROZEN: &str = "\
a = 1.0
b = 1.0
theta_min = 0.1
theta_max = 0.2
samples = 2
h = 0.041666666666666664
parity = \"even\"
mode_count = 4
k_min = 3.0
k_max = 5.0
wigner_stride = 1
momentum_points = 24
momentum_factor = 1.5
slice_points = 32
slice_momenta = 32
freeze_shape = true
dump_points = true
log_level = \"warn\"
";

#[test]
fn sweep_outputs_and_manifest_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("frozen.cfg");
    std::fs::write(&cfg, FROZEN).unwrap();
    let first = d.join("first");
    let o = ovalwig(&["sweep", "--config", p(&cfg), "--out", p(&first)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("theta_star none"));

    let csv = std::fs::read_to_string(first.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty() && rows.len() % 2 == 0);
    assert!(rows.iter().all(|r| r.len() == CSV_COLUMNS.len() && r[16] == "0"));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(first.join("run-manifest.json")).unwrap()).unwrap();
    // every default is materialized, including the derived Fisher step
    assert_eq!(manifest["config"]["delta"].as_f64(), Some(0.05));
    assert_eq!(manifest["config"]["tau"].as_f64(), Some(1e-6));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(first.join("summary.json")).unwrap()).unwrap();
    assert!(summary["crossing"].is_null());
    assert_eq!(summary["identity_suite"]["inversion_asymmetry_max"].as_f64(), Some(0.0));
    assert!(first.join("dumps/theta_min_b0_wigner.hdr").exists());
    assert!(first.join("dumps/theta_max_b0_slice_x.bin").exists());

    let second = d.join("second");
    let o = ovalwig(&["sweep", "--manifest", p(&first.join("run-manifest.json")), "--out", p(&second)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(first.join("sweep.csv")).unwrap(), std::fs::read(second.join("sweep.csv")).unwrap());
}
