//! End-to-end runs of the `dmalab` binary on the configs shipped in `configs/`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use degenerate_ma::cli::{parse_config, run, MANIFEST};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn dmalab(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmalab"))
        .arg(cmd)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST)).unwrap()).unwrap()
}

fn listed(dir: &Path) -> Vec<String> {
    manifest(dir)["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap().to_string()).collect()
}

fn mtime(p: &Path) -> std::time::SystemTime {
    fs::metadata(p).unwrap().modified().unwrap()
}

#[test]
fn scaling_run_passes_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = dmalab("scaling", &config("scaling.ini"), &a, &[]);
    let stdout = String::from_utf8_lossy(&first.stdout);
    assert_eq!(first.status.code(), Some(0), "{stdout}{}", String::from_utf8_lossy(&first.stderr));
    assert!(stdout.contains("tangential_extent") && stdout.contains("normal_extent"), "{stdout}");
    let second = dmalab("scaling", &config("scaling.ini"), &b, &["--jobs", "1"]);
    assert_eq!(second.status.code(), Some(0));

    let files = listed(&a);
    for f in ["scaling.sweep.csv", "scaling.report.json", "scaling.summary.txt"] {
        assert!(files.iter().any(|x| x == f), "{f} missing from {files:?}");
    }
    let mut on_disk: Vec<String> =
        fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    on_disk.retain(|f| f != MANIFEST);
    on_disk.sort();
    let mut sorted = files.clone();
    sorted.sort();
    assert_eq!(on_disk, sorted);
    let m = mtime(&a.join(MANIFEST));
    assert!(files.iter().all(|f| mtime(&a.join(f)) <= m));
    assert_eq!(manifest(&a)["exit_code"], 0);

    for f in files.iter().chain(std::iter::once(&MANIFEST.to_string())) {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    let csv = fs::read_to_string(a.join("scaling.sweep.csv")).unwrap();
    assert!(!csv.contains('\r') && csv.ends_with('\n'));
}

#[test]
fn unwritable_output_directory_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("plain-file");
    fs::write(&blocker, "not a directory").unwrap();
    let o = dmalab("solve", &config("solve.ini"), &blocker.join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stdout).contains("not writable"));
}

#[test]
fn tiny_barrier_constants_fail_with_a_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dmalab("barriers", &config("barriers-tiny.ini"), tmp.path(), &[]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(1), "{stdout}");
    assert!(stdout.contains("FAIL") && stdout.contains(" at ["), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("barriers.report.json")).unwrap()).unwrap();
    let cert = &report["certificate"];
    assert_eq!(cert["pass"], false);
    assert!(cert["worst_margin"].as_f64().unwrap() < 0.0);
    assert_eq!(cert["witness"].as_array().unwrap().len(), 2);
    assert_eq!(manifest(tmp.path())["status"], "fail");
}

#[test]
fn barrier_search_and_ordering_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dmalab("barriers", &config("barriers-vplus.ini"), tmp.path(), &[]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("ordering:"), "{stdout}");
}

#[test]
fn liouville_and_solve_commands_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dmalab("liouville", &config("liouville.ini"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(listed(tmp.path()).contains(&"liouville.report.json".to_string()));

    let text = fs::read_to_string(config("solve.ini")).unwrap() + "[output]\ndir = " + tmp.path().to_str().unwrap() + "\n";
    let outcome = run(&parse_config(&text).unwrap());
    assert_eq!(outcome.code, 0, "{:?}", outcome.lines);
    assert!(outcome.files.iter().any(|f| f == "solution.csv"));
    let csv = fs::read_to_string(tmp.path().join("solution.csv")).unwrap();
    assert!(csv.lines().count() > 100);
}

#[test]
fn config_errors_are_reported_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.ini");
    fs::write(&bad, "command = solve\n[domain]\nkind = disk\nradius = 1\nshape = round\n[problem]\nalpha = 2.5\n[solver]\nspacing = 1/32\n")
        .unwrap();
    let o = dmalab("solve", &bad, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 5") && err.contains("shape"), "{err}");
    assert!(err.contains("line 7") && err.contains("alpha must be in (0,2)"), "{err}");
    let o = dmalab("scaling", &config("solve.ini"), &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}
