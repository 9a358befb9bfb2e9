use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mecsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mecsim"))
        .args(args)
        .env_remove("MECSIM_NUM_USERS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, "num_users = 6\nnum_sbs = 2\nnum_lts = 2\n").unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_metrics_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = mecsim(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["lts.csv", "sts.csv", "manifest.txt"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let lts = fs::read_to_string(out.join("lts.csv")).unwrap();
    assert_eq!(lts.lines().count(), 3);
}

#[test]
fn run_jsonl_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = mecsim(&[
        "run",
        "--config",
        &cfg,
        "--baseline",
        "TC",
        "--format",
        "jsonl",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("sts.jsonl").is_file());
}

#[test]
fn sweep_tags_every_group_with_a_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = mecsim(&[
        "sweep",
        "--config",
        &cfg,
        "--axis",
        "eta",
        "--values",
        "1e-7,1e-6,1e-5",
        "--seeds",
        "2",
        "--jobs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("series.csv")).unwrap();
    let mut groups = std::collections::BTreeMap::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 7);
        assert!(!cols[3].is_empty());
        groups.insert((cols[1].to_string(), cols[2].to_string()), cols[3].to_string());
    }
    assert_eq!(groups.len(), 6);
    let hashes: std::collections::BTreeSet<_> = groups.values().collect();
    assert_eq!(hashes.len(), 6);
}

#[test]
fn compare_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = mecsim(&[
        "compare",
        "--config",
        &cfg,
        "--seeds",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.starts_with("method,seeds,mean_utility"));
}

#[test]
fn selftest_passes_and_detects_faults() {
    let ok = mecsim(&["selftest"]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS"));
    let bad = mecsim(&["selftest", "--corrupt"]);
    assert!(!bad.status.success());
    assert!(stderr(&bad).contains("failed"));
}

#[test]
fn bad_inputs_exit_nonzero_with_a_message() {
    let o = mecsim(&["run", "--no-such-flag"]);
    assert!(!o.status.success());
    assert!(!stderr(&o).is_empty());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "num_sbs = 0\n").unwrap();
    let o = mecsim(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error"), "{}", stderr(&o));

    let o = mecsim(&[
        "sweep",
        "--axis",
        "no_such_field",
        "--values",
        "1",
        "--out",
        dir.path().join("s").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no_such_field"), "{}", stderr(&o));
}

#[test]
fn env_overrides_apply_without_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_mecsim"))
        .args(["run", "--out", out.to_str().unwrap()])
        .env("MECSIM_NUM_USERS", "3")
        .env("MECSIM_NUM_LTS", "1")
        .env("MECSIM_BASELINE", "FC")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("lts_records=1"), "{manifest}");
    assert!(manifest.contains("sts_records=10"), "{manifest}");
    assert!(manifest.contains("baseline=FC"), "{manifest}");
}
