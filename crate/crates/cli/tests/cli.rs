use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

const BIN: &str = env!("CARGO_BIN_EXE_cryo-edram");

fn cmd(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("CRYOEDRAM_PROFILE")
        .output()
        .unwrap()
}

fn profile() -> &'static Path {
    static P: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    &P.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.toml");
        let out = cmd(&["calibrate", "--out", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (dir, path)
    })
    .1
}

#[test]
fn missing_subcommand_is_usage_error() {
    assert_eq!(cmd(&[]).status.code(), Some(2));
    assert_eq!(cmd(&["array", "--out", "x"]).status.code(), Some(2));
}

#[test]
fn missing_profile_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd(&["array", "--profile", "/nonexistent/p.toml", "-T", "300", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_targets_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.toml");
    std::fs::write(&t, "schema = \"cryo-edram-targets/1\"\n[[anchor]]\nkey = \"no_such_key\"\nvalue = 1.0\n").unwrap();
    let out = cmd(&["calibrate", "--targets", t.to_str().unwrap(), "--out", dir.path().join("p.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn out_of_range_temperature_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = profile().to_str().unwrap();
    let out = cmd(&["array", "--profile", p, "-T", "500", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    let out = cmd(&["sweep", "--profile", p, "-T", "300", "--grid", "1.1:0.6:0.1", "--out", dir.path().to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn profile_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["cim", "-T", "4.2", "--out", dir.path().to_str().unwrap()])
        .env("CRYOEDRAM_PROFILE", profile())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("cim_report.toml")).unwrap();
    assert!(report.contains("[provenance]"));
}

#[test]
fn outputs_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let p = profile();
    let out = cmd(&["array", "--profile", p.to_str().unwrap(), "-T", "300", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("retention_cells.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    assert!(first.starts_with("# cryo-edram "), "{first}");
    assert!(first.ends_with("; seed=7"), "{first}");
    let cells = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(cells, 1 + 32 * 128);
}

#[test]
fn sparse_anchors_warn_about_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.toml");
    std::fs::write(
        &t,
        "schema = \"cryo-edram-targets/1\"\n\
         [[anchor]]\nkey = \"mean_retention\"\ntemperature_k = 300.0\nvdd_v = 1.1\nvalue = 1.0e-4\nunit = \"s\"\ntolerance = 0.01\n",
    )
    .unwrap();
    let prof = dir.path().join("p.toml");
    let out = cmd(&["calibrate", "--targets", t.to_str().unwrap(), "--out", prof.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("default kept"));
    let text = std::fs::read_to_string(&prof).unwrap();
    assert!(!text.contains("defaulted = []"));
}
