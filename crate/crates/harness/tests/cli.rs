use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use netulln_harness::{RunConfig, RunManifest};

const BIN: &str = env!("CARGO_BIN_EXE_netulln");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn default_src() -> String {
    std::fs::read_to_string(configs().join("default.toml")).unwrap()
}

/// Default config with small grids, for tests that only need the plumbing.
fn small_src() -> String {
    default_src()
        .replace("n_grid = [100, 400, 1600, 6400]\nreplications = 200", "n_grid = [100, 200, 400]\nreplications = 20")
        .replace("n_grid = [256, 1024, 4096, 16384]\nreplications = 500", "n_grid = [64, 128, 256, 512]\nreplications = 50")
        .replace("n_boot = 1000", "n_boot = 100")
        .replace("block_sizes = [4, 8, 16, 32]\nblock_n = 4096", "block_sizes = [4, 8]\nblock_n = 256")
}

fn netulln(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, src: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, src).unwrap();
    p.to_str().unwrap().to_string()
}

fn run(verb: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![verb, "--config", config, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    netulln(&args)
}

const CSVS: [&str; 4] = ["diagnose.csv", "replications.csv", "summary.csv", "plot_series.csv"];

#[test]
fn full_suite_on_default_config_writes_five_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.toml");
    let out = run("full-suite", cfg.to_str().unwrap(), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let mut files: Vec<String> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["diagnose.csv", "manifest.json", "plot_series.csv", "replications.csv", "summary.csv"]);
    let m = RunManifest::load(tmp.path()).unwrap();
    assert!(m.diagnose.checks.iter().all(|c| c.status == netulln_harness::Status::Pass));
    assert!(m.audits.values().all(|a| a.all_pass()));
}

#[test]
fn p_of_two_exits_2_naming_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let src = small_src().replace("p = 5", "p = 2");
    let cfg = write(tmp.path(), "bad.toml", &src);
    let out = run("full-suite", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    let line = src.lines().position(|l| l.trim() == "p = 2").unwrap() + 1;
    assert!(err.contains("assumptions.p"), "{err}");
    assert!(err.contains(&format!("bad.toml:{line}")), "{err}");
}

#[test]
fn unknown_key_exits_2_with_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let src = small_src().replace("eta = 0.05", "eta = 0.05\netaa = 0.05");
    let cfg = write(tmp.path(), "typo.toml", &src);
    let out = run("diagnose", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    let line = src.lines().position(|l| l.trim() == "etaa = 0.05").unwrap() + 1;
    assert!(err.contains(&format!("typo.toml:{line}")) && err.contains("etaa"), "{err}");
}

#[test]
fn usage_faults_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    assert_eq!(run("diagnose", missing.to_str().unwrap(), tmp.path(), &[]).status.code(), Some(2));
    let cfg = write(tmp.path(), "ok.toml", &small_src());
    assert_eq!(run("diagnose", &cfg, tmp.path(), &["--threads", "0"]).status.code(), Some(2));
    let broken = write(tmp.path(), "broken.toml", "seed = [");
    assert_eq!(run("diagnose", &broken, tmp.path(), &[]).status.code(), Some(2));
}

#[test]
fn failed_assertion_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let src = small_src().replace("ulln_max_slope = -0.25", "ulln_max_slope = -5.0");
    let cfg = write(tmp.path(), "strict_slope.toml", &src);
    let out = run("verify-ulln", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let m = RunManifest::load(tmp.path()).unwrap();
    assert!(m.assertions.iter().any(|a| a.name == "ulln_conditional_slope" && a.status == netulln_harness::Status::Fail));
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", &small_src());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    // small grids may fail assertions; only reproduction matters here
    let first = run("full-suite", &cfg, &a, &["--seed", "99"]).status.code();
    assert!(matches!(first, Some(0 | 1)));
    let manifest = a.join("manifest.json");
    assert_eq!(run("full-suite", manifest.to_str().unwrap(), &b, &[]).status.code(), first);
    for f in CSVS {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m = RunManifest::load(&b).unwrap();
    assert_eq!(m.seeds.master, 99);
}

#[test]
fn seed_changes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", &small_src());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run("verify-ulln", &cfg, &a, &["--seed", "1"]);
    run("verify-ulln", &cfg, &b, &["--seed", "2"]);
    assert_ne!(std::fs::read(a.join("replications.csv")).unwrap(), std::fs::read(b.join("replications.csv")).unwrap());
}

#[test]
fn dense_graph_fails_the_window_and_reports_separation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("er_dense.toml");
    let out = run("diagnose", cfg.to_str().unwrap(), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(tmp.path().join("diagnose.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("sparsity_window,")).unwrap();
    assert!(row.contains(",FAIL,") && row.contains("best achieved separation"), "{row}");
}

#[test]
fn default_diagnose_passes_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("default.toml");
    let out = run("diagnose", cfg.to_str().unwrap(), tmp.path(), &["--strict"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("diagnose.csv")).unwrap();
    assert!(csv.lines().skip(1).filter(|l| !l.starts_with("shell_size")).all(|l| l.contains(",PASS,")), "{csv}");
    // cycle shells: 1 node at distance 0, then 2 per distance
    assert!(csv.contains("shell_size,0,,1,") && csv.contains("shell_size,3,,2,"), "{csv}");
}

#[test]
fn increasing_decay_table_fails_the_profile_check() {
    let tmp = tempfile::tempdir().unwrap();
    let src = small_src().replace("[ulln]", "[diagnose]\ndecay_table = [1.0, 0.3, 0.6]\n\n[ulln]");
    let cfg = write(tmp.path(), "planted.toml", &src);
    let out = run("diagnose", &cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(tmp.path().join("diagnose.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("decay_profile,,FAIL,")), "{csv}");
}

#[test]
fn waived_assertions_fail_only_under_strict() {
    let tmp = tempfile::tempdir().unwrap();
    // a single-node-wide window forces the sparsity check to fail
    let src = small_src().replace("c1 = 0.25", "c1 = 50.0");
    let cfg = write(tmp.path(), "closed.toml", &src);
    let lax = run("verify-maximal", &cfg, &tmp.path().join("lax"), &[]);
    assert_eq!(lax.status.code(), Some(0), "{}", String::from_utf8_lossy(&lax.stdout));
    let m = RunManifest::load(&tmp.path().join("lax")).unwrap();
    assert!(m.assertions.iter().any(|a| a.status == netulln_harness::Status::Waived));
    let strict = run("verify-maximal", &cfg, &tmp.path().join("strict"), &["--strict"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn report_reads_a_finished_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", &small_src());
    run("diagnose", &cfg, tmp.path(), &[]);
    let out = netulln(&["report", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("sparsity_window"));
}

#[test]
fn shipped_configs_round_trip() {
    for name in ["default.toml", "er_dense.toml"] {
        let cfg = RunConfig::load(&configs().join(name)).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg, "{name}");
    }
}
