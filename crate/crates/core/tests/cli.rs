use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_ris-see");

const TINY: &str = r#"{
    "base.N": 4,
    "num_drops": 2,
    "p_max_sweep_dbm": [10],
    "optimizer.max_outer": 3,
    "optimizer.ris_max_iters": 5,
    "optimizer.power_max_iters": 5
}"#;

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn ris_see(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("RIS_SEE_SEED");
    if let Some(s) = seed {
        cmd.env("RIS_SEE_SEED", s);
    }
    cmd.output().unwrap()
}

fn run(config: &Path, out: &Path, seed: Option<&str>) -> Output {
    ris_see(
        &["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "2"],
        seed,
    )
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_empty_file_lists_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "empty.json", "");
    let out = ris_see(&["validate", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for line in [
        "scale = desk",
        "base.K = 2",
        "base.N_B = 4",
        "base.N = 16",
        "base.bandwidth_hz = 20000000",
        "base.P0_dbm = 30",
        "base.P0_RIS_dbm = 20",
        "base.P_c_n_dbm = 0",
        "base.noise_psd_dbm_hz = -174",
        "base.noise_figure_db = 5",
        "base.n_h = 4",
        "base.n_g = 2",
        "base.K_t = 4",
        "base.K_r = 2",
    ] {
        assert!(text.lines().any(|l| l == line), "missing '{line}' in\n{text}");
    }
    assert!(text.ends_with("valid\n"));
}

#[test]
fn validate_reports_violations() {
    let dir = TempDir::new().unwrap();
    let neg = write(&dir, "neg.json", r#"{"num_drops": -1}"#);
    let out = ris_see(&["validate", "--config", neg.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("num_drops must be at least 1"));

    let passive = write(&dir, "passive.json", r#"{"base.ris_mode": "nearly_passive", "base.P_R_max_w": 0.01}"#);
    let out = ris_see(&["validate", "--config", passive.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("nearly-passive RIS requires P_R,max = 0"));
}

#[test]
fn validate_unreadable_or_malformed_exits_two() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    let out = ris_see(&["validate", "--config", missing.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));

    let typo = write(&dir, "typo.json", r#"{"num_drop": 3}"#);
    let out = ris_see(&["validate", "--config", typo.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("num_drop"));

    let junk = write(&dir, "junk.json", "{not json");
    let out = ris_see(&["validate", "--config", junk.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scale_flag_overrides_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", r#"{"scale": "desk"}"#);
    let out = ris_see(&["validate", "--config", cfg.to_str().unwrap(), "--scale", "paper"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("scale = paper\n") && text.contains("base.N = 100\n") && text.contains("base.K = 4\n"));
}

#[test]
fn run_rejects_invalid_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.json", r#"{"num_drops": 0}"#);
    let csv = dir.path().join("out.csv");
    let out = run(&cfg, &csv, None);
    assert_eq!(out.status.code(), Some(2));
    assert!(!csv.exists());

    let out = run(&cfg, &csv, Some("not-a-number"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_reproducible_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "tiny.json", TINY);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(run(&cfg, &a, None).status.code(), Some(0));
    assert_eq!(run(&cfg, &b, None).status.code(), Some(0));
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.as_bytes(), std::fs::read(&b).unwrap().as_slice());

    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        body[0],
        "method,csi,p_max_dbm,drop,see_approx,see_true,ssr_approx,ssr_true,iters,runtime_ms,converged"
    );
    assert_eq!(body.len(), 13);
    let mut combos: Vec<(String, String)> = body[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 11);
            assert!(f[9].is_empty());
            for v in &f[4..8] {
                v.parse::<f64>().unwrap();
            }
            (format!("{}/{}", f[0], f[1]), f[3].to_string())
        })
        .collect();
    combos.sort();
    combos.dedup();
    assert_eq!(combos.len(), 12);
    assert!(text.lines().any(|l| l.starts_with("# seed=1 ")));
}

#[test]
fn seed_env_var_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "tiny.json", TINY);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(run(&cfg, &a, None).status.code(), Some(0));
    assert_eq!(run(&cfg, &b, Some("4242")).status.code(), Some(0));
    let a = std::fs::read_to_string(a).unwrap();
    let b = std::fs::read_to_string(b).unwrap();
    assert!(b.lines().any(|l| l.starts_with("# seed=4242 ")));
    assert_ne!(a, b);
}

#[test]
fn timing_flag_fills_runtime_column() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "tiny.json", TINY);
    let csv = dir.path().join("t.csv");
    let out = ris_see(
        &["run", "--config", cfg.to_str().unwrap(), "--out", csv.to_str().unwrap(), "--timing"],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(csv).unwrap();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let ms: f64 = line.split(',').nth(9).unwrap().parse().unwrap();
        assert!(ms >= 0.0);
    }
}
