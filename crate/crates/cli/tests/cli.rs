use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use digitfreq_cli::config::RunConfig;
use digitfreq_cli::report::{effective_config, replay, run};
use serde_json::Value;
use tempfile::TempDir;

const SLLN: &str = r#"
experiment = "slln-run"
seeds = [1, 2, 3]
n = 4096
components = true

[law]
kind = "bernoulli"
weights = ["1/2", "1/2"]

[schedule]
functions = ["n", "2n", "n^2 + 2n"]

[observable]
kind = "indicator_product"
word = [0, 0, 0]
"#;

const DIM_UNIFORM: &str = r#"
experiment = "dim-formula"

[law]
kind = "bernoulli"
weights = ["1/4", "1/4", "1/4", "1/4"]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_digitfreq"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run_cli(dir: &Path, sub: &str, text: &str, extra: &[&str]) -> Output {
    let config = write_config(dir, text);
    bin()
        .arg(sub)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn report_path(out: &Output) -> PathBuf {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout.clone()).unwrap().trim())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn dim_formula_uniform_is_one() {
    let tmp = TempDir::new().unwrap();
    let report = read_json(&report_path(&run_cli(tmp.path(), "dim-formula", DIM_UNIFORM, &[])));
    assert_eq!(report["results"]["value"].as_f64(), Some(1.0));
    assert_eq!(report["results"]["formula"], "bernoulli_entropy");
    assert!(report["results"]["diagnostics"].is_object());
}

#[test]
fn slln_run_writes_per_seed_traces_and_stamp() {
    let tmp = TempDir::new().unwrap();
    let path = report_path(&run_cli(tmp.path(), "slln-run", SLLN, &[]));
    let report = read_json(&path);
    let dir = path.parent().unwrap();
    let hash = report["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(dir.ends_with(&hash[..16]));
    assert_eq!(report["seeds"], serde_json::json!([1, 2, 3]));
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    for seed in 1..=3 {
        let csv = fs::read_to_string(dir.join(format!("{seed}.csv"))).unwrap();
        assert!(csv.starts_with("n,sum,average,deviation,component_1"));
    }
    assert_eq!(report["results"]["target_exact"], "1/8");
    assert!(report["results"]["max_deviation"].as_f64().unwrap() < 0.05);
}

#[test]
fn seeds_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let path = report_path(&run_cli(tmp.path(), "run", SLLN, &["--seeds", "10..=12"]));
    let report = read_json(&path);
    assert_eq!(report["seeds"], serde_json::json!([10, 11, 12]));
    assert!(path.parent().unwrap().join("12.csv").exists());
    assert!(!path.parent().unwrap().join("1.csv").exists());
}

#[test]
fn config_text_round_trips_through_report() {
    let tmp = TempDir::new().unwrap();
    let report = read_json(&report_path(&run_cli(tmp.path(), "run", SLLN, &[])));
    let text = report["config"].as_str().unwrap();
    let cfg = RunConfig::parse(text).unwrap();
    assert_eq!(cfg.canonical().unwrap(), text);
    assert_eq!(cfg.hash().unwrap(), report["config_hash"].as_str().unwrap());
}

#[test]
fn malformed_config_exits_1() {
    let tmp = TempDir::new().unwrap();
    let out = run_cli(tmp.path(), "run", "experiment = \"slln-run\"\nbogus = 3\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    let out = run_cli(tmp.path(), "run", "experiment = [", &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn subcommand_must_match_config() {
    let tmp = TempDir::new().unwrap();
    let out = run_cli(tmp.path(), "cf-bound", DIM_UNIFORM, &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_schedule_exits_2_with_location() {
    let tmp = TempDir::new().unwrap();
    let text = SLLN.replace(r#"["n", "2n", "n^2 + 2n"]"#, r#"["2n", "n", "n^2"]"#);
    let out = run_cli(tmp.path(), "slln-run", &text, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("i = 2") && err.contains("n = 1"), "{err}");
}

#[test]
fn non_primitive_markov_exits_2() {
    let tmp = TempDir::new().unwrap();
    let text = "experiment = \"dim-formula\"\n[law]\nkind = \"markov\"\nR = [[\"1/2\", 0], [0, \"1/2\"]]\n";
    let out = run_cli(tmp.path(), "dim-formula", text, &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resource_cap_exits_3() {
    let tmp = TempDir::new().unwrap();
    let text = "experiment = \"mixing-report\"\nbrute_force_depth = 40\ngrid = [1]\n\
                [law]\nkind = \"finite_chain\"\nP = [[\"3/4\", \"1/4\"], [\"1/4\", \"3/4\"]]\n";
    let out = run_cli(tmp.path(), "mixing-report", text, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn replay_untouched_report_matches() {
    let tmp = TempDir::new().unwrap();
    let path = report_path(&run_cli(tmp.path(), "run", SLLN, &[]));
    let out = bin().arg("--replay").arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = bin().arg("replay").arg(&path).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn replay_reports_first_edited_row() {
    let tmp = TempDir::new().unwrap();
    let path = report_path(&run_cli(tmp.path(), "run", SLLN, &[]));
    let csv = path.parent().unwrap().join("2.csv");
    let mut lines: Vec<String> = fs::read_to_string(&csv).unwrap().lines().map(String::from).collect();
    lines[3] = lines[3].replacen(',', ",9", 1);
    fs::write(&csv, lines.join("\n") + "\n").unwrap();
    let out = bin().arg("--replay").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("2.csv row 4"), "{err}");
}

#[test]
fn replay_warns_on_version_mismatch() {
    let tmp = TempDir::new().unwrap();
    let path = report_path(&run_cli(tmp.path(), "dim-formula", DIM_UNIFORM, &[]));
    let mut report = read_json(&path);
    report["version"] = Value::String("0.0.0-old".into());
    fs::write(&path, serde_json::to_string_pretty(&report).unwrap()).unwrap();
    let out = bin().arg("--replay").arg(&path).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("version 0.0.0-old"));
}

#[test]
fn replay_rejects_tampered_config() {
    let tmp = TempDir::new().unwrap();
    let path = report_path(&run_cli(tmp.path(), "run", SLLN, &[]));
    let mut report = read_json(&path);
    let text = report["config"].as_str().unwrap().replace("n = 4096", "n = 4095");
    report["config"] = Value::String(text);
    fs::write(&path, serde_json::to_string_pretty(&report).unwrap()).unwrap();
    let out = bin().arg("--replay").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn worker_count_does_not_change_bytes() {
    let configs = [
        SLLN.to_string(),
        "experiment = \"dim-estimate\"\nseeds = [1, 2]\nn = 20000\n[law]\nkind = \"markov\"\n\
         R = [[\"2/5\", \"1/10\"], [\"1/10\", \"2/5\"]]\n"
            .to_string(),
        "experiment = \"mixingale-decay\"\nm_grid = [2, 4, 8]\ncentering_grid = [1, 2, 3]\n\
         [law]\nkind = \"finite_chain\"\nP = [[\"3/4\", \"1/4\"], [\"1/4\", \"3/4\"]]\n\
         [schedule]\nfunctions = [\"n\", \"2n\"]\n[observable]\nkind = \"indicator_product\"\nword = [0, 1]\n"
            .to_string(),
    ];
    for text in configs {
        let cfg = effective_config(RunConfig::parse(&text).unwrap(), None);
        let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
        let ra = run(&cfg, a.path(), Some(1)).unwrap();
        let rb = run(&cfg, b.path(), Some(8)).unwrap();
        for entry in fs::read_dir(ra.parent().unwrap()).unwrap() {
            let name = entry.unwrap().file_name();
            let x = fs::read(ra.parent().unwrap().join(&name)).unwrap();
            let y = fs::read(rb.parent().unwrap().join(&name)).unwrap();
            assert!(x == y, "{name:?} differs between 1 and 8 workers");
        }
        replay(&ra, Some(8)).unwrap();
        replay(&rb, Some(1)).unwrap();
    }
}
