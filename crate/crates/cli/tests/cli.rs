use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nf_cli::config::apply_override;
use nf_cli::{emit_plotdata, RunConfig};

const SMALL: [&str; 8] = ["--set", "modes.jmax=8", "--set", "modes.k_cut=6", "--set", "domain.k_scan=6", "--set", "kam.steps=2"];

fn nf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nf")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nf-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn empty_document_is_all_defaults() {
    assert_eq!(RunConfig::from_toml("", &[]).unwrap(), RunConfig::default());
}

#[test]
fn overrides_reach_nested_tables_and_keep_types() {
    let cfg = RunConfig::from_toml("[kam]\nsteps = 5\n", &["kam.steps=2".into(), "measure.mode=eta6_eps".into(), "stability.deltas=[0.1]".into()]).unwrap();
    assert_eq!(cfg.kam.steps, 2);
    assert_eq!(cfg.stability.deltas, vec![0.1]);
    assert_eq!(cfg.measure.mode, nf_cli::config::ThresholdChoice::Eta6Eps);
    let mut doc = toml::Table::new();
    assert!(apply_override(&mut doc, "no_equals_sign").is_err());
}

#[test]
fn unknown_keys_and_bad_values_are_schema_errors() {
    for bad in ["[kam]\nsteps = 3\nwobble = 1\n", "[nonsense]\n", "seed = \"abc\"\n"] {
        let e = RunConfig::from_toml(bad, &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{bad}: {e}");
    }
    let e = RunConfig::from_toml("", &["domain.gamma=0.5".into()]).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn unknown_key_exits_with_status_two() {
    let out = nf(&["kam", "--set", "kam.bogus=1", "--out", scratch("bogus").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resonant_frequencies_abort_with_status_four() {
    // omega_2 = 2 omega_1 makes k = (2,-1) an exact resonance
    let dir = scratch("res");
    let mut args = vec!["kam", "--out", dir.to_str().unwrap(), "--set", "dnls.ratio=2.0"];
    args.extend(SMALL);
    let out = nf(&args);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn selftest_on_an_empty_config_passes() {
    let dir = scratch("self");
    let cfg = dir.join("empty.toml");
    fs::create_dir_all(&dir).unwrap();
    fs::write(&cfg, "").unwrap();
    let out = nf(&["selftest", "--config", cfg.to_str().unwrap(), "--out", dir.join("run").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.matches("PASS").count(), 3, "{text}");
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["pass"], true);
    assert_eq!(manifest["config"]["selftest"]["triples"], 200);
}

#[test]
fn kam_table_has_a_superlinear_column() {
    let dir = scratch("kam");
    let mut args = vec!["kam", "--out", dir.to_str().unwrap()];
    args.extend(SMALL);
    let out = nf(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.join("kam_steps.csv")).unwrap();
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let lr = head.iter().position(|h| *h == "log_ratio").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][lr], "nan");
    assert!(rows[1][lr].parse::<f64>().unwrap() >= 1.1);
    assert!(dir.join("checkpoints/generator_1.txt").exists());
}

#[test]
fn linear_stability_run_is_flat() {
    let dir = scratch("lin");
    let mut args = vec!["stability", "--out", dir.to_str().unwrap(), "--set", "dnls.eps=0", "--set", "stability.samples=8"];
    args.extend(SMALL);
    let out = nf(&args);
    assert_eq!(out.status.code(), Some(0));
    let summary = fs::read_to_string(dir.join("stability_summary.csv")).unwrap();
    assert_eq!(summary.matches("stable (linear)").count(), 2, "{summary}");
    let text = fs::read_to_string(dir.join("stability.csv")).unwrap();
    let head: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(head, ["delta", "t", "H", "N_tilde", "Y_1", "Y_2", "d"]);
    for delta in ["2.0000000000000000e-2", "5.0000000000000003e-2"] {
        let d: Vec<f64> = text.lines().skip(1).filter(|l| l.starts_with(delta)).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
        assert!(!d.is_empty());
        let spread = d.iter().cloned().fold(f64::MIN, f64::max) - d.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-9, "{delta}: {spread}");
    }
    let tidy = fs::read_to_string(dir.join("plot_stability.csv")).unwrap();
    assert!(tidy.starts_with("delta,t,observable,value\n"));
}

#[test]
fn outputs_are_identical_across_runs_and_worker_counts() {
    let base = scratch("det");
    let run = |name: &str, cmd: &str, jobs: &str, extra: &[&str]| {
        let dir = base.join(name);
        let mut args = vec![cmd, "--out", dir.to_str().unwrap(), "--jobs", jobs, "--seed", "11"];
        args.extend(extra);
        let out = nf(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        dir
    };
    let m = ["--set", "measure.samples=1500", "--set", "measure.jmax=8"];
    let (a, b, c) = (run("m1", "measure", "1", &m), run("m2", "measure", "1", &m), run("m3", "measure", "3", &m));
    assert_eq!(csvs(&a), csvs(&b));
    assert_eq!(csvs(&a), csvs(&c));
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(c.join("manifest.json")).unwrap());
    let mut k = SMALL.to_vec();
    k.extend(["--set", "dnls.eps=0.002"]);
    let (x, y) = (run("k1", "kam", "1", &k), run("k3", "kam", "3", &k));
    assert_eq!(csvs(&x), csvs(&y));
}

#[test]
fn plotdata_re_emission_is_byte_identical() {
    let dir = scratch("plot");
    let out = nf(&["measure", "--out", dir.to_str().unwrap(), "--set", "measure.samples=1000", "--set", "measure.jmax=6"]);
    assert_eq!(out.status.code(), Some(0));
    let before = fs::read(dir.join("plot_measure.csv")).unwrap();
    let head = String::from_utf8_lossy(&before).lines().next().unwrap().to_string();
    assert_eq!(head, "eta_acute,fraction,ci_lo,ci_hi");
    emit_plotdata(&dir).unwrap();
    assert_eq!(fs::read(dir.join("plot_measure.csv")).unwrap(), before);
    assert!(emit_plotdata(&scratch("nothing-here")).is_err());
}
