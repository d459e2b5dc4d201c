use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn fxvg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fxvg")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = fxvg(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn fixture(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
        .to_string_lossy()
        .into_owned()
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn dir_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ten_path_figure_config_writes_510_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    ok(&["simulate", "--config", &fixture("configs/ten_paths.toml"), "--out-dir", dir_arg(&out)]);
    let csv = fs::read_to_string(out.join("paths.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "path_id,step,t,S,V,rd,rf");
    assert_eq!(lines.len(), 1 + 10 * 51);
    assert!(lines.last().unwrap().starts_with("9,50,5,"));
    let m = manifest(&out);
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["outputs"][0], "paths.csv");
}

#[test]
fn identical_invocations_write_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    for format in ["csv", "bin", "json"] {
        let a = tmp.path().join(format!("a-{format}"));
        let b = tmp.path().join(format!("b-{format}"));
        let args = ["simulate", "--seed", "5", "--paths", "20", "--steps", "10", "--format", format];
        ok(&[&args[..], &["--out-dir", dir_arg(&a)]].concat());
        ok(&[&args[..], &["--out-dir", dir_arg(&b)]].concat());
        let name = format!("paths.{format}");
        assert_eq!(digest(&a.join(&name)), digest(&b.join(&name)));
    }
}

#[test]
fn configuration_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_arg(tmp.path());
    assert_eq!(fxvg(&["simulate", "--seed", "1", "--paths", "0", "--out-dir", d]).status.code(), Some(2));
    assert_eq!(fxvg(&["simulate", "--out-dir", d]).status.code(), Some(2));
    assert_eq!(fxvg(&["price", "--seed", "1", "--strike-ladder", "--out-dir", d]).status.code(), Some(2));
    assert_eq!(fxvg(&["simulate", "--seed", "1", "--alpha", "1", "--out-dir", d]).status.code(), Some(2));
    assert_eq!(
        fxvg(&["price", "--seed", "1", "--paths", "10", "--format", "bin", "--out-dir", d]).status.code(),
        Some(2)
    );
    let cfg = tmp.path().join("typo.toml");
    fs::write(&cfg, "[model]\nsigmav = 0.1\n").unwrap();
    assert_eq!(fxvg(&["simulate", "--config", dir_arg(&cfg), "--seed", "1", "--out-dir", d]).status.code(), Some(2));
}

#[test]
fn io_and_numerical_failures_have_their_own_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = dir_arg(tmp.path());
    assert_eq!(fxvg(&["compare", "--seed", "1", "--chain", "/no/such/chain.csv", "--out-dir", d]).status.code(), Some(3));
    assert_eq!(fxvg(&["simulate", "--config", "/no/such/config.toml", "--seed", "1", "--out-dir", d]).status.code(), Some(3));
    let cfg = tmp.path().join("indefinite.toml");
    fs::write(&cfg, "[correlation]\nsv = 0.9\nsd = 0.9\nvd = -0.9\n").unwrap();
    assert_eq!(fxvg(&["simulate", "--config", dir_arg(&cfg), "--seed", "1", "--out-dir", d]).status.code(), Some(4));
}

fn read_prices(dir: &Path) -> Vec<(f64, String, f64, f64)> {
    fs::read_to_string(dir.join("prices.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].to_string(), f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect()
}

#[test]
fn strike_ladder_is_monotone_and_american_dominates() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("price");
    ok(&[
        "price", "--seed", "2021", "--paths", "10000", "--nu", "0.5", "--strike-ladder", "95,100,105", "--out-dir",
        dir_arg(&out),
    ]);
    let rows = read_prices(&out);
    assert_eq!(rows.len(), 6);
    let american: Vec<f64> = rows.iter().filter(|r| r.1 == "american").map(|r| r.2).collect();
    assert!(american.windows(2).all(|w| w[0] <= w[1]), "{american:?}");
    for pair in rows.chunks(2) {
        let (eu, am) = (&pair[0], &pair[1]);
        assert_eq!((eu.1.as_str(), am.1.as_str()), ("european", "american"));
        assert!(am.2 >= eu.2 - 3.0 * eu.3.hypot(am.3));
    }
    let moments = fs::read_to_string(out.join("moments.csv")).unwrap();
    assert!(moments.starts_with("n,mean,variance,skewness,kurtosis\n10000,"));
}

#[test]
fn zero_noise_convergence_is_first_order_in_the_step() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("zero.toml");
    fs::write(
        &cfg,
        "[model]\nsigma_v = 0.0\nsigma_d = 0.0\nsigma_f = 0.0\nv0 = 0.0\na_v = 0.0\n\
         [simulation]\ntime_change = \"identity\"\nallow_degenerate = true\nseed = 1\npaths = 4\n",
    )
    .unwrap();
    let out = tmp.path().join("conv");
    ok(&["converge", "--config", dir_arg(&cfg), "--levels", "2,4,8", "--out-dir", dir_arg(&out)]);
    let slope = manifest(&out)["summary"]["slope"].as_f64().unwrap();
    // Level m has m² steps, so first order in Δt is slope -2 in m.
    assert!((slope + 2.0).abs() < 0.15, "slope {slope}");
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn synthetic_gaussian_sample_passes_gof() {
    let tmp = tempfile::tempdir().unwrap();
    let mut passes = 0;
    for seed in 0..20 {
        let out = tmp.path().join(format!("gof{seed}"));
        ok(&["gof", "--synthetic", "100000", "--seed", &seed.to_string(), "--bins", "20", "--out-dir", dir_arg(&out)]);
        let m = manifest(&out);
        assert_eq!(m["summary"]["dof"], 19);
        if !m["summary"]["reject_at_95"].as_bool().unwrap() {
            passes += 1;
        }
    }
    assert!(passes >= 18, "{passes} of 20");
}

#[test]
fn gof_reads_sample_files_and_writes_plot_data() {
    let tmp = tempfile::tempdir().unwrap();
    let sample = tmp.path().join("sample.csv");
    let values: String = (0..200).map(|i| format!("{}\n", ((i * 37) % 101) as f64 / 10.0)).collect();
    fs::write(&sample, format!("value\n{values}")).unwrap();
    let out = tmp.path().join("gof");
    ok(&["gof", "--sample", dir_arg(&sample), "--bins", "5", "--out-dir", dir_arg(&out)]);
    assert_eq!(fs::read_to_string(out.join("gof.csv")).unwrap().lines().count(), 6);
    let ecdf = fs::read_to_string(out.join("ecdf.csv")).unwrap();
    assert!(ecdf.trim_end().ends_with(",1"));
    assert!(out.join("histogram.csv").exists());
}

#[test]
fn compare_reproduces_the_fixture_nrmse() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cmp");
    ok(&["compare", "--config", &fixture("configs/e6z21_compare.toml"), "--out-dir", dir_arg(&out)]);
    assert_eq!(manifest(&out)["summary"]["nrmse"].as_f64().unwrap(), 0.007106075327201629);
}

#[test]
fn replay_is_byte_identical_for_any_worker_count() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    ok(&[
        "price", "--seed", "9", "--paths", "2000", "--workers", "1", "--strike-ladder", "100", "--out-dir",
        dir_arg(&first),
    ]);
    for workers in ["1", "4", "8"] {
        let again = tmp.path().join(format!("w{workers}"));
        ok(&[
            "replay",
            dir_arg(&first.join("manifest.json")),
            "--workers",
            workers,
            "--out-dir",
            dir_arg(&again),
            "--verify",
        ]);
        assert_eq!(digest(&first.join("prices.csv")), digest(&again.join("prices.csv")));
    }
}
