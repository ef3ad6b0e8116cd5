use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn temq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_temq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = "n_realizations = 2\nn_train = 3\nbits = [4, 6]\nseed = 5\n";

#[test]
fn repeated_sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = temq(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "branch,bits,total_bits,nmse_db,nmse_stderr,n,seed"
    );
    assert_eq!(lines.clone().count(), 8);
    assert!(lines.any(|l| l.starts_with("nus-nuq,6,12,")));
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = temq(&[
        "sweep",
        "--config",
        &cfg,
        "--bits",
        "3",
        "--seed",
        "9",
        "--realizations",
        "1",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let records = v.as_array().unwrap();
    assert_eq!(records.len(), 4);
    for r in records {
        assert_eq!(r["bits"], 3);
        assert_eq!(r["seed"], 9);
        assert_eq!(r["n"], 1);
    }
}

#[test]
fn single_realization_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = temq(&["generate", "--config", &cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("time_s,amplitude\n-0.45,"));
    assert_eq!(text.lines().count(), 9002);

    let o = temq(&["encode", "--config", &cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("index,instant_s,interval_s\n0,"));

    let o = temq(&["quantize", "--config", &cfg, "--branch", "nus-nuq", "--bits", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("interval,")).count(), 8);
    assert_eq!(text.lines().filter(|l| l.starts_with("amplitude,")).count(), 8);

    let o = temq(&["quantize", "--config", &cfg, "--bits", "2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["codebook"]["designer"], "compander");
    assert_eq!(v[0]["codebook"]["levels"].as_array().unwrap().len(), 4);

    let out = dir.path().join("recon.csv");
    let o = temq(&[
        "reconstruct",
        "--config",
        &cfg,
        "--unquantized",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    let nmse: f64 = err.trim().strip_prefix("nmse_db=").unwrap().parse().unwrap();
    assert!(nmse < -40.0);
    assert!(fs::read_to_string(out).unwrap().starts_with("time_s,amplitude\n"));
}

#[test]
fn distcheck_writes_both_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let hist = dir.path().join("hist.csv");
    let dens = dir.path().join("dens.csv");
    let o = temq(&[
        "distcheck",
        "--config",
        &cfg,
        "--out",
        hist.to_str().unwrap(),
        "--density-out",
        dens.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let h = fs::read_to_string(hist).unwrap();
    assert!(h.starts_with("bin_lo,bin_hi,mass,density\n"));
    assert_eq!(h.lines().count(), 65);
    let d = fs::read_to_string(dens).unwrap();
    let rows: Vec<(f64, f64)> = d
        .lines()
        .skip(1)
        .map(|l| {
            let (x, p) = l.split_once(',').unwrap();
            (x.parse().unwrap(), p.parse().unwrap())
        })
        .collect();
    let area: f64 = rows
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    assert!((area - 1.0).abs() < 1e-3, "{area}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "sed = 1\n");
    assert_eq!(temq(&["sweep", "--config", &bad]).status.code(), Some(2));
    let weak = write_config(dir.path(), "b = 0.5\n");
    assert_eq!(temq(&["generate", "--config", &weak]).status.code(), Some(2));
    assert_eq!(
        temq(&["generate", "--config", "/nonexistent/c.toml"]).status.code(),
        Some(4)
    );
    let cfg = write_config(dir.path(), SMALL);
    let o = temq(&["generate", "--config", &cfg, "--out", "/nonexistent/dir/x.csv"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(temq(&["sweep", "--format", "xml"]).status.code(), Some(2));
    // a 24-bit Lloyd–Max design needs more training samples than exist
    let o = temq(&["quantize", "--config", &cfg, "--branch", "nus-nuq", "--bits", "24"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}
