//! The `fsochan` binary: subcommands, exit codes, tables and the stats cache.

use std::path::Path;
use std::process::{Command, Output};

const VACUUM: &str = "\
[scenario]
id = vac
seed = 3
outputs = stats

[channel]
cn2 = 0
wavelength = 800 nm
length = 2 km
w0 = 2 cm
aperture = 4 cm
extinction = 1 dB/km
";

const LINK: &str = "\
[scenario]
id = link
seed = 1
outputs = stats, pdt, exceedance, squeezing, qkd

[budget]
points = 2^14
replicates = 8

[channel]
cn2 = 3e-15
wavelength = 800 nm
length = 3 km
w0 = 2 cm
aperture = 4 cm
extinction = 1 dB/km

[tracking]
fractions = 0, 0.5, 1

[postselection]
thresholds = 0, 0.6

[squeezing]
input = -2.4 dB

[qkd]
draws = 2000
";

fn fsochan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsochan"))
        .args(args)
        .current_dir(dir)
        .env("FSOCHAN_CACHE_DIR", dir.join("env-cache"))
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().to_string()).collect()
}

#[test]
fn vacuum_stats_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "vac.conf", VACUUM);
    let out = fsochan(dir.path(), &["stats", &cfg, "--out-dir", "out"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/vac_stats.csv")).unwrap();
    assert!(!csv.contains('\r'));
    assert_eq!(column(&csv, "scenario_id"), ["vac"]);
    assert_eq!(column(&csv, "seed"), ["3"]);
    let eta: f64 = column(&csv, "mean_eta")[0].parse().unwrap();
    let w = 2.0 * 2000.0 / (2.0 * std::f64::consts::PI / 800e-9 * 0.02);
    let exact = 1.0 - (-2.0 * 0.04f64.powi(2) / (w * w)).exp();
    assert!((eta - exact).abs() < 1e-8, "{eta} vs {exact}");
    // nine significant digits
    assert_eq!(column(&csv, "mean_eta")[0].split('e').next().unwrap().len(), 10);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/vac_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["points"][0]["cache"], "miss");
    assert!(dir.path().join("env-cache").is_dir());
}

#[test]
fn pdt_table_covers_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "link.conf", LINK);
    let out = fsochan(dir.path(), &["pdt", &cfg, "--no-cache", "--out-dir", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/link_pdt.csv")).unwrap();
    let f = column(&csv, "tracking_fraction");
    let eta: Vec<f64> = column(&csv, "eta").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(eta.len(), 3 * 501);
    assert_eq!(f.iter().filter(|s| s.starts_with("5.0")).count(), 501);
    assert_eq!((eta[0], eta[1], eta[500]), (0.0, 0.002, 1.0));
    // only the requested table plus the PDT file and manifest
    assert!(!dir.path().join("o/link_stats.csv").exists());
    assert!(dir.path().join("o/link_pdt.json").exists());
}

#[test]
fn bad_aperture_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.conf", &VACUUM.replace("aperture = 4 cm", "aperture = 0 cm"));
    let out = fsochan(dir.path(), &["stats", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("channel.aperture") && err.contains("line 11"), "{err}");
}

#[test]
fn other_failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = fsochan(dir.path(), &["stats", "missing.conf"]);
    assert_eq!(out.status.code(), Some(5));
    let cfg = write(dir.path(), "vac.conf", VACUUM);
    let out = fsochan(dir.path(), &["sweep", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let out = fsochan(dir.path(), &["stats", &cfg, "--budget", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write(dir.path(), "sq.conf", &VACUUM.replace("outputs = stats", "outputs = squeezing"));
    let out = fsochan(dir.path(), &["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cache_is_transparent_and_survives_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "link.conf", LINK);
    let cache = dir.path().join("cache");
    let cache_arg = cache.to_str().unwrap();
    let run = |out: &str, extra: &[&str]| {
        let mut args = vec!["run", &cfg, "--out-dir", out];
        args.extend_from_slice(extra);
        let o = fsochan(dir.path(), &args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o
    };
    run("cold", &["--cache-dir", cache_arg]);
    run("warm", &["--cache-dir", cache_arg]);
    run("none", &["--no-cache"]);
    let entry = std::fs::read_dir(&cache).unwrap().next().unwrap().unwrap().path();
    std::fs::write(&entry, "{ truncated").unwrap();
    let o = run("healed", &["--cache-dir", cache_arg]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ignored"));
    let manifest = |d: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(d).join("link_manifest.json")).unwrap()).unwrap()
    };
    assert_eq!(manifest("warm")["points"][0]["cache"], "hit");
    assert_eq!(manifest("healed")["points"][0]["cache"], "corrupt");
    for t in ["stats", "pdt", "exceedance", "squeezing", "qkd"] {
        let name = format!("link_{t}.csv");
        let cold = std::fs::read(dir.path().join("cold").join(&name)).unwrap();
        for other in ["warm", "none", "healed"] {
            assert_eq!(cold, std::fs::read(dir.path().join(other).join(&name)).unwrap(), "{other}/{name}");
        }
    }
}

#[test]
fn qkd_from_saved_pdt_matches_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "link.conf", &LINK.replace("stats, pdt, exceedance, squeezing, qkd", "qkd"));
    let o = fsochan(dir.path(), &["qkd", &cfg, "--no-cache", "--out-dir", "a"]);
    assert!(o.status.success());
    let o = fsochan(dir.path(), &["qkd", &cfg, "--out-dir", "b", "--pdt", "a/link_pdt.json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = std::fs::read_to_string(dir.path().join("a/link_qkd.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b/link_qkd.csv")).unwrap();
    for col in ["rate", "rate_tracked", "improvement"] {
        assert_eq!(column(&a, col), column(&b, col));
    }
    let o = fsochan(dir.path(), &["qkd", &cfg, "--out-dir", "c", "--pdt", "link.conf"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn sweep_rows_follow_sweep_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sw.conf", &format!("{VACUUM}\n[sweep]\nlengths = 1 km, 1.5 km, 3 km\n"));
    let o = fsochan(dir.path(), &["sweep", &cfg, "--no-cache", "--out-dir", "s"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("s/vac_stats.csv")).unwrap();
    assert_eq!(column(&csv, "length_m"), ["1.00000000e3", "1.50000000e3", "3.00000000e3"]);
    let eta: Vec<f64> = column(&csv, "mean_eta").iter().map(|s| s.parse().unwrap()).collect();
    assert!(eta.windows(2).all(|w| w[1] < w[0]));
}
