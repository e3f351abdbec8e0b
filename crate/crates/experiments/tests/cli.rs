use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn worked_example() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/worked_example.json")
}

fn dispcomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispcomp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, config: &Path, command: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        command,
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let out = dispcomp(&args);
    assert!(out.status.success(), "{command} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, patch: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(worked_example()).unwrap()).unwrap();
    patch(&mut v);
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    path
}

fn parse_csv(text: &str) -> (String, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    (header, lines.map(|l| l.split(',').map(str::to_owned).collect()).collect())
}

#[test]
fn outputs_are_byte_identical_across_runs_and_job_counts() {
    let cfg = worked_example();
    let dirs: Vec<TempDir> = (0..3).map(|_| TempDir::new().unwrap()).collect();
    for (dir, jobs) in dirs.iter().zip(["1", "4", "4"]) {
        run_in(dir.path(), &cfg, "sweep-k", &["--jobs", jobs]);
        run_in(dir.path(), &cfg, "region", &[]);
    }
    for name in ["sweep.csv", "region.csv", "region_table.csv"] {
        let first = fs::read(dirs[0].path().join(name)).unwrap();
        for d in &dirs[1..] {
            assert_eq!(first, fs::read(d.path().join(name)).unwrap(), "{name} differs");
        }
    }
}

#[test]
fn meta_records_width_metric_and_config() {
    let dir = TempDir::new().unwrap();
    run_in(dir.path(), &worked_example(), "sweep-k", &["--seed", "7"]);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["width_metric"], "fwhm_intensity_linear_interp");
    assert_eq!(meta["command"], "sweep-k");
    assert_eq!(meta["seed"], 7);
    assert_eq!(meta["config"]["fiber"]["length_km"], 130.0);
    assert!((meta["si"]["fiber_length_m"].as_f64().unwrap() - 130e3).abs() < 1e-6);
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), |v| v["fiber"]["lenght_km"] = 5.into());
    let out = dispcomp(&["region", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lenght_km"));

    let cfg = write_config(dir.path(), |v| v["compensator"]["alpha"] = serde_json::json!([1.5]));
    let out = dispcomp(&["region", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let out = dispcomp(&["region"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_numbers_and_unwritable_paths_fail() {
    let out = dispcomp(&["convert", "--d", "seventeen"]);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());

    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub");
    let out = dispcomp(&[
        "region",
        "--config",
        worked_example().to_str().unwrap(),
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn region_csv_follows_the_inverse_square_law() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), |v| v["compensator"]["alpha"] = serde_json::json!([0.25, 0.5, 1.0]));
    run_in(dir.path(), &cfg, "region", &[]);
    let (header, rows) = parse_csv(&fs::read_to_string(dir.path().join("region.csv")).unwrap());
    assert_eq!(header, "B_hz,z_max_m,alpha,beta2_si");
    let rows: Vec<[f64; 4]> = rows
        .iter()
        .map(|r| [0, 1, 2, 3].map(|i| r[i].parse::<f64>().unwrap()))
        .collect();
    assert_eq!(rows.len(), 39 * 3);

    for alpha in [0.25, 0.5, 1.0] {
        let per: Vec<_> = rows.iter().filter(|r| r[2] == alpha).collect();
        let c0 = per[0][1] * per[0][0] * per[0][0];
        for r in &per {
            // nine significant digits in the text
            assert!((r[1] * r[0] * r[0] - c0).abs() <= 2e-8 * c0);
        }
    }
    for chunk in rows.chunks(3) {
        assert!(chunk[0][1] > chunk[1][1] && chunk[1][1] > chunk[2][1], "larger alpha must shrink z_max");
    }
    let spot = rows.iter().find(|r| r[0] == 3e9 && r[2] == 1.0).unwrap();
    assert!((spot[1] / 1e3 - 1123.0).abs() < 1.0, "z_max = {} km", spot[1] / 1e3);

    let (header, table) = parse_csv(&fs::read_to_string(dir.path().join("region_table.csv")).unwrap());
    assert_eq!(header, "B_hz,z_m,alpha,stable");
    for r in &table {
        let (b, z, alpha) = (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap(), r[2].parse::<f64>().unwrap());
        let zmax = rows.iter().find(|x| x[0] == b && x[2] == alpha).unwrap()[1];
        if (z - zmax).abs() > 1e-6 * zmax {
            assert_eq!(r[3] == "1", z < zmax);
        }
    }
}

#[test]
fn sweep_flags_divergence_outside_the_region() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), |v| {
        v["sweep"]["xi"] = serde_json::json!([1.0, 10.0]);
        v["compensator"]["alpha"] = serde_json::json!([1.0]);
        v["compensator"]["k_max"] = 3.into();
    });
    let out = run_in(dir.path(), &cfg, "sweep-k", &[]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("4 flagged diverged"));
    let (header, rows) = parse_csv(&fs::read_to_string(dir.path().join("sweep.csv")).unwrap());
    assert_eq!(header, "xi,alpha,K,broadening_factor,residual_max");
    assert_eq!(rows.len(), 8);
    for r in &rows {
        let xi: f64 = r[0].parse().unwrap();
        // edge phase ξ/8 against the α = 1 limit π/3
        assert_eq!(r[3] == "diverged", xi / 8.0 >= std::f64::consts::FRAC_PI_3, "row {r:?}");
    }
}

#[test]
fn propagate_dumps_envelopes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), |v| v["signal"]["n_samples"] = 1024.into());
    run_in(dir.path(), &cfg, "propagate", &["--k", "2"]);
    for name in ["before.csv", "after.csv", "compensated.csv"] {
        let (header, rows) = parse_csv(&fs::read_to_string(dir.path().join(name)).unwrap());
        assert_eq!(header, "t_s,re,im");
        assert_eq!(rows.len(), 1024);
    }
}

#[test]
fn convert_reports_both_units() {
    let out = dispcomp(&["convert", "--d", "17"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let beta2: f64 = text
        .lines()
        .find(|l| l.starts_with("beta2"))
        .and_then(|l| l.split_whitespace().nth(1))
        .unwrap()
        .parse()
        .unwrap();
    assert!((beta2 + 21.68).abs() < 0.01, "{text}");

    let out = dispcomp(&["convert", "--d", "2200", "--quoted-beta2", "-2718"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("-2.80598604e3 ps^2/km"), "{text}");
    assert!(text.contains("+3.2"), "{text}");
}
