use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use isac_cli::config::{hex_digest, load, Config, Overrides, Scale};
use serde_json::Value;

fn isac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isac")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn error_fields(out: &Output) -> Vec<String> {
    stderr_json(out)["errors"].as_array().unwrap().iter().map(|e| e["field"].as_str().unwrap().to_string()).collect()
}

fn csv_hashes(dir: &Path) -> BTreeMap<String, String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), hex_digest(&std::fs::read(&p).unwrap())))
        .collect()
}

/// Small but complete scenario for fast end-to-end runs.
const SMALL: &str = r#"
[cd_boundary]
input_points = 21
state_nodes = 8
mu = [0.0, 1.0, 100.0]

[crb_rate]
instances = 6
n_mc = 50
large_block_instances = 1
large_block_n_mc = 20

[elmmse]
tx_antennas = 3
rx_antennas = 2
block_length = 3
n_mc = 20
snr_db = [0.0, 10.0]
jensen_block_lengths = [4, 16]
jensen_n_mc = 20

[elmmse.sgd]
iterations = 200
pilot_iterations = 50
validation_draws = 16
checkpoint_every = 50

[zzb]
n_bins = 8
lag_points = 128
restarts = 3
snr_db = [0.0, 20.0]
"#;

#[test]
fn validate_accepts_shipped_configs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["desk.toml", "fig5.cfg", "paper.toml"] {
        let out = isac(&["validate", root.join(name).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(report["status"], "ok");
    }
}

#[test]
fn negative_power_is_a_named_field_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[elmmse]\npower = -1.0\n");
    let out = isac(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["kind"], "invalid_config");
    assert_eq!(error_fields(&out), vec!["elmmse.power"]);
}

#[test]
fn short_semiunitary_block_is_a_named_field_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"elmmse": {"codebook": "semiunitary", "tx_antennas": 8, "block_length": 4}}"#);
    let out = isac(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_fields(&out), vec!["elmmse.block_length"]);
}

#[test]
fn unknown_and_mistyped_keys_are_rejected_with_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "typo.toml", "[zzb]\nrestart = 3\n");
    let out = isac(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert!(err["errors"][0]["message"].as_str().unwrap().contains("restart"));
    assert_eq!(err["errors"][0]["field"], "zzb.restart");

    let cfg = write(dir.path(), "type.toml", "[crb_rate]\ninstances = \"many\"\n");
    let out = isac(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(error_fields(&out), vec!["crb_rate.instances"]);

    let cfg = write(dir.path(), "top.toml", "colour = 1\n");
    assert_eq!(isac(&["validate", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unknown_analysis_and_zero_workers_are_rejected() {
    assert_eq!(isac(&["run", "fig11"]).status.code(), Some(2));
    assert_eq!(isac(&["run", "re-region", "--workers", "0"]).status.code(), Some(2));
    assert_eq!(isac(&["bogus"]).status.code(), Some(2));
}

#[test]
fn scale_selects_defaults_and_file_values_win() {
    let paper = load(None, &Overrides { scale: Some(Scale::Paper), ..Overrides::default() }).unwrap();
    assert_eq!((paper.elmmse.tx_antennas, paper.elmmse.rx_antennas, paper.elmmse.block_length), (64, 32, 32));
    let desk = load(None, &Overrides::default()).unwrap();
    assert_eq!(desk, Config::defaults(Scale::Desk));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "seed = 3\n[zzb]\nrestarts = 4\n");
    let c = load(Some(&cfg), &Overrides { seed: Some(11), ..Overrides::default() }).unwrap();
    assert_eq!(c.seed, 11);
    assert_eq!(c.zzb.restarts, 4);
    assert_eq!(c.zzb.n_bins, 64);
}

#[test]
fn config_hash_ignores_output_dir_only() {
    let a = Config::defaults(Scale::Desk);
    let mut b = a.clone();
    b.output_dir = "elsewhere".into();
    assert_eq!(a.sha256(), b.sha256());
    b.seed += 1;
    assert_ne!(a.sha256(), b.sha256());
}

#[test]
fn coincident_angles_collapse_the_region() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = isac(&["run", "re-region", "--theta-c", "60", "--theta-s", "60", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(out_dir.join("re_region.csv")).unwrap();
    let rows: Vec<(f64, f64)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[4].parse().unwrap(), r[5].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 101);
    for (rate, e) in &rows {
        assert!((rate - rows[0].0).abs() < 1e-12 && (e - rows[0].1).abs() < 1e-12);
    }
}

#[test]
fn csv_layout_header_precision_and_trailer() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = isac(&["run", "re-region", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(out_dir.join("re_region.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "pair,theta_c_deg,theta_s_deg,lambda,rate_bits,exponent");
    let sha = load(None, &Overrides::default()).unwrap().sha256();
    assert_eq!(*lines.last().unwrap(), format!("# manifest=manifest.json config_sha256={sha}"));
    // 17 significant digits: the mantissa has 16 decimals.
    let rate = lines[1].split(',').nth(4).unwrap();
    let mantissa = rate.split('e').next().unwrap();
    assert_eq!(mantissa.split('.').nth(1).unwrap().len(), 16);
    let parsed: f64 = rate.parse().unwrap();
    assert_eq!(format!("{parsed:.16e}"), rate);

    let manifest: Value = serde_json::from_slice(&std::fs::read(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], sha.as_str());
    assert_eq!(manifest["seed"], 7);
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let bytes = std::fs::read(out_dir.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex_digest(&bytes));
    }
    assert!(manifest["stages"][0]["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn json_format_writes_row_objects() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("j");
    let out = isac(&["run", "re-region", "--format", "json", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&std::fs::read(out_dir.join("re_region.json")).unwrap()).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 202);
    assert!(doc["rows"][0]["rate_bits"].as_f64().unwrap() > 3.0);
}

#[test]
fn full_run_is_byte_identical_across_repeats_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", SMALL);
    let mut hashes = Vec::new();
    for (tag, workers) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out_dir = dir.path().join(tag);
        let out = isac(&[
            "run",
            "all",
            cfg.to_str().unwrap(),
            "--seed",
            "5",
            "--workers",
            workers,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(matches!(out.status.code(), Some(0) | Some(3)), "{}", String::from_utf8_lossy(&out.stderr));
        hashes.push(csv_hashes(&out_dir));
    }
    assert_eq!(hashes[0].len(), 10);
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(hashes[0], hashes[2]);

    // A single stage reproduces its slice of `all`.
    let solo = dir.path().join("solo");
    isac(&["run", "zzb", cfg.to_str().unwrap(), "--seed", "5", "--out", solo.to_str().unwrap()]);
    let solo = csv_hashes(&solo);
    for (file, h) in &solo {
        assert_eq!(hashes[0][file], *h, "{file}");
    }

    let other = dir.path().join("other");
    isac(&["run", "zzb", cfg.to_str().unwrap(), "--seed", "6", "--out", other.to_str().unwrap()]);
    assert_ne!(csv_hashes(&other), solo);
}
