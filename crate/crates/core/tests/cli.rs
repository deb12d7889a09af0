use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nearfar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nearfar")).args(args).output().unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_MME: &str = r#"{
  "kind": "mme-map",
  "seed": 11,
  "array": { "n_antennas": 32, "spacing_wavelengths": 0.5, "carrier_hz": 28e9 },
  "ofdm": { "n_subcarriers": 4, "bandwidth_hz": 100e6 },
  "power": { "tx_power_dbm": 20.0, "noise_psd_dbm_per_hz": -173.8, "noise_figure_db": 10.0 },
  "sweep": {
    "x": { "min_m": 2.0, "max_m": 8.0, "count": 3, "scale": "log" },
    "y": { "min_m": -2.0, "max_m": 2.0, "count": 2, "scale": "linear" }
  }
}"#;

const SMALL_SER: &str = r#"{
  "kind": "ser-map",
  "seed": 5,
  "array": { "n_antennas": 16, "spacing_wavelengths": 0.5, "carrier_hz": 3.5e9 },
  "ue": { "rows": 1, "cols": 2, "spacing_m": 0.3 },
  "ser": { "target_ser": 0.05, "tol_db": 1.0 },
  "sweep": {
    "x": { "min_m": 3.0, "max_m": 30.0, "count": 2, "scale": "log" },
    "y": { "min_m": -1.0, "max_m": 1.0, "count": 2, "scale": "linear" }
  }
}"#;

#[test]
fn validate_bundled_configs_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(config("")).unwrap() {
        let path = entry.unwrap().path();
        let o = Command::new(env!("CARGO_BIN_EXE_nearfar"))
            .current_dir(dir.path())
            .args(["validate", "--config", path.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn fraunhofer_case1() {
    let o = nearfar(&[
        "fraunhofer",
        "--n-antennas",
        "128",
        "--spacing-wavelengths",
        "0.5",
        "--carrier-hz",
        "140e9",
        "--quiet",
    ]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    let value: f64 = out.trim().trim_end_matches(" m").parse().unwrap();
    assert!((value - 17.27).abs() <= 0.01, "{out}");

    let o = nearfar(&["fraunhofer", "--config", config("case1_mme_map.json").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("17.2"));
}

#[test]
fn fraunhofer_needs_one_spacing() {
    let o = nearfar(&["fraunhofer", "--n-antennas", "8", "--carrier-hz", "1e9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("spacing"));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, SMALL_MME.replace("\"carrier_hz\"", "\"carrier\"")).unwrap();
    let o = nearfar(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("carrier"), "{}", stderr(&o));
}

#[test]
fn invalid_value_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, SMALL_MME.replace("\"count\": 3", "\"count\": 1")).unwrap();
    let o = nearfar(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sweep.x.count"), "{}", stderr(&o));
}

#[test]
fn missing_config_and_bad_flags_exit_2() {
    assert_eq!(nearfar(&["validate", "--config", "/nonexistent/x.json"]).status.code(), Some(2));
    assert_eq!(nearfar(&["mme-map", "--config"]).status.code(), Some(2));
    assert_eq!(nearfar(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(nearfar(&["--help"]).status.code(), Some(0));
}

#[test]
fn kind_must_match_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, SMALL_MME).unwrap();
    let out = dir.path().join("o.csv");
    let o = nearfar(&["chest-map", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind"));
    assert!(!out.exists());
}

#[test]
fn unwritable_output_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, SMALL_MME).unwrap();
    let o = nearfar(&[
        "mme-map",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("missing/dir/o.csv").to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn run_writes_only_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, SMALL_MME).unwrap();
    let out_dir = dir.path().join("out");
    fs::create_dir(&out_dir).unwrap();
    let out = out_dir.join("mme.csv");
    let o = nearfar(&["mme-map", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = stderr(&o);
    assert!(summary.contains("6 cells") && summary.contains("0 failed"), "{summary}");

    let mut names: Vec<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["mme.csv", "mme.csv.meta.json"]);

    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x_m,y_m,value,peb_m,lb_mm_m,bias_m,flag");
    assert_eq!(lines.count(), 6);

    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("mme.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["kind"], "mme-map");
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["seed_overridden"], false);
    assert_eq!(meta["cells"], 6);
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_override_is_recorded_and_changes_monte_carlo_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    fs::write(&cfg, SMALL_SER).unwrap();
    let run = |name: &str, seed: Option<&str>| {
        let out = dir.path().join(name);
        let mut args = vec!["ser-map", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        let o = nearfar(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(format!("{name}.meta.json"))).unwrap()).unwrap();
        (fs::read(&out).unwrap(), meta)
    };
    let (a, meta_a) = run("a.csv", None);
    let (b, _) = run("b.csv", None);
    let (c, meta_c) = run("c.csv", Some("99"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(meta_a["seed"], 5);
    assert_eq!(meta_c["seed"], 99);
    assert_eq!(meta_c["seed_overridden"], true);
    assert_eq!(meta_a["config_sha256"], meta_c["config_sha256"]);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    fs::write(&cfg, SMALL_SER).unwrap();
    let mut outputs = Vec::new();
    for t in ["1", "3"] {
        let out = dir.path().join(format!("t{t}.csv"));
        let o = nearfar(&["ser-map", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", t, "--quiet"]);
        assert!(o.status.success());
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let o = nearfar(&["ser-map", "--config", cfg.to_str().unwrap(), "--out", "/tmp/x.csv", "--threads", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
