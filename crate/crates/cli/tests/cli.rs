use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SUBCOMMANDS: [&str; 15] = [
    "stft",
    "modnorm",
    "quantize",
    "garding",
    "propagate",
    "gabor-decay",
    "energy-uniformity",
    "symbol-extract",
    "analytic-energy",
    "picard",
    "lipschitz",
    "contro1",
    "contro2",
    "wavefront",
    "pseudolocality",
];

fn gaborheat(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaborheat"))
        .args(args)
        .current_dir(dir)
        .env_remove("GABORHEAT_OUT")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path, command: &str) -> Value {
    let text = fs::read_to_string(dir.join(format!("{command}.manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{
    "grid": {"L": 20, "n": 128},
    "time": {"T": 0.1, "dt": 0.02},
    "nonlinearity": {"g": "1", "coeffs": [[2, 0, 1, 0]]},
    "initial": {"kind": "gaussian", "amplitude": 0.1},
    "lattice": {"alpha": 1.0, "beta": 1.0, "half_width": 5.0},
    "energy": {"k": 1, "z": [[0, 0], [2, 0], [0, 2]]},
    "analytic": {"eps": 0.25, "orders": [1, 2]},
    "contro2": {"p": "inf", "q": 1, "box_sizes": [10, 20]}
}"#;

#[test]
fn every_subcommand_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.json", SMALL);
    for cmd in SUBCOMMANDS {
        let out = gaborheat(&[cmd, "--config", &cfg, "--out", "runs"], dir.path());
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let m = manifest(&dir.path().join("runs"), cmd);
        assert_eq!(m["command"], cmd);
        for file in m["outputs"].as_array().unwrap() {
            assert!(dir.path().join("runs").join(file.as_str().unwrap()).exists());
        }
        assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn contro1_default_reaches_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaborheat(&["contro1", "--out", "."], dir.path());
    assert!(out.status.success());
    let sup = manifest(dir.path(), "contro1")["scalars"]["sup"].as_f64().unwrap();
    assert!((sup - 1.0).abs() < 1e-6);
    let csv = fs::read_to_string(dir.path().join("contro1.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,sup"));
}

#[test]
fn gabor_decay_on_heat_reports_fitted_n() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaborheat(&["gabor-decay", "--out", "."], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let n = manifest(dir.path(), "gabor-decay")["scalars"]["fitted_N"].as_f64().unwrap();
    assert!(n >= 4.0, "fitted_N = {n}");
}

#[test]
fn invalid_json_exits_2_without_files() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [("broken.json", "{ not json"), ("unknown.json", r#"{"grid": {"L": 40, "m": 3}}"#)] {
        let cfg = write_config(dir.path(), name, text);
        let out = gaborheat(&["contro1", "--config", &cfg, "--out", "never"], dir.path());
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(!dir.path().join("never").exists());
    }
}

#[test]
fn bad_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        r#"{"grid": {"n": 100}}"#,
        r#"{"symbols": {"a": "sin("}}"#,
        r#"{"norm": {"p": "huge"}}"#,
        r#"{"nonlinearity": {"coeffs": [[0, 0, 1, 0]]}}"#,
    ];
    for (i, text) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), text);
        let cmd = if i == 3 { "picard" } else { "propagate" };
        let out = gaborheat(&[cmd, "--config", &cfg, "--out", "never"], dir.path());
        assert_eq!(out.status.code(), Some(2), "{text}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!dir.path().join("never").exists());
    }
}

#[test]
fn nonconvergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "blowup.json",
        r#"{"grid": {"L": 20, "n": 64}, "symbols": {"a": "zero"}, "initial": {"kind": "constant", "value": 1e6}}"#,
    );
    let out = gaborheat(&["picard", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn failed_hypotheses_exit_4_unless_relaxed() {
    let dir = tempfile::tempdir().unwrap();
    let strict = write_config(
        dir.path(),
        "strict.json",
        r#"{"grid": {"L": 20, "n": 128}, "symbols": {"a": "heat", "b": "schrodinger_b"}, "time": {"T": 0.05}}"#,
    );
    let out = gaborheat(&["propagate", "--config", &strict, "--out", "s"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(!dir.path().join("s").exists());

    let relaxed = write_config(
        dir.path(),
        "relaxed.json",
        r#"{"grid": {"L": 20, "n": 128}, "symbols": {"a": "heat", "b": "schrodinger_b"}, "time": {"T": 0.05},
            "hypotheses": "warn"}"#,
    );
    let out = gaborheat(&["propagate", "--config", &relaxed, "--out", "r"], dir.path());
    assert!(out.status.success());
    let warnings = manifest(&dir.path().join("r"), "propagate")["warnings"].as_array().unwrap().len();
    assert!(warnings > 0);
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rand.json",
        r#"{"grid": {"L": 20, "n": 128}, "time": {"T": 0.05}, "initial": {"kind": "random", "max_freq": 3}}"#,
    );
    for (out, seed) in [("a", "7"), ("b", "7"), ("c", "8")] {
        let o = gaborheat(&["propagate", "--config", &cfg, "--out", out, "--seed", seed, "--threads", "2"], dir.path());
        assert!(o.status.success());
    }
    let read = |d: &str| fs::read(dir.path().join(d).join("propagate.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_eq!(manifest(&dir.path().join("a"), "propagate")["seed"], 7);
}

#[test]
fn environment_overrides_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gaborheat"))
        .args(["contro1", "--out", "flag"])
        .current_dir(dir.path())
        .env("GABORHEAT_OUT", dir.path().join("env"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("env/contro1.manifest.json").exists());
    assert!(!dir.path().join("flag").exists());
}

#[test]
fn trajectory_slices_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "slices.json",
        r#"{"grid": {"L": 20, "n": 64}, "time": {"T": 0.04, "dt": 0.02}, "output": {"trajectory": "slices"}}"#,
    );
    assert!(gaborheat(&["propagate", "--config", &cfg, "--out", "o"], dir.path()).status.success());
    for f in ["propagate_0000.csv", "propagate_0002.csv", "propagate_times.csv"] {
        assert!(dir.path().join("o").join(f).exists(), "{f}");
    }
}

#[test]
fn quantize_writes_wopm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "q.json", r#"{"grid": {"L": 20, "n": 64}, "quantize": {"symbol": "xi*xi"}}"#);
    assert!(gaborheat(&["quantize", "--config", &cfg, "--out", "o"], dir.path()).status.success());
    let bytes = fs::read(dir.path().join("o/quantize.wopm")).unwrap();
    let op = gaborheat::OperatorMatrix::read_wopm(bytes.as_slice()).unwrap();
    assert_eq!(op.dim(), 64);
    let m = manifest(&dir.path().join("o"), "quantize");
    assert!(m["scalars"]["hermitian_deviation"].as_f64().unwrap() < 1e-10);
}

#[test]
fn schema_lists_every_section() {
    let dir = tempfile::tempdir().unwrap();
    let out = gaborheat(&["schema"], dir.path());
    assert!(out.status.success());
    let schema: Value = serde_json::from_slice(&out.stdout).unwrap();
    let props = schema["properties"].as_object().unwrap();
    for key in ["grid", "symbols", "time", "norm", "nonlinearity", "initial", "contro2", "wavefront"] {
        assert!(props.contains_key(key), "{key}");
    }
    assert_eq!(schema["additionalProperties"], false);
}
