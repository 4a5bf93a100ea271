use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
    "schema_version": 1,
    "seed": 3,
    "space": {"vocab_size": 2, "length": 4, "block_size": 2},
    "data": {"ground_truth": "block-markov", "train_size": 300, "test_size": 6},
    "model": {"finetune_size": 0},
    "eval": {"reseeds": 2}
}"#;

fn tube(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tube")).args(args).output().unwrap()
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    tube(&args)
}

fn setup(config: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, config).unwrap();
    (dir, path)
}

#[test]
fn pipeline_writes_outputs_and_manifests() {
    let (dir, config) = setup(CONFIG);
    let out = dir.path().join("run");
    for command in ["gen-data", "fit", "eval"] {
        let o = run(command, &config, &out, &[]);
        assert!(o.status.success(), "{command}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!out.join("arm_ft.json").exists());
    assert!(!out.join(".lock").exists());
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    assert!(table.lines().any(|l| l.contains(",mdm:1,TUBE,")));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("eval.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "eval");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"][0], "table.csv");
}

#[test]
fn seed_flag_overrides_config() {
    let (dir, config) = setup(CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("gen-data", &config, &a, &[]).status.success());
    assert!(run("gen-data", &config, &b, &["--seed", "4"]).status.success());
    assert_ne!(fs::read(a.join("train.txt")).unwrap(), fs::read(b.join("train.txt")).unwrap());
    let hash = |dir: &Path| {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("gen-data.manifest.json")).unwrap()).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash(&a), hash(&b));
}

#[test]
fn configuration_errors_exit_2() {
    let bad = [
        r#"{"space": {"vocab_size": 2, "length": 2}}"#,
        r#"{"schema_version": 9, "space": {"vocab_size": 2, "length": 2}}"#,
        r#"{"schema_version": 1, "space": {"vocab_size": 2, "length": 2}, "typo": 1}"#,
        r#"{"schema_version": 1, "space": {"vocab_size": 1, "length": 2}}"#,
        r#"{"schema_version": 1, "space": {"vocab_size": 2, "length": 2}, "data": {"ground_truth": "nope"}}"#,
        "not json",
    ];
    for text in bad {
        let (dir, config) = setup(text);
        let o = run("gen-data", &config, &dir.path().join("out"), &[]);
        assert_eq!(o.status.code(), Some(2), "{text}");
    }
    let (dir, config) = setup(CONFIG);
    assert_eq!(run("gen-data", &config, &dir.path().join("out"), &["--jobs", "0"]).status.code(), Some(2));
    assert_eq!(tube(&["fit"]).status.code(), Some(2));
    assert_eq!(tube(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn missing_inputs_and_locks_exit_1() {
    let (dir, config) = setup(CONFIG);
    let out = dir.path().join("out");
    let o = run("fit", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.txt"));

    fs::write(out.join(".lock"), "").unwrap();
    let o = run("gen-data", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.join("train.txt").exists());
}

#[test]
fn space_mismatch_is_rejected() {
    let (dir, config) = setup(CONFIG);
    let out = dir.path().join("out");
    assert!(run("gen-data", &config, &out, &[]).status.success());
    assert!(run("fit", &config, &out, &[]).status.success());
    let other = dir.path().join("other.json");
    fs::write(&other, CONFIG.replace(r#""length": 4, "block_size": 2"#, r#""length": 4"#)).unwrap();
    assert_ne!(run("eval", &other, &out, &[]).status.code(), Some(0));
}
