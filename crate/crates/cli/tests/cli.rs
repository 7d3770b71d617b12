use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn edcnn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edcnn"))
        .args(args)
        .current_dir(cwd)
        .env_remove("EDCNN_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_json(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn block<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["analyses"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["name"] == name)
        .unwrap_or_else(|| panic!("no {name} block"))
}

#[test]
fn frame_factory_config_reconstructs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 1,
        "network": {"r": 2, "q": [1, 2, 4], "m": [8, 8, 8], "skip": true, "nonlinearity": "none"},
        "bank": {"source": "frame_factory", "pooling": "haar"},
        "analyses": ["frames"],
        "enforce": ["frames"]
    });
    write_json(tmp.path(), "cfg.json", &cfg);
    let out = edcnn(&["run", "cfg.json", "--out", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS frames (enforced)"));
    let r = report(&tmp.path().join("out"));
    let frames = block(&r, "frames");
    assert_eq!(frames["passed"], true);
    for check in frames["checks"].as_array().unwrap() {
        if let Some(v) = check["value"].as_f64() {
            assert!(v <= 1e-10, "{check}");
        }
    }
    assert!(tmp.path().join("out/timings.json").is_file());
    assert!(r.get("timings").is_none());
}

#[test]
fn enforced_failure_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 1,
        "network": {"r": 2, "q": [1, 2], "m": [4, 4], "skip": false},
        "bank": {"source": "random"},
        "analyses": ["frames"],
        "enforce": ["frames"]
    });
    write_json(tmp.path(), "cfg.json", &cfg);
    let out = edcnn(&["run", "cfg.json", "--out", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
    assert_eq!(report(&tmp.path().join("out"))["passed"], false);
}

#[test]
fn unenforced_failure_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 1,
        "network": {"r": 2, "q": [1, 2], "m": [4, 4], "skip": false},
        "bank": {"source": "random"},
        "analyses": ["frames"]
    });
    write_json(tmp.path(), "cfg.json", &cfg);
    let out = edcnn(&["run", "cfg.json", "--out", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("FAIL frames"));
}

#[test]
fn malformed_config_reports_location() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("bad.json"),
        "{\n  \"seed\": 1,\n  \"network\": [\n",
    )
    .unwrap();
    let out = edcnn(&["run", "bad.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("bad.json") && err.contains("line"), "{err}");

    let unknown = json!({"seed": 1, "network": {"r": 2, "q": [1, 2], "m": [4, 4]}, "analyses": ["frames"], "sede": 2});
    write_json(tmp.path(), "unknown.json", &unknown);
    let out = edcnn(&["run", "unknown.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sede"), "{}", stderr(&out));

    let enforce = json!({"seed": 1, "network": {"r": 2, "q": [1, 2], "m": [4, 4]},
        "analyses": ["frames"], "enforce": ["regions"]});
    write_json(tmp.path(), "enforce.json", &enforce);
    let out = edcnn(&["run", "enforce.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("field `enforce`"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(edcnn(&["frobnicate"], tmp.path()).status.code(), Some(1));
    assert_eq!(
        edcnn(&["regions", "--bogus"], tmp.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        edcnn(&["run", "missing.json"], tmp.path()).status.code(),
        Some(1)
    );
    assert_eq!(edcnn(&["--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn linear_network_has_one_region() {
    let tmp = tempfile::tempdir().unwrap();
    write_json(
        tmp.path(),
        "spec.json",
        &json!({"r": 2, "q": [1, 2], "m": [4, 4], "skip": false}),
    );
    let out = edcnn(
        &[
            "regions",
            "--spec",
            "spec.json",
            "--no-relu",
            "--samples",
            "200",
            "--enforce",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let block: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(block["result"]["distinct"], 1);
}

#[test]
fn representation_identity_on_random_relu_net() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 5,
        "network": {"r": 2, "q": [1, 2, 4], "m": [8, 8, 8], "skip": true, "nonlinearity": "relu"},
        "bank": {"source": "random"},
        "analyses": ["representation"],
        "enforce": ["representation"]
    });
    write_json(tmp.path(), "cfg.json", &cfg);
    let out = edcnn(&["run", "cfg.json", "--out", "out"], tmp.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}{}",
        stdout(&out),
        stderr(&out)
    );
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({
        "seed": 11,
        "network": {"r": 2, "q": [1, 2, 4], "m": [4, 4, 4], "skip": true, "nonlinearity": "relu"},
        "bank": {"source": "random"},
        "analyses": ["frames", "representation", "regions", "lipschitz", "jacobian", "landscape", "train"],
        "sampler": {"count": 300},
        "train": {"iterations": 10}
    });
    write_json(tmp.path(), "cfg.json", &cfg);
    for dir in ["a", "b"] {
        let out = edcnn(&["run", "cfg.json", "--out", dir], tmp.path());
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let a = std::fs::read(tmp.path().join("a/report.json")).unwrap();
    let b = std::fs::read(tmp.path().join("b/report.json")).unwrap();
    assert_eq!(a, b);
    for side in ["regions.csv", "lipschitz.csv", "loss.csv", "bank.json"] {
        assert!(tmp.path().join("a").join(side).is_file(), "{side}");
    }
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg =
        json!({"seed": 1, "network": {"r": 2, "q": [1, 2], "m": [4, 4]}, "analyses": ["frames"]});
    write_json(tmp.path(), "cfg.json", &cfg);
    let out = Command::new(env!("CARGO_BIN_EXE_edcnn"))
        .args(["run", "cfg.json"])
        .current_dir(tmp.path())
        .env("EDCNN_OUT_DIR", tmp.path().join("from-env"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(tmp.path().join("from-env/report.json").is_file());

    let out = edcnn(&["run", "cfg.json"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("edcnn-out/report.json").is_file());
}

#[test]
fn report_subcommand_renders_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = json!({"seed": 1, "network": {"r": 2, "q": [1, 2], "m": [4, 4]}, "analyses": ["frames", "regions"]});
    write_json(tmp.path(), "cfg.json", &cfg);
    assert_eq!(
        edcnn(&["run", "cfg.json", "--out", "out"], tmp.path())
            .status
            .code(),
        Some(0)
    );
    let out = edcnn(&["report", "out/report.json"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("[PASS] frames"), "{text}");
    assert!(text.contains("regions"), "{text}");
}

#[test]
fn verify_frames_and_reconstruct() {
    let tmp = tempfile::tempdir().unwrap();
    write_json(
        tmp.path(),
        "spec.json",
        &json!({"r": 2, "q": [1, 2, 4], "m": [8, 8, 8], "skip": false}),
    );
    let out = edcnn(
        &[
            "verify-frames",
            "--spec",
            "spec.json",
            "--mode",
            "skip",
            "--enforce",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("layer_identity"));
    let out = edcnn(
        &[
            "reconstruct",
            "--spec",
            "spec.json",
            "--no-relu",
            "--samples",
            "20",
            "--enforce",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = edcnn(
        &[
            "reconstruct",
            "--spec",
            "spec.json",
            "--random-bank",
            "--no-relu",
            "--enforce",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn landscape_and_train_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    write_json(
        tmp.path(),
        "spec.json",
        &json!({"r": 2, "q": [1, 2, 4], "m": [8, 8, 8], "skip": true}),
    );
    let out = edcnn(
        &[
            "landscape",
            "--spec",
            "spec.json",
            "--random-bank",
            "--seed",
            "7",
            "--enforce",
        ],
        tmp.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}{}",
        stdout(&out),
        stderr(&out)
    );
    let out = edcnn(
        &[
            "train",
            "--spec",
            "spec.json",
            "--random-bank",
            "--iterations",
            "5",
            "--step-size",
            "0.01",
            "--out",
            "t",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(tmp.path().join("t/loss.csv").is_file());
    assert!(tmp.path().join("t/trained_bank.json").is_file());
}

#[test]
fn shipped_configs_pass() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["demo.json", "frames.json"] {
        let tmp = tempfile::tempdir().unwrap();
        let path = configs.join(name);
        let out = edcnn(&["run", path.to_str().unwrap(), "--out", "out"], tmp.path());
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}{}",
            stdout(&out),
            stderr(&out)
        );
    }
}
