//! End-to-end checks of the `hykin` binary: pipeline wiring, exit codes,
//! machine-readable error lines, and byte-level determinism of artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hykin"))
}

/// Small config: 24 samples, one epoch, 8-wide model. Seconds per run.
fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.cfg");
    let text = format!(
        "dataset = {}\n\
         out_dir = {}\n\
         labels = 4\n\
         samples_per_class = 6\n\
         frames = 8\n\
         d_gcn = 8\n\
         d_model = 8\n\
         d_hyp = 8\n\
         epochs = 1\n\
         batch_size = 8\n\
         lr = 1e-3\n\
         warmup_epochs = 0.5\n",
        dir.join("synth.jsonl").display(),
        dir.join("run").display(),
    );
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        stdout(&out),
        stderr(&out)
    );
    out
}

/// The stderr contract on failure: nonzero exit and one JSON object line
/// with an `error` key.
fn assert_json_error(out: &Output, needle: &str) {
    assert!(!out.status.success(), "expected a failing exit status");
    let err = stderr(&out);
    let line = err.lines().last().unwrap_or_default();
    let parsed: serde_json::Value = serde_json::from_str(line)
        .unwrap_or_else(|e| panic!("stderr line is not JSON ({e}): {line}"));
    let msg = parsed["error"].as_str().expect("error key present");
    assert!(
        msg.contains(needle),
        "error message `{msg}` does not mention `{needle}`"
    );
}

#[test]
fn pipeline_gen_train_export() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path());

    let out = run_ok(bin().arg("gen-data").arg(&cfg));
    assert!(stdout(&out).contains("24 samples"));
    assert!(dir.path().join("synth.jsonl").is_file());

    let out = run_ok(bin().arg("train").arg(&cfg));
    let text = stdout(&out);
    assert!(text.contains("epoch"), "no epoch lines:\n{text}");
    assert!(text.contains("eval: top1"), "no eval summary:\n{text}");
    let run_dir = dir.path().join("run");
    assert!(run_dir.join("metrics.jsonl").is_file());
    assert!(run_dir.join("model.ckpt").is_file());

    let out = run_ok(bin().args(["export-embeddings", "--svg"]).arg(&cfg));
    let text = stdout(&out);
    assert!(text.contains("mean radius"), "no radius summary:\n{text}");
    let csv = run_dir.join("embeddings.csv");
    let svg = run_dir.join("embeddings.svg");
    let first = std::fs::read(&csv).unwrap();
    assert!(
        std::fs::read_to_string(&csv)
            .unwrap()
            .starts_with("sample_id,part,label,radius"),
        "unexpected CSV header"
    );
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));

    // re-export must reproduce the file byte for byte
    run_ok(bin().args(["export-embeddings", "--svg"]).arg(&cfg));
    assert_eq!(first, std::fs::read(&csv).unwrap(), "re-export changed bytes");
}

#[test]
fn train_metrics_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path());
    run_ok(bin().arg("gen-data").arg(&cfg));

    // identical config twice: the metrics file (which embeds that config)
    // must come out byte for byte the same
    let metrics = dir.path().join("run").join("metrics.jsonl");
    run_ok(bin().arg("train").arg(&cfg));
    let a = std::fs::read(&metrics).unwrap();
    run_ok(bin().arg("train").arg(&cfg));
    let b = std::fs::read(&metrics).unwrap();
    assert_eq!(a, b, "same config and seed produced different metrics bytes");
}

#[test]
fn check_grads_exits_zero() {
    let out = run_ok(bin().arg("check-grads"));
    let text = stdout(&out);
    assert!(
        text.contains("gradient audit:"),
        "missing audit summary:\n{text}"
    );
    assert!(!text.contains("FAIL"), "audit reported failures:\n{text}");
}

#[test]
fn noise_ablation_smoke() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path());
    run_ok(bin().arg("gen-data").arg(&cfg));
    let out = run_ok(
        bin()
            .args(["ablate-noise", "--sigma-list", "0.0,0.05"])
            .arg(&cfg),
    );
    let text = stdout(&out);
    assert!(text.contains("sigma 0.000"), "missing row:\n{text}");
    assert!(text.contains("sigma 0.050"), "missing row:\n{text}");
    assert!(text.contains("wrote"), "no report path printed:\n{text}");
}

#[test]
fn curvature_ablation_smoke() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path());
    run_ok(bin().arg("gen-data").arg(&cfg));
    let out = run_ok(
        bin()
            .args(["ablate-curvature", "--c-list", "0.5,1.0"])
            .arg(&cfg),
    );
    let text = stdout(&out);
    assert!(text.contains("c_init  0.500"), "missing row:\n{text}");
    assert!(text.contains("c_init  1.000"), "missing row:\n{text}");
}

#[test]
fn missing_config_reports_a_json_error() {
    let out = bin()
        .args(["train", "/nonexistent/nowhere.cfg"])
        .output()
        .unwrap();
    assert_json_error(&out, "nowhere.cfg");
}

#[test]
fn unknown_strategy_reports_a_json_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path());
    let out = bin()
        .args(["train", "--strategy", "warp"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_json_error(&out, "warp");
}

#[test]
fn export_without_checkpoint_reports_a_json_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path());
    run_ok(bin().arg("gen-data").arg(&cfg));
    let out = bin().arg("export-embeddings").arg(&cfg).output().unwrap();
    assert_json_error(&out, "model.ckpt");
}
