mod common;

use std::path::PathBuf;
use std::process::{Command, Output};

use ragx::render::explanation_from_json;
use serde_json::Value;

use common::{SKY_D, SKY_Q};

fn ragx(dir: &std::path::Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ragx"))
        .current_dir(dir)
        .env_remove("RAGX_API_KEY")
        .args(args)
        .output()
        .unwrap()
}

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "stderr: {text}");
    serde_json::from_str(&text).unwrap()
}

#[test]
fn sky_json_has_sky_among_heaviest_features() {
    let dir = tempfile::tempdir().unwrap();
    let out = ragx(dir.path(), &["explain", "retrieval", SKY_Q, "--text", SKY_D, "--format", "json"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.ends_with("}\n"));
    let e = explanation_from_json(&text).unwrap();
    assert_eq!(e.feature_by_text("sky").unwrap().weight, 1.0);
    let again = ragx(dir.path(), &["explain", "retrieval", SKY_Q, "--text", SKY_D, "--format", "json"]);
    assert_eq!(again.stdout, text.as_bytes());
}

#[test]
fn query_without_index_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ragx(dir.path(), &["query", "what is the capital of france"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["code"], "not_found");
    assert!(out.stdout.is_empty());
}

#[test]
fn ansi_only_with_color_always_when_piped() {
    let dir = tempfile::tempdir().unwrap();
    let plain = ragx(dir.path(), &["explain", "retrieval", SKY_Q, "--text", SKY_D]);
    assert_eq!(plain.stdout, b"the sky is blue\n");
    let never = ragx(dir.path(), &["explain", "retrieval", SKY_Q, "--text", SKY_D, "--color", "never"]);
    assert_eq!(never.stdout, b"the sky is blue\n");
    let colored = ragx(dir.path(), &["explain", "retrieval", SKY_Q, "--text", SKY_D, "--color", "always"]);
    let text = String::from_utf8(colored.stdout).unwrap();
    assert!(text.contains("\x1b[41msky\x1b[0m"), "{text:?}");
    assert!(!text.contains("\x1b[41mblue"));
}

#[test]
fn top_k_limits_highlighting() {
    let dir = tempfile::tempdir().unwrap();
    let out = ragx(
        dir.path(),
        &["explain", "retrieval", SKY_Q, "--text", SKY_D, "--color", "always", "--top-k", "1"],
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches("\x1b[0m").count(), 1, "{text:?}");
}

#[test]
fn html_format_is_a_page() {
    let dir = tempfile::tempdir().unwrap();
    let out = ragx(dir.path(), &["explain", "retrieval", SKY_Q, "--text", SKY_D, "--format", "html"]);
    let html = String::from_utf8(out.stdout).unwrap();
    assert!(html.starts_with("<!DOCTYPE html>"));
    assert!(html.contains("rgb(255,0,0)"));
}

#[test]
fn usage_errors_exit_1_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = ragx(dir.path(), &["explain", "retrieval", SKY_Q, "--format", "yaml"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["code"], "usage");

    let out = ragx(dir.path(), &["explain", "retrieval", SKY_Q, "--text", SKY_D, "--strategy", "shap"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["code"], "unknown_strategy");

    let out = ragx(dir.path(), &["explain", "retrieval", SKY_Q]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["code"], "invalid_argument");
}

#[test]
fn backend_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("ragx.toml");
    std::fs::write(
        &config,
        "[embedder]\nkind = \"openai\"\nendpoint = \"http://127.0.0.1:9/v1\"\nmodel = \"m\"\n",
    )
    .unwrap();
    let out = ragx(
        dir.path(),
        &["--config", config.to_str().unwrap(), "explain", "retrieval", SKY_Q, "--text", SKY_D],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_json(&out)["code"], "backend_unavailable");
}

#[test]
fn index_query_and_explain_generation() {
    let dir = tempfile::tempdir().unwrap();
    let out = ragx(dir.path(), &["index", corpus().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(out.stdout, b"indexed 5 documents into index.ragx\n");

    let out = ragx(dir.path(), &["query", "What is the capital of France?", "--k", "1"]);
    assert!(out.status.success());
    let result: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result["retrieved"].as_array().unwrap().len(), 1);
    assert_eq!(result["retrieved"][0]["doc"]["id"], "france.txt");
    assert_eq!(result["response"]["text"], "Paris is the capital of France.");

    let out = ragx(
        dir.path(),
        &["explain", "retrieval", "What is the capital of France?", "--doc-id", "germany.txt", "--format", "json"],
    );
    assert!(out.status.success());
    let e = explanation_from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(e.source_text, "Berlin is the capital of Germany.");

    let out = ragx(dir.path(), &["explain", "retrieval", "q", "--doc-id", "missing.txt"]);
    assert_eq!(out.status.code(), Some(3));

    let out = ragx(dir.path(), &["explain", "generation", "What is the capital of France?", "--format", "json"]);
    assert!(out.status.success());
    let e = explanation_from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(e.reference_response.as_deref(), Some("Paris is the capital of France."));
    let paris = e.features.iter().find(|f| f.feature.text.starts_with("Paris")).unwrap();
    assert_eq!(paris.weight, 1.0);
    assert!(e.features.iter().all(|f| !f.feature.text.contains("Answer using")));

    let out = ragx(
        dir.path(),
        &["explain", "generation", "What is the capital of France?", "--include-instruction", "--format", "json"],
    );
    let e = explanation_from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert!(e.protected_spans.is_empty());
    assert!(e.features.iter().any(|f| f.feature.text == "Answer using the context."));
}

#[test]
fn eval_prints_table_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let annotations = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/eval_cases.jsonl");
    let report = dir.path().join("report.json");
    let out = ragx(
        dir.path(),
        &["eval", annotations.to_str().unwrap(), "--report", report.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("a-sky"));
    assert!(table.contains("n=3"));
    let parsed: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(parsed["case_count"], 3);
}

#[test]
fn help_lists_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let global = ["--config", "--embedder", "--generator", "--parallelism"];
    let cases: &[(&[&str], &[&str])] = &[
        (&["index", "--help"], &["--out"]),
        (&["query", "--help"], &["--k"]),
        (
            &["explain", "retrieval", "--help"],
            &["--doc-id", "--text", "--strategy", "--format", "--top-k", "--color"],
        ),
        (
            &["explain", "generation", "--help"],
            &["--k", "--comparator", "--include-instruction", "--format"],
        ),
        (&["eval", "--help"], &["--report"]),
        (&["serve", "--help"], &["--port"]),
    ];
    for (args, flags) in cases {
        let out = ragx(dir.path(), args);
        assert!(out.status.success());
        let help = String::from_utf8(out.stdout).unwrap();
        for flag in flags.iter().chain(&global) {
            assert!(help.contains(flag), "{args:?} help lacks {flag}");
        }
    }
}

#[test]
fn config_file_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("ragx.toml");
    std::fs::write(&config, "[explain]\nstrategy_id = \"mask\"\n").unwrap();
    let out = ragx(
        dir.path(),
        &["--config", config.to_str().unwrap(), "explain", "retrieval", SKY_Q, "--text", SKY_D, "--format", "json"],
    );
    assert!(out.status.success());
    let e = explanation_from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(e.features[1].outcome.perturbed_text, "the [MASK] is blue");

    std::fs::write(&config, "[explain]\nparallelism = \"many\"\n").unwrap();
    let out = ragx(dir.path(), &["--config", config.to_str().unwrap(), "query", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["code"], "config_error");

    let out = ragx(dir.path(), &["--parallelism", "0", "explain", "retrieval", SKY_Q, "--text", SKY_D]);
    assert_eq!(out.status.code(), Some(1));
}
