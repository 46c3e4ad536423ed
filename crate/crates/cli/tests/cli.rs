//! End-to-end CLI tests driving the compiled binary against the shared
//! fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn medkg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_medkg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(output: &Output) -> String {
    assert!(
        output.status.success(),
        "command failed.\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn build_fixture_graph(out: &Path) {
    let fixtures = fixtures();
    let output = medkg(&[
        "build-kg",
        "--source",
        "fixture",
        "--fixture-dir",
        fixtures.join("search").to_str().unwrap(),
        "--queries",
        fixtures.join("queries.txt").to_str().unwrap(),
        "--threshold",
        "8",
        "--out",
        out.to_str().unwrap(),
        "--mock-script",
        fixtures.join("mkg_script.json").to_str().unwrap(),
    ]);
    ok(&output);
}

#[test]
fn build_kg_writes_a_portable_graph() {
    let dir = tempfile::tempdir().unwrap();
    let graph_path = dir.path().join("graph.json");
    build_fixture_graph(&graph_path);
    let value: serde_json::Value = serde_json::from_slice(&std::fs::read(&graph_path).unwrap()).unwrap();
    assert!(value["nodes"].as_array().unwrap().len() >= 19);
    assert_eq!(value["edges"].as_array().unwrap().len() % 2, 0);
    assert_eq!(value["metadata"]["threshold"], serde_json::json!(8));
}

#[test]
fn ask_answers_the_scripted_question() {
    let dir = tempfile::tempdir().unwrap();
    let graph_path = dir.path().join("graph.json");
    build_fixture_graph(&graph_path);
    let fixtures = fixtures();
    let output = medkg(&[
        "ask",
        "--graph",
        graph_path.to_str().unwrap(),
        "--question",
        "Six days after surgical repair of a hip fracture, a 79-year-old woman develops agitation and fluctuating confusion. What is the most likely cause?",
        "--tau",
        "0.8",
        "--max-docs",
        "10",
        "--strategy",
        "bfs",
        "--mock-script",
        fixtures.join("mkg_script.json").to_str().unwrap(),
        "-o",
        "A=Dementia",
        "-o",
        "B=Alcohol withdrawal",
        "-o",
        "C=Opioid intoxication",
        "-o",
        "D=Delirium",
        "-o",
        "E=Urinary tract infection",
    ]);
    let stdout = ok(&output);
    assert!(stdout.contains("answer: D (Delirium)"), "{stdout}");
}

#[test]
fn eval_produces_report_matrix_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let graph_path = dir.path().join("graph.json");
    build_fixture_graph(&graph_path);
    let fixtures = fixtures();
    let report_path = dir.path().join("report.json");
    let matrix_path = dir.path().join("matrix.csv");
    let records_path = dir.path().join("records.jsonl");
    let output = medkg(&[
        "eval",
        "--dataset",
        fixtures.join("qa_items.jsonl").to_str().unwrap(),
        "--mode",
        "amg-rag",
        "--report",
        report_path.to_str().unwrap(),
        "--graph",
        graph_path.to_str().unwrap(),
        "--matrix-out",
        matrix_path.to_str().unwrap(),
        "--records-out",
        records_path.to_str().unwrap(),
        "--mock-script",
        fixtures.join("mkg_script.json").to_str().unwrap(),
    ]);
    let stdout = ok(&output);
    assert!(stdout.contains("accuracy: 100.00%"), "{stdout}");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    assert_eq!(report["total"], serde_json::json!(4));
    assert_eq!(report["accuracy"], serde_json::json!(1.0));
    let matrix = std::fs::read_to_string(&matrix_path).unwrap();
    assert!(matrix.starts_with("gold,"));
    assert!(!matrix.trim_end().ends_with(','));
    let records = std::fs::read_to_string(&records_path).unwrap();
    assert_eq!(records.lines().count(), 4);
}

#[test]
fn export_emits_cypher_statements() {
    let dir = tempfile::tempdir().unwrap();
    let graph_path = dir.path().join("graph.json");
    build_fixture_graph(&graph_path);
    let cypher_path = dir.path().join("graph.cypher");
    let output = medkg(&[
        "export",
        "--graph",
        graph_path.to_str().unwrap(),
        "--format",
        "cypher",
        "--out",
        cypher_path.to_str().unwrap(),
    ]);
    ok(&output);
    let script = std::fs::read_to_string(&cypher_path).unwrap();
    assert!(script.contains("CREATE (:Entity"));
    assert!(script.contains("RELATES_TO"));
    assert!(script.contains("confidence:"));
}

#[test]
fn ingest_builds_an_index_and_skips_unchanged_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    std::fs::write(corpus.join("a.txt"), "clopidogrel prevents stent thrombosis after pci").unwrap();
    std::fs::write(corpus.join("b.txt"), "levodopa treats parkinson disease motor symptoms").unwrap();
    let index_path = dir.path().join("index.json");

    let first = medkg(&[
        "ingest",
        "--corpus",
        corpus.to_str().unwrap(),
        "--chunk-size",
        "512",
        "--overlap",
        "100",
        "--batch",
        "10000",
        "--index",
        index_path.to_str().unwrap(),
    ]);
    let stdout = ok(&first);
    assert!(stdout.contains("ingested 2 files"), "{stdout}");

    let second = medkg(&[
        "ingest",
        "--corpus",
        corpus.to_str().unwrap(),
        "--index",
        index_path.to_str().unwrap(),
    ]);
    let stdout = ok(&second);
    assert!(stdout.contains("ingested 0 files"), "{stdout}");
    assert!(stdout.contains("skipped 2 unchanged"), "{stdout}");
}

#[test]
fn missing_agent_configuration_fails_with_guidance() {
    let dir = tempfile::tempdir().unwrap();
    let graph_path = dir.path().join("graph.json");
    build_fixture_graph(&graph_path);
    let output = medkg(&[
        "ask",
        "--graph",
        graph_path.to_str().unwrap(),
        "--question",
        "anything",
        "-o",
        "A=x",
        "-o",
        "B=y",
    ]);
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--mock-script"), "{stderr}");
}
