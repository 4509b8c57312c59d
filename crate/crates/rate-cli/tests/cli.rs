//! Integration tests that drive the compiled `rate` binary end to end
//! against the bundled sample corpus and the deterministic mock provider.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .canonicalize()
        .expect("repository data directory")
}

/// Writes a config into `dir` wired to the repo's sample data, with all
/// artifacts kept inside `dir`.
fn write_sample_config(dir: &Path) -> PathBuf {
    let data = data_dir();
    let config = format!(
        r#"
[corpus]
input = "{data}/sample/corpus.csv"
gold = "{data}/sample/gold.jsonl"

[output]
dir = "out"

[provider]
kind = "mock"

[kb]
catalog = "{data}/kb/sample_kb.jsonl"

[extraction]
template = "{data}/templates/extraction.tmpl"

[validation]
template = "{data}/templates/validation.tmpl"
definitions = "{data}/definitions.yaml"

[postprocess]
blocklist = "{data}/blocklist.txt"

[network]
min_weighted_degree = 4
"#,
        data = data.display()
    );
    let path = dir.join("rate.toml");
    std::fs::write(&path, config).unwrap();
    path
}

fn rate(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rate"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process exited normally")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn read_out(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join("out").join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn final_counts(dir: &Path) -> Vec<(String, usize)> {
    String::from_utf8(read_out(dir, "final.jsonl"))
        .unwrap()
        .lines()
        .map(|line| {
            let row: serde_json::Value = serde_json::from_str(line).unwrap();
            (
                row["paper_id"].as_str().unwrap().to_owned(),
                row["terms"].as_array().unwrap().len(),
            )
        })
        .collect()
}

#[test]
fn invalid_config_reports_all_issues_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("rate.toml");
    std::fs::write(
        &config,
        "[output]\ndir = \"out\"\nbogus = 1\n[provider]\nkind = \"teapot\"\n[kb]\nchunk_size = 8\nchunk_overlap = 9\n",
    )
    .unwrap();
    let output = rate(&config, &["ingest"]);
    assert_eq!(exit_code(&output), 2, "{}", stderr(&output));
    let err = stderr(&output);
    assert!(err.contains("bogus"), "{err}");
    assert!(err.contains("provider.kind"), "{err}");
    assert!(err.contains("chunk_overlap"), "{err}");
}

#[test]
fn missing_upstream_artifact_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_sample_config(dir.path());
    let output = rate(&config, &["ground"]);
    assert_eq!(exit_code(&output), 3, "{}", stderr(&output));
    assert!(stderr(&output).contains("missing prerequisite"));
}

#[test]
fn missing_input_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("rate.toml");
    std::fs::write(
        &config,
        "[corpus]\ninput = \"absent.csv\"\n[output]\ndir = \"out\"\n[provider]\nkind = \"mock\"\n",
    )
    .unwrap();
    let output = rate(&config, &["ingest"]);
    assert_eq!(exit_code(&output), 3, "{}", stderr(&output));
}

#[test]
fn unconfigured_stage_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("rate.toml");
    std::fs::write(
        &config,
        "[output]\ndir = \"out\"\n[provider]\nkind = \"mock\"\n",
    )
    .unwrap();
    let output = rate(&config, &["ingest"]);
    assert_eq!(exit_code(&output), 2, "{}", stderr(&output));
    assert!(stderr(&output).contains("corpus.input"));
}

#[test]
fn offline_cache_miss_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_sample_config(dir.path());
    let output = rate(&config, &["--offline", "build-kb"]);
    assert_eq!(exit_code(&output), 4, "{}", stderr(&output));
    assert!(stderr(&output).contains("provider failure"));
}

#[test]
fn pipeline_end_to_end_on_sample_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_sample_config(dir.path());
    let output = rate(&config, &["all"]);
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));

    for artifact in [
        "documents.jsonl",
        "kb_index.json",
        "kb_vectors.f32",
        "candidates.jsonl",
        "grounded.jsonl",
        "validated.jsonl",
        "final.jsonl",
        "final.csv",
        "evaluation.json",
        "network.gexf",
        "network.graphml",
        "network.csv",
        "network_stats.json",
    ] {
        assert!(
            dir.path().join("out").join(artifact).is_file(),
            "missing {artifact}"
        );
    }

    let counts = final_counts(dir.path());
    let expected = [("P1", 9), ("P2", 9), ("P3", 8), ("P4", 9), ("P5", 9)];
    assert_eq!(counts.len(), expected.len());
    for ((id, n), (want_id, want_n)) in counts.iter().zip(expected) {
        assert_eq!((id.as_str(), *n), (want_id, want_n));
    }

    // One planned false positive and one planned false negative on P1;
    // everything else matches, including the long-form/acronym pairing on
    // P2, so precision = recall = 43/44.
    let eval: serde_json::Value =
        serde_json::from_slice(&read_out(dir.path(), "evaluation.json")).unwrap();
    let f1 = eval["metrics"]["f1"].as_f64().unwrap();
    assert!((f1 - 43.0 / 44.0).abs() < 1e-12, "f1 = {f1}");

    let stats: serde_json::Value =
        serde_json::from_slice(&read_out(dir.path(), "network_stats.json")).unwrap();
    assert_eq!(stats["node_count"].as_u64(), Some(38));
    assert_eq!(stats["edge_count"].as_u64(), Some(170));
    assert_eq!(stats["total_weight"].as_u64(), Some(172));
}

#[test]
fn second_run_reuses_artifacts_and_force_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_sample_config(dir.path());
    assert_eq!(exit_code(&rate(&config, &["all"])), 0);

    let first_final = read_out(dir.path(), "final.jsonl");
    let first_gexf = read_out(dir.path(), "network.gexf");
    let first_stats = read_out(dir.path(), "network_stats.json");

    // Without --force the model-facing stages skip or reuse everything.
    let resume = rate(&config, &["all"]);
    assert_eq!(exit_code(&resume), 0, "{}", stderr(&resume));
    let err = stderr(&resume);
    assert!(err.contains("skipping"), "{err}");
    assert!(err.contains("0 papers to process"), "{err}");

    // With --force every stage recomputes; the warm cache and fixed seeds
    // must reproduce the artifacts byte for byte.
    let forced = rate(&config, &["--force", "all"]);
    assert_eq!(exit_code(&forced), 0, "{}", stderr(&forced));
    assert_eq!(read_out(dir.path(), "final.jsonl"), first_final);
    assert_eq!(read_out(dir.path(), "network.gexf"), first_gexf);
    assert_eq!(read_out(dir.path(), "network_stats.json"), first_stats);
}

#[test]
fn limit_truncates_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_sample_config(dir.path());
    let output = rate(&config, &["--limit", "2", "ingest"]);
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    let documents = String::from_utf8(read_out(dir.path(), "documents.jsonl")).unwrap();
    assert_eq!(documents.lines().count(), 2);
}

#[test]
fn seed_override_changes_the_reported_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_sample_config(dir.path());
    assert_eq!(exit_code(&rate(&config, &["all"])), 0);
    let output = rate(&config, &["--seed", "7", "network"]);
    assert_eq!(exit_code(&output), 0, "{}", stderr(&output));
    let stats: serde_json::Value =
        serde_json::from_slice(&read_out(dir.path(), "network_stats.json")).unwrap();
    assert_eq!(stats["louvain_seed"].as_u64(), Some(7));
}
