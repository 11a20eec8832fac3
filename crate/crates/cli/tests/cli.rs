use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn clapper(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clapper"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn generate(dir: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["--json", "generate", "--mock-all"];
    args.extend_from_slice(extra);
    args.push("A corgi runs on grass, then jumps");
    let out = clapper(dir, &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    json_of(&out)
}

#[test]
fn generate_mock_all_creates_session() {
    let tmp = tempfile::tempdir().unwrap();
    let v = generate(tmp.path(), &[]);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["status"], "completed");
    let id = v["session_id"].as_str().unwrap();
    assert!(tmp.path().join("sessions").join(id).join("events.jsonl").is_file());

    let out = clapper(tmp.path(), &["--json", "status"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["sessions"][0]["status"], "completed");
}

#[test]
fn missing_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = clapper(tmp.path(), &["--config", "absent.toml", "generate", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.toml"));
    // Without --mock-all and without ./clapper.toml there is nothing to run.
    assert_eq!(clapper(tmp.path(), &["generate", "x"]).status.code(), Some(2));
}

#[test]
fn iteration_cap_gives_warning_status() {
    let tmp = tempfile::tempdir().unwrap();
    let v = generate(tmp.path(), &["--max-iterations", "1", "--mock-reviewer", "reject"]);
    assert_eq!(v["status"], "completed_with_warnings");
    assert!(v["iterations"].as_object().unwrap().values().all(|n| n == 1));
}

#[test]
fn config_file_is_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("clapper.toml"),
        "max_review_iterations = 2\nsession_root = \"runs\"\n[agents.reviewer]\nmock_policy = \"reject\"\n",
    )
    .unwrap();
    let out = clapper(tmp.path(), &["--json", "generate", "a cat sits"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_eq!(v["status"], "completed_with_warnings");
    assert!(v["iterations"].as_object().unwrap().values().all(|n| n == 2));
    assert!(tmp.path().join("runs").is_dir());
}

#[test]
fn replay_identical_then_corrupt() {
    let tmp = tempfile::tempdir().unwrap();
    let id = generate(tmp.path(), &["--mock-reviewer", "scripted:reject,pass"])["session_id"].as_str().unwrap().to_string();
    let out = clapper(tmp.path(), &["replay", &id]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("identical"));

    let log = tmp.path().join("sessions").join(&id).join("events.jsonl");
    let text = fs::read_to_string(&log).unwrap();
    let kept: Vec<_> = text.lines().enumerate().filter(|(i, _)| *i != 4).map(|(_, l)| l).collect();
    fs::write(&log, kept.join("\n") + "\n").unwrap();
    let out = clapper(tmp.path(), &["replay", &id]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sequence number is 4"));
}

#[test]
fn unknown_session_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    for cmd in [&["replay", "nope"][..], &["status", "nope"], &["render-final", "nope"]] {
        assert_eq!(clapper(tmp.path(), cmd).status.code(), Some(2), "{cmd:?}");
    }
}

#[test]
fn promote_composed_function() {
    let tmp = tempfile::tempdir().unwrap();
    let v = generate(tmp.path(), &["--mock-reviewer", "scripted:pass,pass,reject_library,pass"]);
    let id = v["session_id"].as_str().unwrap();
    assert_eq!(v["iterations"]["motion"], 2);
    let out = clapper(tmp.path(), &["--json", "library", "promote", id, "chain_motions"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let p = json_of(&out);
    assert_eq!(p["function_version"], 1);
    assert_eq!(p["library"], "seed");
    let shown = json_of(&clapper(tmp.path(), &["--json", "library", "show", "seed"]));
    let names: Vec<_> = shown["functions"].as_array().unwrap().iter().map(|f| f["name"].as_str().unwrap().to_string()).collect();
    assert!(names.contains(&"chain_motions".to_string()));
    // Promoting again changes nothing.
    let again = json_of(&clapper(tmp.path(), &["--json", "library", "promote", id, "chain_motions"]));
    assert_eq!(again["library_version"], p["library_version"]);
}

#[test]
fn render_final_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let id = generate(tmp.path(), &[])["session_id"].as_str().unwrap().to_string();
    for _ in 0..2 {
        let out = clapper(tmp.path(), &["--json", "render-final", &id]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json_of(&out)["frame_count"], 120);
    }
    assert!(tmp.path().join("sessions").join(&id).join("final/script.py").is_file());
}

#[test]
fn ingest_builds_index() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("corpus")).unwrap();
    fs::write(tmp.path().join("corpus/bones.txt"), "Armatures hold bones. Keyframes store poses over time.").unwrap();
    let out = clapper(tmp.path(), &["--json", "ingest", "corpus"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json_of(&out)["documents_added"], 1);
    assert!(tmp.path().join("rag/index.json").is_file());
}
