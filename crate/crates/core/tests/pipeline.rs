mod common;

use std::fs;
use std::sync::Arc;

use clapper_core::agent::mock::{MockProgrammer, MockReviewer, ReviewerPolicy};
use clapper_core::agent::{BackendError, ChatBackend, FnBackend, TargetHint, Verdict};
use clapper_core::library::seed_library;
use clapper_core::pipeline::{
    reduce, replay, EventPayload, RunSettings, SessionError, SessionStatus, SessionStore, EVENTS_FILE,
};
use clapper_core::render::{AssetCatalog, MockRenderer};
use clapper_core::review::FeedbackAction;
use clapper_core::subprocess::SubProcessKind;
use common::*;

#[test]
fn all_pass_session_layout() {
    let h = mock_harness(ReviewerPolicy::Pass);
    let tmp = tempfile::tempdir().unwrap();
    let store = SessionStore::new(tmp.path());
    let r = h.engine.run_session(DESCRIPTION, &store).unwrap();
    assert_eq!(r.status, SessionStatus::Completed);
    assert_eq!(r.final_script.len(), 5);
    let dir = &r.dir;
    for f in [EVENTS_FILE, "decomposition.json", "snippets/scene-0.txt", "reviews/motion-0.json", "final/script.py"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    assert!(fs::read_dir(dir.join("frames/cinematography-0")).unwrap().count() >= 10);
    let review: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("reviews/scene-0.json")).unwrap()).unwrap();
    assert_eq!(review["schema_version"], 1);
    assert_eq!(review["action"]["kind"], "accept");

    let events = store.events(&r.session_id).unwrap();
    let kinds: Vec<_> = events.iter().map(|e| e.payload.kind_name()).collect();
    assert_eq!(kinds[0], "decomposed");
    assert_eq!(kinds.last(), Some(&"finalized"));
    assert_eq!(kinds.iter().filter(|k| **k == "scripted").count(), 5);
    assert!(events.iter().all(|e| e.schema_version == 1));
}

#[test]
fn empty_description_emits_nothing() {
    let h = mock_harness(ReviewerPolicy::Pass);
    let tmp = tempfile::tempdir().unwrap();
    let store = SessionStore::new(tmp.path());
    assert!(matches!(h.engine.run_session("  \n", &store), Err(SessionError::EmptyDescription(_))));
    assert!(store.list().unwrap().is_empty());
    assert_eq!(h.director.count(), 0);
}

#[test]
fn reviewed_matches_scripted_and_order_holds() {
    let h = mock_harness("scripted:reject,reject,pass,reject,pass".parse().unwrap());
    let tmp = tempfile::tempdir().unwrap();
    let store = SessionStore::new(tmp.path());
    let r = h.engine.run_session(DESCRIPTION, &store).unwrap();
    let events = store.events(&r.session_id).unwrap();
    let state = reduce(&events).unwrap();
    assert_eq!(state.scripted, state.reviewed);
    assert_eq!(state.iterations[&SubProcessKind::Scene], 3);
    assert_eq!(state.iterations[&SubProcessKind::Character], 2);
    assert_eq!(state.script, r.final_script);
    // The refined character snippet differs from the first attempt.
    assert_ne!(
        fs::read_to_string(r.dir.join("snippets/character-0.txt")).unwrap(),
        fs::read_to_string(r.dir.join("snippets/character-1.txt")).unwrap()
    );
    let accepted_scene = state.script.entries()[0].1.clone();
    assert_eq!(accepted_scene.iteration_of_origin, 2);
}

#[test]
fn exhaustion_respects_configured_cap() {
    let h = harness_with(
        Arc::new(MockProgrammer),
        Arc::new(MockReviewer::new(ReviewerPolicy::Reject)),
        Arc::new(MockRenderer::default()),
        seed_library(),
        AssetCatalog::empty(),
        RunSettings { max_review_iterations: 2, ..Default::default() },
    );
    let tmp = tempfile::tempdir().unwrap();
    let r = h.engine.run_session(DESCRIPTION, &SessionStore::new(tmp.path())).unwrap();
    assert_eq!(r.status, SessionStatus::CompletedWithWarnings);
    assert!(r.per_subprocess_iterations.iter().all(|(_, n)| *n == 2));
    assert_eq!(h.programmer.count(), 10);
}

#[test]
fn render_error_becomes_rejection_then_recovers() {
    // The first scene attempt crashes inside the snippet itself.
    let first = std::sync::atomic::AtomicBool::new(true);
    let programmer = Arc::new(FnBackend::new(move |req: &clapper_core::agent::ChatRequest| {
        let text = req.full_text();
        if text.contains("Sub-process: scene") && first.swap(false, std::sync::atomic::Ordering::SeqCst) {
            return Ok("```python\nimport bpy\n# mock-raise: NameError: name 'plane' is not defined\n```".into());
        }
        MockProgrammer.complete(req).map(|r| r.text)
    }));
    let h = harness_with(
        programmer,
        Arc::new(MockReviewer::new(ReviewerPolicy::Pass)),
        Arc::new(MockRenderer::default()),
        seed_library(),
        AssetCatalog::empty(),
        RunSettings::default(),
    );
    let tmp = tempfile::tempdir().unwrap();
    let store = SessionStore::new(tmp.path());
    let r = h.engine.run_session(DESCRIPTION, &store).unwrap();
    assert_eq!(r.status, SessionStatus::Completed);
    assert_eq!(r.iterations()[&SubProcessKind::Scene], 2);
    // The reviewer never saw the crashed attempt.
    assert_eq!(h.reviewer.count(), 5);
    let events = store.events(&r.session_id).unwrap();
    let rejected = events
        .iter()
        .find_map(|e| match &e.payload {
            EventPayload::Reviewed { review, action, .. } if review.verdict == Verdict::Reject => Some((review.clone(), action.clone())),
            _ => None,
        })
        .unwrap();
    assert!(rejected.0.render_error.as_deref().unwrap().contains("NameError"));
    assert_eq!(rejected.0.target_hint, Some(TargetHint::RefineArguments));
    assert!(matches!(rejected.1, FeedbackAction::RefineArguments { .. }));
    // The programmer's second prompt carried the engine error.
    let second_scene = events
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::Scripted { subprocess: SubProcessKind::Scene, iteration: 1, exchanges, .. } => Some(exchanges.clone()),
            _ => None,
        })
        .next()
        .unwrap();
    assert!(second_scene[0].request.full_text().contains("NameError"));
}

#[test]
fn library_update_lands_before_next_program_call() {
    let programmer = Arc::new(FnBackend::new(|req: &clapper_core::agent::ChatRequest| {
        let text = req.full_text();
        if text.contains("Sub-process: motion") && !text.contains("chain_motions(") && !text.contains("{\"updates\"") {
            return Ok("```json\n{\"snippet\": \"rig = None\\nassign_motion(rig, 'a.fbx', 1, 48, (0,0,0), (0,2,0))\\n\", \"capability_gap\": true}\n```".into());
        }
        MockProgrammer.complete(req).map(|r| r.text)
    }));
    let h = harness_with(
        programmer,
        Arc::new(MockReviewer::new("scripted:pass,pass,reject,pass".parse().unwrap())),
        Arc::new(MockRenderer::default()),
        seed_library(),
        AssetCatalog::empty(),
        RunSettings::default(),
    );
    let tmp = tempfile::tempdir().unwrap();
    let store = SessionStore::new(tmp.path());
    let r = h.engine.run_session(DESCRIPTION, &store).unwrap();
    assert_eq!(r.status, SessionStatus::Completed);
    assert!(r.library.contains("chain_motions"));
    assert_eq!(r.library.version(), seed_library().version() + 1);
    let events = store.events(&r.session_id).unwrap();
    let kinds: Vec<_> = events.iter().map(|e| e.payload.kind_name()).collect();
    let upd = kinds.iter().position(|k| *k == "library_updated").unwrap();
    assert_eq!(kinds[upd + 1], "scripted");
    let state = reduce(&events).unwrap();
    assert_eq!(state.library.as_ref(), Some(&r.library));
    assert_eq!(r.final_script.prelude_version, r.library.version());
}

#[test]
fn unreachable_backend_fails_with_event() {
    let reviewer = Arc::new(FnBackend::new(|_: &clapper_core::agent::ChatRequest| {
        Err(BackendError::Unreachable { attempts: 4, message: "connection refused".into() })
    }));
    let h = harness_with(
        Arc::new(MockProgrammer),
        reviewer,
        Arc::new(MockRenderer::default()),
        seed_library(),
        AssetCatalog::empty(),
        RunSettings::default(),
    );
    let tmp = tempfile::tempdir().unwrap();
    let store = SessionStore::new(tmp.path());
    let r = h.engine.run_session(DESCRIPTION, &store).unwrap();
    assert_eq!(r.status, SessionStatus::Failed);
    let failure = r.failure.unwrap();
    assert_eq!(failure.stage, "scene/review");
    assert!(failure.error.contains("connection refused"));
    let events = store.events(&r.session_id).unwrap();
    assert_eq!(events.last().unwrap().payload.kind_name(), "failed");
    assert_eq!(reduce(&events).unwrap().status, Some(SessionStatus::Failed));
}

#[test]
fn replay_of_mock_session_is_identical() {
    let h = mock_harness("scripted:reject,pass,pass,reject,reject,pass".parse().unwrap());
    let tmp = tempfile::tempdir().unwrap();
    let store = SessionStore::new(tmp.path());
    let r = h.engine.run_session(DESCRIPTION, &store).unwrap();
    let events = store.events(&r.session_id).unwrap();
    let report = replay(&r.session_id, &events, clapper_core::agent::TemplateSet::default()).unwrap();
    assert!(report.identical, "{report:#?}");
    assert!(report.prompt_divergences.is_empty(), "{:?}", report.prompt_divergences);
    assert_eq!(report.replayed_script, r.final_script.to_text());
    assert_eq!(report.recorded_actions.len(), 8);
}

#[test]
fn replay_detects_tampered_action() {
    let h = mock_harness(ReviewerPolicy::Pass);
    let tmp = tempfile::tempdir().unwrap();
    let store = SessionStore::new(tmp.path());
    let r = h.engine.run_session(DESCRIPTION, &store).unwrap();
    let mut events = store.events(&r.session_id).unwrap();
    // Forge a different routing decision without changing what the agents said.
    for e in &mut events {
        if let EventPayload::Reviewed { action, subprocess: SubProcessKind::Lighting, .. } = &mut e.payload {
            *action = FeedbackAction::RefineArguments { suggestions: vec!["x".into()] };
        }
    }
    let report = replay(&r.session_id, &events, clapper_core::agent::TemplateSet::default()).unwrap();
    assert!(!report.identical);
    assert!(!report.actions_identical);
    assert!(report.script_identical);
}

#[test]
fn concurrent_sessions_do_not_interfere() {
    let h = Arc::new(mock_harness(ReviewerPolicy::Pass));
    let tmp = tempfile::tempdir().unwrap();
    let store = SessionStore::new(tmp.path());
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..3).map(|_| s.spawn(|| h.engine.run_session(DESCRIPTION, &store).unwrap())).collect();
        handles.into_iter().map(|j| j.join().unwrap()).collect()
    });
    assert_eq!(store.list().unwrap().len(), 3);
    assert!(results.iter().all(|r| r.final_script == results[0].final_script));
}
