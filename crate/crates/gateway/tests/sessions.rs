mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::time::Duration;

use flightlink_core::llm::{Role, ScriptedProvider};
use flightlink_core::mission::{run_direct, run_llm, LlmRunConfig, RunMode, RunStatus};
use flightlink_core::streams::SessionConfig;
use flightlink_gateway::{
    CreateSession, GatewayConfig, GatewayError, ProviderKind, SessionManager, SessionState, TelemetryMessage,
};

fn create(m: &SessionManager, mission: &str, mode: RunMode) -> Result<String, GatewayError> {
    m.create_session(CreateSession {
        mission_id: mission.into(),
        mode,
        provider: ProviderKind::Scripted,
        fixture: None,
        model: None,
        call_limit: None,
    })
    .map(|h| h.session_id)
}

fn frame_seqs(msgs: &[TelemetryMessage]) -> Vec<u64> {
    msgs.iter()
        .filter_map(|m| match m {
            TelemetryMessage::Frame(f) => Some(f.seq),
            _ => None,
        })
        .collect()
}

#[test]
fn create_session_contract() {
    let m = common::manager();
    let h = m
        .create_session(CreateSession {
            mission_id: "mission-3".into(),
            mode: RunMode::Llm,
            provider: ProviderKind::Scripted,
            fixture: None,
            model: None,
            call_limit: None,
        })
        .unwrap();
    assert_eq!(h.state, SessionState::Idle);
    assert_eq!(h.mission_id, "mission-3");
    assert_eq!(create(&m, "nope", RunMode::Llm), Err(GatewayError::MissionNotFound("nope".into())));
    assert!(matches!(create(&m, "mission-3", RunMode::Llm), Err(GatewayError::Conflict(_))));
    // Missions 1 and 2 share a world, so they cannot fly at the same time.
    create(&m, "mission-1", RunMode::Direct).unwrap();
    assert!(matches!(create(&m, "mission-2", RunMode::Direct), Err(GatewayError::Conflict(_))));
    assert!(matches!(m.status("s99"), Err(GatewayError::SessionNotFound(_))));
    assert!(matches!(m.subscribe("s99"), Err(GatewayError::SessionNotFound(_))));
}

#[test]
fn missing_fixture_is_rejected_at_creation() {
    let m = common::manager();
    let req = |fixture: &str| CreateSession {
        mission_id: "mission-1".into(),
        mode: RunMode::Llm,
        provider: ProviderKind::Scripted,
        fixture: Some(fixture.into()),
        model: None,
        call_limit: None,
    };
    assert!(matches!(m.create_session(req("no-such-script")), Err(GatewayError::InvalidRequest(_))));
    assert!(matches!(m.create_session(req("../missions/mission-1")), Err(GatewayError::InvalidRequest(_))));
    // Nothing was registered, so the world is still free.
    m.create_session(req("mission-1")).unwrap();
}

#[test]
fn altitude_mission_streams_ordered_frames() {
    let m = common::manager();
    let id = create(&m, "mission-2", RunMode::Llm).unwrap();
    let a = m.subscribe(&id).unwrap();
    let b = m.subscribe(&id).unwrap();
    m.submit_prompt(&id, "fly to the goal avoiding the cube by altitude only").unwrap();
    let a = common::drain(a);
    let b = common::drain(b);
    assert_eq!(a, b, "subscribers see identical sequences");

    match &a[0] {
        TelemetryMessage::Snapshot(s) => {
            assert_eq!(s.seq, 0);
            assert_eq!(s.vitals.state, SessionState::Idle);
            assert_eq!(s.vitals.pose.position, s.mission.start);
            assert!(s.trajectory.is_empty());
        }
        other => panic!("first message must be a snapshot, got {other:?}"),
    }
    let seqs = frame_seqs(&a);
    assert_eq!(seqs, (1..=seqs.len() as u64).collect::<Vec<_>>(), "gapless from the snapshot");

    let mut t = 0.0;
    let mut peak: f64 = 0.0;
    let mut saw_states = Vec::new();
    for msg in &a {
        if let TelemetryMessage::Frame(f) = msg {
            assert!(f.vitals.sim_time >= t);
            t = f.vitals.sim_time;
            peak = f.samples.iter().map(|s| s.pose.position.z).fold(peak, f64::max);
            if saw_states.last() != Some(&f.vitals.state) {
                saw_states.push(f.vitals.state);
            }
        }
    }
    assert!(peak > 5.0, "altitude crosses the 5 m bound");
    assert_eq!(saw_states.first(), Some(&SessionState::AwaitingLlm));
    assert!(saw_states.contains(&SessionState::Executing));
    assert_eq!(saw_states.last(), Some(&SessionState::Finished));
    assert!(matches!(a.last(), Some(TelemetryMessage::Finished { status: Some(RunStatus::Reached), .. })));

    let status = m.status(&id).unwrap();
    assert_eq!(status.handle.state, SessionState::Finished);
    assert!(status.calls_used < 10);
    assert_eq!(status.status, Some(RunStatus::Reached));
    assert_eq!(status.collision_count, 0);
}

#[test]
fn late_subscriber_rebuilds_the_full_view() {
    let m = common::manager();
    let id = create(&m, "mission-3", RunMode::Llm).unwrap();
    let live = m.subscribe(&id).unwrap();
    m.submit_prompt(&id, "Start mission-3 and fly to the goal.").unwrap();
    let live = common::drain(live);
    let late = common::drain(m.subscribe(&id).unwrap());
    assert_eq!(late.len(), 2);
    let log = m.log(&id).unwrap();
    let TelemetryMessage::Snapshot(snap) = &late[0] else { panic!("snapshot first") };
    assert_eq!(snap.trajectory, log.trajectory);
    assert_eq!(snap.transcript, log.transcript);
    assert_eq!(snap.vitals.state, SessionState::Finished);
    let last_live = frame_seqs(&live).last().copied().unwrap();
    assert_eq!(snap.seq, last_live);
    assert!(matches!(late[1], TelemetryMessage::Finished { last_seq, .. } if last_seq == last_live));
}

#[test]
fn gateway_run_matches_the_batch_run() {
    let mission = common::mission("mission-2");
    let mut p = ScriptedProvider::new(
        flightlink_core::llm::ScriptFixture::load(&common::fixtures().join("scripts/mission-2.json")).unwrap(),
    );
    let batch = run_llm(&mission, &mut p, &LlmRunConfig::default()).unwrap();

    let m = common::manager();
    let id = create(&m, "mission-2", RunMode::Llm).unwrap();
    let rx = m.subscribe(&id).unwrap();
    m.submit_prompt(&id, &mission.spec.operator_prompt()).unwrap();
    common::drain(rx);
    let served = m.log(&id).unwrap();
    assert_eq!(served.to_ndjson(), batch.to_ndjson());

    let direct = run_direct(&common::mission("mission-3"), SessionConfig::default()).unwrap();
    let id = create(&m, "mission-3", RunMode::Direct).unwrap();
    let rx = m.subscribe(&id).unwrap();
    m.start_direct(&id).unwrap();
    let msgs = common::drain(rx);
    assert_eq!(m.log(&id).unwrap(), direct);
    let records: Vec<_> = msgs
        .iter()
        .filter_map(|m| match m {
            TelemetryMessage::Frame(f) => f.last_call.clone(),
            _ => None,
        })
        .collect();
    assert_eq!(records, direct.records, "one frame per stream call");
}

#[test]
fn direct_and_model_sessions_reject_the_other_start() {
    let m = common::manager();
    let d = create(&m, "mission-3", RunMode::Direct).unwrap();
    assert!(matches!(m.submit_prompt(&d, "go"), Err(GatewayError::WrongMode(_))));
    let l = create(&m, "mission-1", RunMode::Llm).unwrap();
    assert!(matches!(m.start_direct(&l), Err(GatewayError::WrongMode(_))));
    assert!(matches!(m.submit_prompt(&l, "   "), Err(GatewayError::InvalidRequest(_))));
    assert!(matches!(m.log(&l), Err(GatewayError::InvalidRequest(_))));
}

#[test]
fn budget_exhaustion_blocks_further_prompts() {
    let m = common::manager();
    let id = m
        .create_session(CreateSession {
            mission_id: "mission-1".into(),
            mode: RunMode::Llm,
            provider: ProviderKind::Scripted,
            fixture: None,
            model: None,
            call_limit: Some(3),
        })
        .unwrap()
        .session_id;
    let rx = m.subscribe(&id).unwrap();
    m.submit_prompt(&id, "Start mission-1.").unwrap();
    let msgs = common::drain(rx);
    assert!(matches!(msgs.last(), Some(TelemetryMessage::Finished { status: Some(RunStatus::BudgetExhausted), .. })));
    assert_eq!(m.submit_prompt(&id, "keep going"), Err(GatewayError::BudgetExceeded { used: 3, limit: 3 }));
    let status = m.status(&id).unwrap();
    assert_eq!((status.calls_used, status.call_limit), (3, 3));
    // The world is free again once the session has finished.
    create(&m, "mission-2", RunMode::Direct).unwrap();
}

#[test]
fn follow_up_prompt_resumes_after_a_question() {
    let dir = tempfile::tempdir().unwrap();
    let script = common::script_with_question("mission-1", "Which way should I pass the obstacle?");
    std::fs::write(dir.path().join("ask.json"), script.to_json_pretty()).unwrap();
    let mut config: GatewayConfig = common::config();
    config.scripts_dir = Some(dir.path().to_path_buf());
    let m = SessionManager::new(config);
    let id = m
        .create_session(CreateSession {
            mission_id: "mission-1".into(),
            mode: RunMode::Llm,
            provider: ProviderKind::Scripted,
            fixture: Some("ask".into()),
            model: None,
            call_limit: None,
        })
        .unwrap()
        .session_id;

    let mut rx = m.subscribe(&id).unwrap();
    m.submit_prompt(&id, "Fly mission-1.").unwrap();
    let first = common::until_state(&mut rx, "idle");
    let question = first
        .iter()
        .filter_map(|msg| match msg {
            TelemetryMessage::Frame(f) => Some(f.turns.clone()),
            _ => None,
        })
        .flatten()
        .find(|t| t.role == Role::Assistant)
        .unwrap();
    assert!(question.content.contains("Which way"));
    // The worker hands the runner back right after publishing `idle`.
    while m.handle(&id).unwrap().state != SessionState::Idle {
        std::thread::sleep(Duration::from_millis(1));
    }
    assert_eq!(m.status(&id).unwrap().calls_used, 1);

    m.submit_prompt(&id, "Turn around it and continue to the goal.").unwrap();
    let rest = common::drain(rx);
    assert!(matches!(rest.last(), Some(TelemetryMessage::Finished { status: Some(RunStatus::Reached), .. })));
    let log = m.log(&id).unwrap();
    let users: Vec<_> = log.transcript.iter().filter(|t| t.role == Role::User).map(|t| t.content.as_str()).collect();
    assert_eq!(users, ["Fly mission-1.", "Turn around it and continue to the goal."]);
}

/// A chat-completions endpoint that answers only when released.
fn gated_endpoint() -> (String, mpsc::Sender<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let (release, gate) = mpsc::channel::<()>();
    std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream);
        let mut length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if line == "\r\n" {
                break;
            }
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        gate.recv().unwrap();
        let payload = r#"{"choices":[{"message":{"role":"assistant","content":"MISSION COMPLETE"}}],"usage":{"prompt_tokens":10,"completion_tokens":2}}"#;
        let reply = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
            payload.len()
        );
        reader.get_mut().write_all(reply.as_bytes()).unwrap();
    });
    (url, release)
}

#[test]
fn prompt_while_the_model_is_working_is_busy() {
    let (url, release) = gated_endpoint();
    std::env::set_var(flightlink_core::llm::API_KEY_ENV, "test-key");
    let mut config = common::config();
    config.http_base_url = Some(url);
    let m = SessionManager::new(config);
    let id = m
        .create_session(CreateSession {
            mission_id: "mission-3".into(),
            mode: RunMode::Llm,
            provider: ProviderKind::Http,
            fixture: None,
            model: Some("gpt-4o".into()),
            call_limit: None,
        })
        .unwrap()
        .session_id;
    let rx = m.subscribe(&id).unwrap();
    m.submit_prompt(&id, "Start mission-3.").unwrap();
    assert_eq!(m.handle(&id).unwrap().state, SessionState::AwaitingLlm);
    assert_eq!(m.submit_prompt(&id, "hurry up"), Err(GatewayError::Busy));
    assert!(matches!(m.log(&id), Err(GatewayError::Busy)));
    release.send(()).unwrap();
    let msgs = common::drain(rx);
    // Completion was declared at the start point, away from the goal.
    assert!(matches!(msgs.last(), Some(TelemetryMessage::Finished { status: Some(RunStatus::Halted), .. })));
    let status = m.status(&id).unwrap();
    assert_eq!(status.calls_used, 1);
    assert!(status.accrued_cost > 0.0);
    assert_eq!(m.submit_prompt(&id, "again"), Err(GatewayError::SessionFinished));
}
