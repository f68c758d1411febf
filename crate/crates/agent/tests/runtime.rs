use std::sync::Arc;
use std::time::{Duration, Instant};

use beestar_agent::{
    AgentOptions, AgentRuntime, AgentState, DispatchExecutor, LocalGraph, Mode, Outcome,
};
use beestar_core::kind::{props, LOG_ENTITY};
use beestar_core::protocol::{read_frame, write_frame, AgentReply, ReplyStatus};
use beestar_core::{Cause, Code, Interface, Value};

fn runtime(app: &Arc<Interface>, agent: &str) -> Arc<AgentRuntime> {
    AgentRuntime::new(
        agent,
        Arc::new(LocalGraph(Arc::clone(app))),
        Arc::new(DispatchExecutor::default()),
    )
}

fn app_with(agent: &str, code: Code) -> Arc<Interface> {
    let app = Interface::in_memory();
    app.agent_entity(agent, code).unwrap();
    Arc::new(app)
}

async fn settle(rt: &AgentRuntime) -> AgentState {
    let mut rx = rt.subscribe_state();
    let s = tokio::time::timeout(
        Duration::from_secs(10),
        rx.wait_for(|s| matches!(s, AgentState::Idle | AgentState::Error)),
    )
    .await
    .expect("runtime settles")
    .unwrap();
    *s
}

fn value(app: &Interface, e: &str, p: &str) -> Value {
    app.entity_view(e).unwrap().value(p).cloned().unwrap()
}

fn set_input(app: &Interface, agent: &str, v: impl Into<Value>) {
    app.set_property(agent, props::INPUT, v.into(), Cause::External).unwrap();
}

#[tokio::test]
async fn builtin_run_writes_output_once_with_agent_cause() {
    let app = app_with("Upper", Code::builtin("uppercase"));
    set_input(&app, "Upper", "bulldozer");
    let rt = runtime(&app, "Upper");
    let before = app.head();
    rt.play(Mode::Normal);
    assert_eq!(settle(&rt).await, AgentState::Idle);
    assert_eq!(value(&app, "Upper", props::OUTPUT), Value::from("BULLDOZER"));
    let outputs: Vec<_> = app
        .event_log(before)
        .into_iter()
        .filter(|e| e.prop == props::OUTPUT)
        .collect();
    assert_eq!(outputs.len(), 1);
    assert_eq!(outputs[0].cause, Cause::AgentRun { agent: "Upper".into() });
}

#[tokio::test]
async fn status_mirrors_transitions_in_order() {
    let app = app_with("A", Code::builtin("identity"));
    let rt = runtime(&app, "A");
    let before = app.head();
    rt.play(Mode::Normal);
    settle(&rt).await;
    let statuses: Vec<String> = app
        .event_log(before)
        .into_iter()
        .filter(|e| e.prop == props::STATUS)
        .map(|e| {
            assert_eq!(e.cause, Cause::AgentStatus { agent: "A".into() });
            e.new.as_str().unwrap().to_string()
        })
        .collect();
    assert_eq!(statuses, vec!["running", "idle"]);
}

#[tokio::test]
async fn missing_source_code_is_an_error_state() {
    let app = app_with("A", Code::builtin("identity"));
    app.set_property("A", props::SOURCE_CODE, Value::Null, Cause::External)
        .unwrap_or_else(|_| panic!("null source code is admitted"));
    let rt = runtime(&app, "A");
    rt.play(Mode::Normal);
    assert_eq!(settle(&rt).await, AgentState::Error);
    let status = value(&app, "A", props::STATUS);
    assert!(status.as_str().unwrap().starts_with("error: "), "{status:?}");
    // A later run with code present recovers.
    app.set_property("A", props::SOURCE_CODE, Value::Code(Code::builtin("identity")), Cause::External)
        .unwrap();
    rt.play(Mode::Normal);
    assert_eq!(settle(&rt).await, AgentState::Idle);
}

#[tokio::test]
async fn failure_sets_error_status_without_output() {
    let app = app_with("A", Code::builtin("fail:boom"));
    let rt = runtime(&app, "A");
    rt.play(Mode::Normal);
    assert_eq!(settle(&rt).await, AgentState::Error);
    assert_eq!(value(&app, "A", props::STATUS), Value::from("error: boom"));
    assert!(value(&app, "A", props::OUTPUT).is_null());
}

#[tokio::test]
async fn subprocess_echo_round_trips() {
    let app = app_with("Echo", Code::new("sh", "main", "cat").unwrap());
    let doc = Value::from_json(&serde_json::json!({"k": [1, "two", true]})).unwrap();
    set_input(&app, "Echo", doc.clone());
    let rt = runtime(&app, "Echo");
    rt.play(Mode::Normal);
    assert_eq!(settle(&rt).await, AgentState::Idle);
    assert_eq!(value(&app, "Echo", props::OUTPUT), doc);
}

#[tokio::test]
async fn stop_reaches_idle_quickly_with_no_output() {
    let app = app_with("Slow", Code::builtin("sleep:30"));
    let rt = runtime(&app, "Slow");
    let before = app.head();
    rt.play(Mode::Normal);
    tokio::time::sleep(Duration::from_millis(100)).await;
    let t = Instant::now();
    assert_eq!(rt.stop().await, "stopped");
    assert!(t.elapsed() < Duration::from_secs(2));
    assert_eq!(rt.state(), AgentState::Idle);
    assert_eq!(rt.last_result().unwrap().outcome, Outcome::Cancelled);
    assert!(app.event_log(before).iter().all(|e| e.prop != props::OUTPUT));
    assert_eq!(value(&app, "Slow", props::STATUS), Value::from("idle"));
}

#[tokio::test]
async fn stop_kills_a_subprocess() {
    let app = app_with("Slow", Code::new("sh", "main", "sleep 30").unwrap());
    let rt = runtime(&app, "Slow");
    rt.play(Mode::Normal);
    tokio::time::sleep(Duration::from_millis(200)).await;
    let t = Instant::now();
    rt.stop().await;
    assert!(t.elapsed() < Duration::from_secs(2));
    assert_eq!(rt.state(), AgentState::Idle);
}

#[tokio::test]
async fn stop_when_idle_is_harmless() {
    let app = app_with("A", Code::builtin("identity"));
    let rt = runtime(&app, "A");
    assert_eq!(rt.stop().await, "idle");
    rt.play(Mode::Normal);
    assert_eq!(settle(&rt).await, AgentState::Idle);
}

#[tokio::test]
async fn triggers_while_busy_coalesce_to_one_run_with_latest_input() {
    let app = app_with("Slow", Code::builtin("sleep:0.3"));
    let rt = runtime(&app, "Slow");
    set_input(&app, "Slow", 1.0);
    rt.play(Mode::Normal);
    for i in 2..=5 {
        set_input(&app, "Slow", i as f64);
        assert_eq!(rt.play(Mode::Normal), "queued");
    }
    assert_eq!(settle(&rt).await, AgentState::Idle);
    assert_eq!(rt.executions(), 2);
    assert_eq!(value(&app, "Slow", props::OUTPUT), Value::from(5.0));
}

#[tokio::test]
async fn self_modification_changes_the_next_run() {
    let app = app_with("A", Code::builtin("identity"));
    set_input(&app, "A", "abc");
    let rt = runtime(&app, "A");
    rt.self_modify(Code::builtin("uppercase")).await.unwrap();
    rt.play(Mode::Normal);
    settle(&rt).await;
    assert_eq!(value(&app, "A", props::OUTPUT), Value::from("ABC"));
}

#[tokio::test]
async fn debug_lines_reach_a_watching_log_entity() {
    let app = app_with("A", Code::builtin("identity"));
    app.create_entity("Log", LOG_ENTITY, vec![]).unwrap();
    app.watch("Log", props::OUTPUT, &["A"]).unwrap();
    let rt = runtime(&app, "A");
    rt.play(Mode::Debug);
    settle(&rt).await;
    let lines = value(&app, "Log", props::LINES);
    let lines: Vec<&str> = lines.as_array().unwrap().iter().map(|l| l.as_str().unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("A: DEBUG enter"));
    assert!(lines[1].starts_with("A: DEBUG exit"));
}

#[tokio::test]
async fn frames_are_answered_over_tcp() {
    let app = app_with("A", Code::builtin("identity"));
    let rt = runtime(&app, "A");
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(beestar_agent::serve_messages(listener, rt));
    let mut sock = tokio::net::TcpStream::connect(addr).await.unwrap();

    write_frame(&mut sock, &serde_json::json!({"id": 4, "verb": "play"})).await.unwrap();
    let reply: AgentReply = serde_json::from_slice(&read_frame(&mut sock).await.unwrap().unwrap()).unwrap();
    assert_eq!(reply.id, 4);
    assert_eq!(reply.status, ReplyStatus::Ok);

    write_frame(&mut sock, &serde_json::json!({"id": 5, "verb": "dance"})).await.unwrap();
    let reply: AgentReply = serde_json::from_slice(&read_frame(&mut sock).await.unwrap().unwrap()).unwrap();
    assert_eq!(reply.id, 5);
    assert_eq!(reply.status, ReplyStatus::Error);
}

#[tokio::test]
async fn registering_a_non_agent_fails() {
    let app = Interface::in_memory();
    app.entity("Prompt").unwrap();
    let server = beestar_server::start_local(Arc::new(app), Default::default()).await.unwrap();
    let opts = AgentOptions::new(&server.url(), "Prompt");
    let err = beestar_agent::run_agent(opts, Arc::new(DispatchExecutor::default()), std::future::pending())
        .await
        .unwrap_err();
    assert!(matches!(err, beestar_agent::AgentError::Registration(_)), "{err}");
    let opts = AgentOptions::new(&server.url(), "Nobody");
    let err = beestar_agent::run_agent(opts, Arc::new(DispatchExecutor::default()), std::future::pending())
        .await
        .unwrap_err();
    assert!(matches!(err, beestar_agent::AgentError::Registration(_)), "{err}");
    server.stop().await.unwrap();
}

#[tokio::test]
async fn registered_agent_runs_on_triggers_from_the_server() {
    let app = Interface::in_memory();
    let prompt = app.entity("Prompt").unwrap();
    let agent = app.agent_entity("Upper", Code::builtin("uppercase")).unwrap();
    agent.watch("word", &[&prompt]).unwrap();
    let app = Arc::new(app);
    let server = beestar_server::start_local(Arc::clone(&app), Default::default()).await.unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let opts = AgentOptions::new(&server.url(), "Upper");
    let task = tokio::spawn(beestar_agent::run_agent(
        opts,
        Arc::new(DispatchExecutor::default()),
        async move {
            let _ = rx.await;
        },
    ));
    let client = server.client();
    let deadline = Instant::now() + Duration::from_secs(5);
    while client.agents().await.unwrap().is_empty() {
        assert!(Instant::now() < deadline, "agent never registered");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    client.set("Prompt", "word", serde_json::json!("crane"), "external").await.unwrap();
    let deadline = Instant::now() + Duration::from_secs(5);
    while value(&app, "Upper", props::OUTPUT) != Value::from("CRANE") {
        assert!(Instant::now() < deadline, "output never arrived");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    tx.send(()).unwrap();
    task.await.unwrap().unwrap();
    server.stop().await.unwrap();
}
