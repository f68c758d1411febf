use beestar_core::propagation::FeedItem;
use beestar_core::{
    Cause, Code, Delivery, EngineConfig, EngineError, Interface, PropertyDecl, ProgramSpec, Scope,
    SinkKind, Value, ValueType,
};

fn clip_app() -> Interface {
    let app = Interface::in_memory();
    let prompt = app.entity("Prompt").unwrap();
    let input = app.input_entity("CLIPInputEntity").unwrap();
    input.sets("word", &[&prompt]).unwrap();
    let agt = app.agent_entity("CLIPAgent", Code::builtin("identity")).unwrap();
    agt.watch("word", &[&prompt]).unwrap();
    app
}

fn external(app: &Interface, e: &str, p: &str, v: impl Into<Value>) -> Result<beestar_core::WaveReport, EngineError> {
    app.set_property(e, p, v.into(), Cause::External)
}

#[test]
fn prompt_word_fills_agent_input_and_triggers_once() {
    let app = clip_app();
    let report = external(&app, "Prompt", "word", "bulldozer").unwrap();
    let touched: Vec<(&str, &str)> = report
        .events
        .iter()
        .map(|e| (e.entity.as_str(), e.prop.as_str()))
        .collect();
    assert_eq!(touched, vec![("Prompt", "word"), ("CLIPAgent", "input")]);
    assert_eq!(report.triggers.len(), 1);
    assert_eq!(report.triggers[0].agent, "CLIPAgent");
    assert_eq!(report.triggers[0].input, Value::from("bulldozer"));
}

#[test]
fn input_widget_value_flows_through_sets_edge() {
    let app = clip_app();
    let report = external(&app, "CLIPInputEntity", "value", "crane").unwrap();
    let touched: Vec<(&str, &str)> = report
        .events
        .iter()
        .map(|e| (e.entity.as_str(), e.prop.as_str()))
        .collect();
    assert_eq!(
        touched,
        vec![
            ("CLIPInputEntity", "value"),
            ("Prompt", "word"),
            ("CLIPAgent", "input")
        ]
    );
    assert_eq!(
        report.events[1].cause,
        Cause::SetsEdge {
            from: "CLIPInputEntity".into()
        }
    );
}

#[test]
fn set_without_edges_is_one_event() {
    let app = Interface::in_memory();
    app.create_entity("lonely", "Entity", vec![PropertyDecl::new("x", ValueType::Number, 0.0)])
        .unwrap();
    let r = external(&app, "lonely", "x", 3.0).unwrap();
    assert_eq!(r.events.len(), 1);
    assert!(r.triggers.is_empty());
    assert_eq!(r.events[0].version, 1);
}

#[test]
fn mutual_sets_is_a_cycle_and_leaves_graph_untouched() {
    // A's output sets B.value; B's value (its emission) sets A.output.
    let app = Interface::in_memory();
    app.agent_entity("A", Code::builtin("identity")).unwrap();
    app.input_entity("B").unwrap();
    app.sets("A", "value", &["B"]).unwrap();
    app.sets("B", "output", &["A"]).unwrap();
    let before = app.snapshot();
    let err = external(&app, "A", "output", 1.0).unwrap_err();
    assert_eq!(err.code(), "cycle_error");
    assert_eq!(app.snapshot(), before);
    assert!(app.event_log(0).is_empty());
}

#[test]
fn type_mismatch_is_rejected_without_mutation() {
    let app = Interface::in_memory();
    app.create_entity(
        "Prompt",
        "Entity",
        vec![PropertyDecl::new("word", ValueType::String, "")],
    )
    .unwrap();
    let err = external(&app, "Prompt", "word", 42.0).unwrap_err();
    assert_eq!(err.code(), "type_error");
    let view = app.entity_view("Prompt").unwrap();
    assert_eq!(view.properties["word"].version, 0);
}

#[test]
fn type_error_deep_in_wave_discards_everything() {
    let app = Interface::in_memory();
    app.input_entity("in").unwrap();
    app.create_entity("t1", "Entity", vec![PropertyDecl::new("a", ValueType::Any, Value::Null)])
        .unwrap();
    app.create_entity("t2", "Entity", vec![PropertyDecl::new("b", ValueType::Number, 0.0)])
        .unwrap();
    app.sets("in", "a", &["t1"]).unwrap();
    app.sets("in", "b", &["t2"]).unwrap();
    let before = app.snapshot();
    assert_eq!(external(&app, "in", "value", "text").unwrap_err().code(), "type_error");
    assert_eq!(app.snapshot(), before);
}

#[test]
fn unknown_targets_are_reported() {
    let app = clip_app();
    assert_eq!(external(&app, "Nope", "x", 1.0).unwrap_err().code(), "unknown_entity");
    assert_eq!(external(&app, "Prompt", "nope", 1.0).unwrap_err().code(), "unknown_property");
}

#[test]
fn agent_output_reaches_gallery_through_data() {
    let app = Interface::in_memory();
    app.agent_entity("CLIPAgent", Code::builtin("identity")).unwrap();
    app.create_entity(
        "Training Data",
        "Entity",
        vec![PropertyDecl::new("data", ValueType::Array, Value::Array(vec![]))],
    )
    .unwrap();
    app.create_entity("TrainDataGallery", "GalleryEntity", vec![]).unwrap();
    app.sets("CLIPAgent", "data", &["Training Data"]).unwrap();
    app.watch("TrainDataGallery", "data", &["Training Data"]).unwrap();

    let labeled = Value::Array(vec![Value::from("img0: bulldozer")]);
    let r = app.apply_agent_output("CLIPAgent", labeled.clone()).unwrap();
    assert_eq!(r.events.len(), 2);
    assert_eq!(r.events[0].cause, Cause::AgentRun { agent: "CLIPAgent".into() });
    assert_eq!(r.notifications.len(), 1);
    assert_eq!(r.notifications[0].display, "TrainDataGallery");
    assert_eq!(app.entity_view("Training Data").unwrap().value("data"), Some(&labeled));
}

#[test]
fn agent_without_sets_edges_emits_only_output() {
    let app = clip_app();
    let r = app.apply_agent_output("CLIPAgent", Value::from("ok")).unwrap();
    assert_eq!(r.events.len(), 1);
    assert_eq!(r.events[0].prop, "output");
    assert_eq!(
        app.apply_agent_output("Prompt", Value::Null).unwrap_err().code(),
        "not_an_agent"
    );
}

#[test]
fn chained_agents_count_hops() {
    let app = Interface::in_memory();
    app.agent_entity("agent1", Code::builtin("identity")).unwrap();
    app.agent_entity("agent2", Code::builtin("identity")).unwrap();
    app.create_entity("a", "Entity", vec![PropertyDecl::new("x", ValueType::Any, Value::Null)])
        .unwrap();
    app.sets("agent1", "x", &["a"]).unwrap();
    app.watch("agent2", "x", &["a"]).unwrap();

    let first = app.apply_agent_output("agent1", Value::from(1.0)).unwrap();
    assert_eq!(first.hop, 0);
    assert_eq!(first.triggers.len(), 1);
    assert_eq!(first.triggers[0].agent, "agent2");
    assert_eq!(first.triggers[0].hop, 1);

    let second = app.apply_agent_output("agent2", Value::from(2.0)).unwrap();
    assert_eq!(second.chain, first.chain);
    assert_eq!(second.hop, 1);
}

#[test]
fn mutually_triggering_agents_stop_at_max_chain_depth() {
    let app = Interface::new(EngineConfig {
        max_chain_depth: 8,
        ..EngineConfig::default()
    })
    .unwrap();
    app.agent_entity("ping", Code::builtin("identity")).unwrap();
    app.agent_entity("pong", Code::builtin("identity")).unwrap();
    app.watch("pong", "output", &["ping"]).unwrap();
    app.watch("ping", "output", &["pong"]).unwrap();

    // Drive the chain the way runtimes would: each trigger's input becomes the output.
    let mut report = app.apply_agent_output("ping", Value::from(0.0)).unwrap();
    let mut runs = 1;
    let err = loop {
        let t = report.triggers.pop().expect("each run triggers the peer");
        match app.apply_agent_output(&t.agent, t.input) {
            Ok(r) => {
                runs += 1;
                report = r;
            }
            Err(e) => break e,
        }
        assert!(runs < 100, "chain did not stop");
    };
    assert_eq!(err.code(), "chain_depth_exceeded");
    assert_eq!(runs, 8);
}

#[test]
fn subscriptions_deliver_in_scope_only() {
    let app = clip_app();
    app.create_entity("Training Data", "Entity", vec![PropertyDecl::new("data", ValueType::Any, Value::Null)])
        .unwrap();
    let (_, mut all) = app.subscribe(Scope::All, SinkKind::EventStream).unwrap();
    let (_, mut data) = app
        .subscribe(Scope::property("Training Data", "data"), SinkKind::EventStream)
        .unwrap();
    let (_, mut one) = app.subscribe(Scope::entity("Prompt"), SinkKind::EventStream).unwrap();
    let (_, mut two) = app.subscribe(Scope::entity("Prompt"), SinkKind::EventStream).unwrap();

    external(&app, "Prompt", "word", "x").unwrap();

    let drain = |rx: &mut tokio::sync::mpsc::UnboundedReceiver<Delivery>| {
        let mut out = vec![];
        while let Ok(d) = rx.try_recv() {
            out.push(d);
        }
        out
    };
    assert_eq!(drain(&mut all).len(), 2);
    assert!(drain(&mut data).is_empty());
    let a = drain(&mut one);
    let b = drain(&mut two);
    assert_eq!(a.len(), 1);
    assert_eq!(a, b);

    assert!(app
        .subscribe(Scope::property("Prompt", "missing"), SinkKind::EventStream)
        .is_err());
}

#[test]
fn unsubscribe_stops_deliveries() {
    let app = clip_app();
    let (sub, mut rx) = app.subscribe(Scope::All, SinkKind::EventStream).unwrap();
    assert!(app.unsubscribe(sub.id));
    external(&app, "Prompt", "word", "x").unwrap();
    assert!(rx.try_recv().is_err());
}

#[test]
fn display_subscribers_get_notifications() {
    let app = Interface::in_memory();
    app.create_entity("d", "Entity", vec![PropertyDecl::new("v", ValueType::Any, Value::Null)])
        .unwrap();
    app.create_entity("gallery", "GalleryEntity", vec![]).unwrap();
    app.watch("gallery", "v", &["d"]).unwrap();
    let (_, mut rx) = app
        .subscribe(Scope::entity("gallery"), SinkKind::DisplayNotification)
        .unwrap();
    for i in 0..3 {
        external(&app, "d", "v", i as f64).unwrap();
    }
    let mut versions = vec![];
    while let Ok(Delivery::Notification(n)) = rx.try_recv() {
        versions.push(n.version);
    }
    assert_eq!(versions, vec![1, 2, 3]);
}

#[test]
fn event_log_replays_to_current_state() {
    let app = clip_app();
    let initial = app.snapshot();
    assert!(app.event_log(0).is_empty());
    external(&app, "Prompt", "word", "bulldozer").unwrap();
    app.apply_agent_output("CLIPAgent", Value::from("BULLDOZER")).unwrap();
    external(&app, "CLIPInputEntity", "value", "crane").unwrap();

    let log = app.event_log(0);
    assert_eq!(log.iter().map(|e| e.seq).collect::<Vec<_>>(), (1..=log.len() as u64).collect::<Vec<_>>());
    let replayed = beestar_core::propagation::replay(&initial, &log).unwrap();
    assert_eq!(replayed, app.snapshot());
    assert!(app.event_log(app.head()).is_empty());
    assert_eq!(app.event_log(log.len() as u64 - 1).len(), 1);
}

#[test]
fn versions_increase_by_one_per_event() {
    let app = clip_app();
    for w in ["a", "b", "c"] {
        external(&app, "Prompt", "word", w).unwrap();
    }
    for ev in app.event_log(0) {
        let prior = app
            .event_log(0)
            .into_iter()
            .filter(|e| e.entity == ev.entity && e.prop == ev.prop && e.seq < ev.seq)
            .count() as u64;
        assert_eq!(ev.version, prior + 1);
    }
}

#[test]
fn durable_log_file_holds_canonical_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.ndjson");
    let app = Interface::new(EngineConfig {
        event_log: Some(path.clone()),
        ..EngineConfig::default()
    })
    .unwrap();
    app.load_program(&ProgramSpec::export(&clip_app().snapshot())).unwrap();
    external(&app, "Prompt", "word", "bulldozer").unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let expected: Vec<String> = app.event_log(0).iter().map(|e| e.to_canonical_string()).collect();
    assert_eq!(lines, expected);
}

#[test]
fn scripted_interaction_is_deterministic() {
    let run = || {
        let app = clip_app();
        for w in ["bulldozer", "crane", "excavator"] {
            let r = external(&app, "Prompt", "word", w).unwrap();
            for t in r.triggers {
                app.apply_agent_output(&t.agent, t.input).unwrap();
            }
        }
        app.event_log(0)
            .iter()
            .map(|e| e.to_canonical_string() + "\n")
            .collect::<String>()
    };
    assert_eq!(run(), run());
}

#[test]
fn removing_agent_keeps_display_values() {
    let app = Interface::in_memory();
    app.agent_entity("labeler", Code::builtin("identity")).unwrap();
    app.create_entity("data", "Entity", vec![PropertyDecl::new("v", ValueType::Any, Value::Null)])
        .unwrap();
    app.create_entity("view", "DisplayEntity", vec![]).unwrap();
    app.sets("labeler", "v", &["data"]).unwrap();
    app.watch("view", "v", &["data"]).unwrap();
    app.apply_agent_output("labeler", Value::from("seen")).unwrap();

    app.remove_entity("labeler").unwrap();
    assert_eq!(app.entity_view("data").unwrap().value("v"), Some(&Value::from("seen")));
    assert_eq!(app.watchers_of("data", "v").unwrap(), vec!["view"]);
    let r = external(&app, "data", "v", "again").unwrap();
    assert_eq!(r.notifications.len(), 1);
}

#[test]
fn feed_sees_structure_and_events_in_order() {
    let app = Interface::in_memory();
    let mut feed = app.subscribe_feed();
    app.entity("e").unwrap();
    app.declare_property("e", PropertyDecl::new("x", ValueType::Any, Value::Null))
        .unwrap();
    external(&app, "e", "x", 1.0).unwrap();
    let mut items = vec![];
    while let Ok(i) = feed.try_recv() {
        items.push(i);
    }
    assert_eq!(items.len(), 3);
    assert!(matches!(items[2], FeedItem::Event(_)));
}

#[tokio::test]
async fn triggers_arrive_after_commit() {
    let app = clip_app();
    let mut triggers = app.subscribe_triggers();
    external(&app, "Prompt", "word", "bulldozer").unwrap();
    let t = triggers.recv().await.unwrap();
    assert_eq!(t.agent, "CLIPAgent");
    // The input the trigger carries is already visible in the graph.
    assert_eq!(
        app.entity_view("CLIPAgent").unwrap().value("input"),
        Some(&Value::from("bulldozer"))
    );
}
