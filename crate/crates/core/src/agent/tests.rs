use std::sync::Arc;

use serde_json::json;

use super::*;
use crate::fetch::FixtureImageFetcher;
use crate::imaging::synthetic_png;
use crate::tools::{FetchImageTool, GoogleSearchTool, SearchBackend, SearchError, SearchHit, SearchKind};

struct OneHit;
impl SearchBackend for OneHit {
    fn search(&self, _: SearchKind, q: &str, _: usize) -> Result<Vec<SearchHit>, SearchError> {
        Ok(vec![SearchHit {
            title: format!("about {q}"),
            link: Some("https://example.org".into()),
            ..SearchHit::default()
        }])
    }
}

struct Down;
impl ModelClient for Down {
    fn complete(&self, _: &ModelRequest<'_>) -> Result<ModelReply, ModelError> {
        Err(ModelError::Chat(crate::chat::ChatError::Transport("connection refused".into())))
    }
}

struct Env {
    _dir: tempfile::TempDir,
    store: Arc<AssetStore>,
    registry: Arc<ToolRegistry>,
}

fn env() -> Env {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(AssetStore::open(dir.path().join("store")).unwrap());
    let images = FixtureImageFetcher::new(dir.path().join("images"));
    std::fs::create_dir_all(dir.path().join("images")).unwrap();
    for i in 0..200u32 {
        std::fs::write(images.path_for(&format!("https://img.example/{i}.png")), synthetic_png(4, 4, i)).unwrap();
    }
    let registry = ToolRegistry::new()
        .register(Arc::new(GoogleSearchTool::new(Arc::new(OneHit), 10)))
        .register(Arc::new(FetchImageTool::new(store.clone(), Arc::new(images))));
    Env {
        _dir: dir,
        store,
        registry: Arc::new(registry),
    }
}

fn search_turn(q: &str) -> ScriptedTurn {
    ScriptedTurn::Full {
        text: format!("<think>look up {q}</think>"),
        tool_call: Some(ToolCall::new("tool-google-search-google_search", json!({"q": q}))),
    }
}

fn config(policy: ContextPolicy) -> AgentConfig {
    AgentConfig {
        retry: RetryPolicy::immediate(3),
        ..AgentConfig::with_policy(policy)
    }
}

#[test]
fn immediate_answer_terminates_self_in_one_turn() {
    let e = env();
    let model = Arc::new(ScriptedModel::new(vec![ScriptedTurn::Text("The final answer is Paris.".into())]));
    let agent = Agent::new(model, e.registry.clone(), e.store.clone(), config(ContextPolicy::default()));
    let t = agent.run_task("t1", "Capital of France?", &[]).unwrap();
    assert_eq!(t.turns_used, 1);
    assert!(t.tool_calls.is_empty());
    assert_eq!(t.terminated_by, Termination::SelfTerminated);
    assert_eq!(t.final_answer.as_deref(), Some("The final answer is Paris."));
}

#[test]
fn turn_budget_forces_summary() {
    let e = env();
    let mut turns: Vec<ScriptedTurn> = (0..3).map(|i| search_turn(&format!("q{i}"))).collect();
    turns.push(ScriptedTurn::Text("Summary... boxed{42}".into()));
    let model = Arc::new(ScriptedModel::new(turns));
    let policy = ContextPolicy::new(3, Some(5), 128_000).unwrap();
    let agent = Agent::new(model.clone(), e.registry.clone(), e.store.clone(), config(policy.clone()));
    let t = agent.run_task("t2", "q", &[]).unwrap();
    assert_eq!(t.terminated_by, Termination::TurnBudget);
    assert_eq!(t.turns_used, 3);
    assert_eq!(t.tool_calls.len(), 3);
    assert_eq!(t.final_answer.as_deref(), Some("42"));
    let n = t.messages.len();
    assert_eq!(t.messages[n - 2].role, Role::User);
    assert_eq!(t.messages[n - 2].text, policy.summary_prompt);
    assert!(t.messages[n - 2].text.starts_with("Summarize the above conversation, and output the FINAL ANSWER"));
    assert_eq!(model.remaining(), 0);
}

#[test]
fn model_failure_keeps_partial_trajectory() {
    let e = env();
    let agent = Agent::new(Arc::new(Down), e.registry.clone(), e.store.clone(), config(ContextPolicy::default()));
    let t = agent.run_task("t3", "q", &[]).unwrap();
    assert_eq!(t.terminated_by, Termination::Error);
    assert_eq!(t.turns_used, 0);
    assert!(t.error.as_deref().unwrap().contains("connection refused"));
    assert_eq!(t.messages.len(), 2);
}

#[test]
fn script_running_out_mid_task_is_an_error() {
    let e = env();
    let model = Arc::new(ScriptedModel::new(vec![search_turn("a")]));
    let agent = Agent::new(model, e.registry.clone(), e.store.clone(), config(ContextPolicy::default()));
    let t = agent.run_task("t", "q", &[]).unwrap();
    assert_eq!(t.terminated_by, Termination::Error);
    assert_eq!(t.turns_used, 1);
    assert_eq!(t.tool_calls.len(), 1);
}

#[test]
fn multiple_calls_in_one_turn_are_rejected() {
    let e = env();
    let double = format!(
        "{}\n{}",
        tool_call_markup(&ToolCall::new("google_search", json!({"q": "a"}))),
        tool_call_markup(&ToolCall::new("google_search", json!({"q": "b"})))
    );
    let model = Arc::new(ScriptedModel::new(vec![ScriptedTurn::Text(double), ScriptedTurn::Text("boxed{x}".into())]));
    let agent = Agent::new(model, e.registry.clone(), e.store.clone(), config(ContextPolicy::default()));
    let t = agent.run_task("t", "q", &[]).unwrap();
    assert!(t.tool_calls[0].is_error);
    let tool_msg = t.messages.iter().find(|m| m.role == Role::Tool).unwrap();
    assert!(tool_msg.text.contains("exactly one tool call"));
    assert_eq!(t.final_answer.as_deref(), Some("x"));
}

#[test]
fn unresolved_input_image_is_rejected() {
    let e = env();
    let model = Arc::new(ScriptedModel::new(vec![]));
    let agent = Agent::new(model, e.registry.clone(), e.store.clone(), config(ContextPolicy::default()));
    let err = agent
        .run_task("t", "q", &[AssetId::new("https://nowhere/x.png").unwrap()])
        .unwrap_err();
    assert!(matches!(err, AgentError::UnresolvedInput(_)));
}

#[test]
fn context_budget_stops_the_loop() {
    let e = env();
    let model = Arc::new(ScriptedModel::new((0..10).map(|i| search_turn(&format!("{i}"))).collect()));
    let policy = ContextPolicy::new(10, None, 250).unwrap();
    let agent = Agent::new(model, e.registry.clone(), e.store.clone(), config(policy));
    let t = agent.run_task("t", "q", &[]).unwrap();
    assert_eq!(t.terminated_by, Termination::ContextBudget);
    assert!(t.turns_used < 10);
    assert!(t.peak_context_tokens <= 250);
}

#[test]
fn eviction_caps_attached_images() {
    let e = env();
    let input = e.store.register_asset(&synthetic_png(8, 8, 999), None, None).unwrap();
    let mut turns: Vec<ScriptedTurn> = (0..12)
        .map(|i| ScriptedTurn::Full {
            text: String::new(),
            tool_call: Some(ToolCall::new("fetch_image", json!({"url": format!("https://img.example/{i}.png")}))),
        })
        .collect();
    turns.push(ScriptedTurn::Text("boxed{done}".into()));
    let model = Arc::new(ScriptedModel::new(turns));
    let policy = ContextPolicy::new(30, Some(3), 1_000_000).unwrap();
    let agent = Agent::new(model.clone(), e.registry.clone(), e.store.clone(), config(policy));
    let t = agent.run_task("t", "q", std::slice::from_ref(&input)).unwrap();
    assert_eq!(t.terminated_by, Termination::SelfTerminated);
    // three kept fetch results plus the exempt input image
    assert_eq!(t.peak_context_images, 4);
    assert!(model.image_counts().iter().all(|&n| n <= 4));
    let evicted: Vec<&Message> = t.messages.iter().filter(|m| m.evicted).collect();
    assert_eq!(evicted.len(), 9);
    assert!(evicted[0].text.contains("https://img.example/0.png"));
    assert_eq!(t.messages[1].images, vec![input]);
}

#[test]
fn final_summary_runs_only_when_enabled_and_unboxed() {
    let e = env();
    let turns = vec![
        search_turn("a"),
        ScriptedTurn::Text("There are five of them.".into()),
        ScriptedTurn::Text("So the answer is boxed{5}.".into()),
    ];
    let policy = ContextPolicy {
        final_summary: true,
        ..ContextPolicy::default()
    };
    let agent = Agent::new(Arc::new(ScriptedModel::new(turns)), e.registry.clone(), e.store.clone(), config(policy));
    let t = agent.run_task("t", "q", &[]).unwrap();
    assert_eq!(t.terminated_by, Termination::SelfTerminated);
    assert_eq!(t.turns_used, 3);
    assert_eq!(t.final_answer.as_deref(), Some("5"));
}

#[test]
fn trajectories_serialize_deterministically() {
    let run = || {
        let e = env();
        let model = Arc::new(ScriptedModel::new(vec![search_turn("x"), ScriptedTurn::Text("boxed{1}".into())]));
        let agent = Agent::new(model, e.registry.clone(), e.store.clone(), config(ContextPolicy::default()));
        agent.run_task("det", "q", &[]).unwrap().to_json_line()
    };
    let a = run();
    assert_eq!(a, run());
    let back: Trajectory = serde_json::from_str(&a).unwrap();
    assert_eq!(back.to_json_line(), a);
    assert!(a.contains(r#""terminated_by":"self""#));
}
