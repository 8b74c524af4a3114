use deepsearch_core::agent::{ModelClient, ModelError, ModelReply, ModelRequest, ScriptedModel, ScriptedTurn, ToolMeta};
use deepsearch_core::chat::ChatError;
use deepsearch_core::imaging::synthetic_png;
use deepsearch_core::{AssetId, AssetStore, Message, Termination, Trajectory};
use deepsearch_data::*;
use proptest::prelude::*;

const TOOLS: [&str; 3] = ["google_search", "fetch_image", "zoom_in"];

fn traj(task_id: &str, tool_turns: usize, tokens: usize, answer: Option<&str>, images: Vec<AssetId>) -> Trajectory {
    let mut messages = vec![Message::system("sys"), Message::user("question", images.clone())];
    for t in 0..tool_turns {
        messages.push(Message::assistant(format!("<think>step {t}</think>")));
        messages.push(Message::tool(
            format!("result {t}"),
            vec![],
            ToolMeta {
                turn_index: t as u32 + 1,
                tool_name: TOOLS[t % 3].into(),
                is_error: false,
                uids: vec![],
            },
        ));
    }
    messages.push(Message::assistant(format!("boxed{{{}}}", answer.unwrap_or(""))));
    Trajectory {
        task_id: task_id.into(),
        question: "question".into(),
        input_images: images,
        messages,
        tool_calls: vec![],
        final_answer: answer.map(str::to_string),
        terminated_by: Termination::SelfTerminated,
        turns_used: tool_turns as u32 + 1,
        peak_context_tokens: tokens,
        peak_context_images: 0,
        max_turns: 100,
        keep_recent_k: Some(5),
        max_context_tokens: 128_000,
        error: None,
        success: None,
    }
}

#[test]
fn rejection_boundaries() {
    let c = FilterCriteria::default();
    let g = NormalizedMatch;
    assert!(rejection_filter(&traj("a", 40, 64_000, Some("5"), vec![]), "5", &g, &c));
    assert!(!rejection_filter(&traj("a", 41, 64_000, Some("5"), vec![]), "5", &g, &c));
    assert!(!rejection_filter(&traj("a", 40, 64_001, Some("5"), vec![]), "5", &g, &c));
    assert!(rejection_filter(&traj("a", 39, 100, Some("5"), vec![]), "5", &g, &c));
    assert!(!rejection_filter(&traj("a", 39, 100, Some("4"), vec![]), "5", &g, &c));
    assert!(!rejection_filter(&traj("a", 39, 100, None, vec![]), "5", &g, &c));
    assert!(rejection_filter(&traj("a", 40, 60_000, Some("5"), vec![]), "5", &g, &c));
    assert!(!rejection_filter(&traj("a", 39, 65_000, Some("5"), vec![]), "5", &g, &c));
}

#[test]
fn model_call_counting_is_selectable() {
    let c = FilterCriteria {
        turn_count: TurnCount::ModelCalls,
        ..FilterCriteria::default()
    };
    // 40 tool turns plus the answering call
    assert!(!rejection_filter(&traj("a", 40, 10, Some("5"), vec![]), "5", &NormalizedMatch, &c));
    assert_eq!(FilterCriteria::new(0, 5), Err(CriteriaError::NonPositive));
}

proptest! {
    #[test]
    fn relaxing_bounds_never_shrinks_kept_set(
        cases in prop::collection::vec((0usize..60, 0usize..80_000, any::<bool>()), 0..30),
        dt in 0usize..20, dk in 0usize..20_000,
    ) {
        let tight = FilterCriteria::default();
        let loose = FilterCriteria { max_turns: tight.max_turns + dt, max_context_tokens: tight.max_context_tokens + dk, ..tight };
        for (turns, tokens, ok) in cases {
            let t = traj("p", turns, tokens, Some(if ok { "5" } else { "4" }), vec![]);
            if rejection_filter(&t, "5", &NormalizedMatch, &tight) {
                prop_assert!(rejection_filter(&t, "5", &NormalizedMatch, &loose));
            }
        }
    }
}

struct Broken;
impl ModelClient for Broken {
    fn complete(&self, _: &ModelRequest<'_>) -> Result<ModelReply, ModelError> {
        Err(ModelError::Chat(ChatError::Transport("refused".into())))
    }
}

#[test]
fn prefilter_rules() {
    let dir = tempfile::tempdir().unwrap();
    let store = AssetStore::open(dir.path()).unwrap();
    let img = store.register_asset(&synthetic_png(3, 3, 1), None, None).unwrap();
    let knows = ScriptedModel::new(vec![ScriptedTurn::Text("It is boxed{Paris}.".into())]);
    assert!(!prefilter_query("Capital?", &[img.clone()], "paris", &store, &knows, &NormalizedMatch));
    assert_eq!(knows.image_counts(), vec![1]);
    let wrong = ScriptedModel::new(vec![ScriptedTurn::Text("boxed{Lyon}".into())]);
    assert!(prefilter_query("Capital?", &[], "paris", &store, &wrong, &NormalizedMatch));
    assert!(prefilter_query("Capital?", &[], "paris", &store, &Broken, &NormalizedMatch));
}

#[test]
fn sft_masks_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = AssetStore::open(dir.path().join("store")).unwrap();
    let img = store.register_asset(&synthetic_png(7, 5, 2), None, None).unwrap();
    // 3 tool turns: 4 assistant, 3 tool, 1 system, 1 user
    let t = traj("t1", 3, 900, Some("5"), vec![img.clone()]);
    let (rec, assets) = export_sft(&t, "Ours", &store).unwrap();
    assert_eq!(rec.loss_mask.iter().filter(|m| **m).count(), 4);
    assert_eq!(rec.loss_mask.iter().filter(|m| !**m).count(), 5);
    assert_eq!(rec.turns, 3);
    assert_eq!(assets[&img].width, 7);
    for (m, mask) in rec.messages.iter().zip(&rec.loss_mask) {
        assert_eq!(*mask, m.role == deepsearch_core::Role::Assistant);
    }
    let path = dir.path().join("sft.jsonl");
    write_sft(&path, &[rec.clone()]).unwrap();
    assert_eq!(read_sft(&path).unwrap(), vec![rec]);
}

#[test]
fn dangling_image_aborts_export() {
    let dir = tempfile::tempdir().unwrap();
    let store = AssetStore::open(dir.path()).unwrap();
    let ghost = AssetId::new("asset://sha256/00").unwrap();
    let err = export_sft(&traj("t", 1, 1, Some("x"), vec![ghost]), "Ours", &store).unwrap_err();
    assert!(matches!(err, ExportError::DanglingUid { .. }));
}

fn records(turns: &[usize], source: &str) -> Vec<SftRecord> {
    let dir = tempfile::tempdir().unwrap();
    let store = AssetStore::open(dir.path()).unwrap();
    turns
        .iter()
        .enumerate()
        .map(|(i, &n)| export_sft(&traj(&format!("{source}{i}"), n, 1, Some("a"), vec![]), source, &store).unwrap().0)
        .collect()
}

#[test]
fn stats_mean_and_histograms() {
    let recs = records(&[2, 4, 6], "Ours");
    let s = compute_stats(&recs).unwrap();
    assert_eq!(s.per_source["Ours"].mean_turns, Some(4.0));
    assert_eq!(s.total_records, 3);
    let tool_msgs: usize = recs.iter().map(|r| r.turns).sum();
    assert_eq!(s.tool_histogram.values().sum::<usize>(), tool_msgs);
    assert_eq!(s.tool_histogram["google_search"], 1 + 2 + 2);
    assert_eq!(s.turn_histogram.values().sum::<usize>(), 3);
    assert_eq!(compute_stats(&[]), Err(StatsError::EmptyDataset));
}

#[test]
fn five_source_table_renders() {
    let manifest = Manifest::load(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/sources.json")).unwrap();
    let mut recs = records(&[1, 2], "FVQA");
    recs.extend(records(&[10, 20, 30], "Ours"));
    let s = compute_stats(&recs).unwrap();
    let table = render_table(&s, &manifest.source_order());
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("Dataset         | FVQA | LiveVQA | REDSearcher-MM | REDSearcher-Text | Ours"));
    assert!(lines[2].starts_with("Num. of Samples | 2    | 0       | 0"));
    assert!(lines[3].contains("| 1.50 |") && lines[3].ends_with("| 20.00"));
    assert_eq!(s.per_source.values().map(|p| p.count).sum::<usize>(), s.total_records);
}

#[test]
fn dataset_export_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let store = AssetStore::open(dir.path().join("store")).unwrap();
    let trajs = vec![
        traj("keep", 3, 100, Some("5"), vec![]),
        traj("wrong", 3, 100, Some("6"), vec![]),
        traj("nolabel", 3, 100, Some("5"), vec![]),
    ];
    let path = dir.path().join("trajectories.jsonl");
    std::fs::write(&path, trajs.iter().map(|t| t.to_json_line() + "\n").collect::<String>()).unwrap();
    let manifest = Manifest {
        sources: vec!["Ours".into()],
        tasks: ["keep", "wrong"]
            .iter()
            .map(|id| TaskLabel {
                task_id: id.to_string(),
                source: "Ours".into(),
                gold_answer: "5".into(),
            })
            .collect(),
    };
    let loaded = read_trajectories(&path).unwrap();
    let out = dir.path().join("out");
    let (recs, summary) = export_dataset(&loaded, &manifest, &store, &NormalizedMatch, &FilterCriteria::default(), &out).unwrap();
    assert_eq!((summary.kept, summary.rejected, summary.unlabeled), (1, 1, 1));
    assert_eq!(read_sft(&out.join("sft.jsonl")).unwrap(), recs);
    assert!(out.join("assets_manifest.json").exists());
}
