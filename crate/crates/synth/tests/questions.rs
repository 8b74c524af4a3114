use std::sync::Arc;

use deepsearch_core::chat::ScriptedChat;
use deepsearch_core::fetch::{FetchError, ImageFetcher, PageFetcher};
use deepsearch_core::imaging::synthetic_png;
use deepsearch_core::middleware::{DocMiddleware, FallbackSummarizer, InterleavedDocument, Segment};
use deepsearch_core::{AssetId, AssetStore};
use deepsearch_synth::*;

const POSTER: &str = "https://news.example/img/inception-poster.jpg";

struct Pages;
impl PageFetcher for Pages {
    fn fetch_page(&self, url: &str) -> Result<InterleavedDocument, FetchError> {
        let mut segments = vec![Segment::Text {
            text: "Inception returns to theaters. The film was directed by Christopher Nolan.".into(),
        }];
        if url.ends_with("/film") {
            segments.push(Segment::Image {
                image_url: POSTER.into(),
                image_bytes: Some(synthetic_png(6, 9, 3)),
                caption: Some("The theatrical poster of Inception".into()),
            });
        }
        Ok(InterleavedDocument {
            source_url: url.into(),
            segments,
        })
    }
}

struct NoImages;
impl ImageFetcher for NoImages {
    fn fetch_image(&self, url: &str) -> Result<Vec<u8>, FetchError> {
        Err(FetchError::status(404, url))
    }
}

struct Env {
    _dir: tempfile::TempDir,
    store: Arc<AssetStore>,
    mw: DocMiddleware,
}

fn env() -> Env {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(AssetStore::open(dir.path()).unwrap());
    let mw = DocMiddleware::new(store.clone(), Arc::new(NoImages), Arc::new(FallbackSummarizer::default()));
    Env { _dir: dir, store, mw }
}

const EXTRACTION: &str = r#"```json
{"entity": "Inception", "image_uid": "https://news.example/img/inception-poster.jpg",
 "clue": "The news page shows the theatrical poster image of Inception.",
 "visual_question": "How many people appear on the poster?", "answer": "5"}
```"#;

fn seed(e: &Env) -> QuerySeed {
    let extractor = ScriptedChat::new([EXTRACTION]);
    extract_seed("https://news.example/film", &Pages, &e.mw, &extractor, &Prompts::default()).unwrap()
}

#[test]
fn seed_from_captioned_hero_image() {
    let e = env();
    let s = seed(&e);
    assert_eq!(s.core_entity, "Inception");
    assert_eq!(s.anchor_image.as_str(), POSTER);
    assert_eq!(s.answer, "5");
    assert!(e.store.contains(s.anchor_image.as_str()));
    assert_eq!(s.webpage.images.len(), 1);
}

#[test]
fn seed_is_deterministic() {
    let e = env();
    assert_eq!(seed(&e), seed(&e));
}

#[test]
fn page_without_images_is_rejected() {
    let e = env();
    let extractor = ScriptedChat::new([EXTRACTION]);
    let err = extract_seed("https://news.example/text", &Pages, &e.mw, &extractor, &Prompts::default()).unwrap_err();
    assert!(matches!(err, SynthError::NoQualifyingImage { .. }));
    assert!(extractor.prompts().is_empty(), "extractor is not consulted");
}

#[test]
fn extractor_refusal_and_foreign_image() {
    let e = env();
    let refuse = ScriptedChat::new([r#"{"refusal": "page covers several films"}"#]);
    let err = extract_seed("https://news.example/film", &Pages, &e.mw, &refuse, &Prompts::default()).unwrap_err();
    assert!(matches!(err, SynthError::ExtractorRefusal(ref m) if m.contains("several films")));

    let foreign = ScriptedChat::new([EXTRACTION.replace(POSTER, "https://elsewhere/x.png")]);
    let err = extract_seed("https://news.example/film", &Pages, &e.mw, &foreign, &Prompts::default()).unwrap_err();
    assert!(matches!(err, SynthError::NoQualifyingImage { .. }));
}

const Q0: &str = "A news article about Inception includes its theatrical poster image. How many people appear on that poster?";

#[test]
fn single_hop_keeps_clue_and_answer() {
    let e = env();
    let s = seed(&e);
    let composer = ScriptedChat::new([format!(r#"{{"question": "{Q0}"}}"#)]);
    let q = synthesize_single_hop(&s, &composer, &Prompts::default()).unwrap();
    assert_eq!(q.hop_count, 1);
    assert_eq!(q.answer, s.answer);
    assert!(q.question_text.contains("Inception") && q.question_text.contains("poster"));

    let lossy = ScriptedChat::new([r#"{"question": "How many people are on the poster?"}"#]);
    assert!(matches!(
        synthesize_single_hop(&s, &lossy, &Prompts::default()),
        Err(SynthError::ComposerRefusal(_))
    ));
}

fn film_source() -> InMemorySource {
    InMemorySource::new()
        .with(
            "Inception",
            vec![
                Attribute::new("director", "Christopher Nolan", "was directed by Christopher Nolan"),
                Attribute::new("composer", "Hans Zimmer", "was scored by Hans Zimmer"),
            ],
        )
        .with(
            "Christopher Nolan",
            vec![Attribute::new("birthplace", "London", "was born in London")],
        )
        .with(
            "Hans Zimmer",
            vec![
                Attribute::new("composer", "Inception", "scored Inception"),
                Attribute::new("award", "Academy Award for Best Original Score", "won the Academy Award for Best Original Score"),
                Attribute::new("birthplace", "Frankfurt", "was born in Frankfurt am Main"),
            ],
        )
        .with(
            "London",
            vec![
                Attribute::new("country", "United Kingdom", "is the capital of the United Kingdom"),
                Attribute::new("river", "Thames", "lies on the Thames"),
            ],
        )
}

struct Lenient;
impl IrreversibilityJudge for Lenient {
    fn irreversible(&self, _: &str, _: &str) -> Result<bool, JudgeError> {
        Ok(true)
    }
}

fn film_graph(seed: u64) -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new("Inception", seed);
    let f = DensityDepthFilter {
        max_per_node: 3,
        max_depth: 2,
    };
    // Zimmer's own facts each single him out, so he stays a leaf
    let counts = [
        ("was directed by Christopher Nolan", 12),
        ("was scored by Hans Zimmer", 150),
        ("was born in London", 90_000),
        ("won the Academy Award for Best Original Score", 1),
        ("was born in Frankfurt am Main", 1),
    ];
    let oracle = CandidateCountOracle::new(counts.iter().map(|(k, v)| (k.to_string(), *v)).collect());
    g.expand_all(&film_source(), &f, &oracle, 100).unwrap();
    g
}

#[test]
fn fuzzify_seeded_golden() {
    let mut g = film_graph(11);
    assert_eq!(g.nodes.len(), 4);
    let report = fuzzify(&mut g, &film_source(), 1);
    let by = |e: &str| g.nodes[&g.find(e).unwrap()].clone();
    assert_eq!(by("Christopher Nolan").fuzzed_as, None);
    assert_eq!(by("London").fuzzed_as.as_deref(), Some("the entity that is the capital of the United Kingdom"));
    assert_eq!(by("Hans Zimmer").fuzzed_as.as_deref(), Some("the entity that was born in Frankfurt am Main"));
    assert!(report.skipped.is_empty());
    assert_eq!(g.root().fuzzed_as, None);
}

#[test]
fn fuzzify_never_reuses_incident_relations() {
    let src = InMemorySource::new()
        .with("E", vec![Attribute::new("r", "L", "has r L")])
        .with("L", vec![Attribute::new("r", "Z", "has r Z")]);
    let mut g = KnowledgeGraph::new("E", 0);
    g.expand_step(&src, &DensityDepthFilter::default(), &Lenient).unwrap();
    let report = fuzzify(&mut g, &src, 1);
    let l = g.find("L").unwrap();
    assert_eq!(report.skipped, vec![l]);
    assert!(g.nodes[&l].fuzz_skipped);
    assert!(g.nodes[&l].fuzzed_as.is_none());
}

#[test]
fn fuzzify_leaves_dense_graphs_alone() {
    let g0 = KnowledgeGraph::new("E", 0);
    let mut g = g0.clone();
    let report = fuzzify(&mut g, &InMemorySource::new(), 1);
    assert_eq!(report, FuzzReport::default());
    assert_eq!(g, g0);
}

#[test]
fn sample_of_root_only_graph_is_root() {
    let mut g = KnowledgeGraph::new("E", 4);
    let s = sample_subgraph(&mut g, 3);
    assert_eq!(s.nodes.len(), 1);
    assert_eq!(s.marked_leaf, Some(s.root_id));
}

#[test]
fn sample_three_node_graph_golden() {
    let src = InMemorySource::new().with(
        "E",
        vec![Attribute::new("r1", "u1", "r1 u1"), Attribute::new("r2", "u2", "r2 u2")],
    );
    let mut g = KnowledgeGraph::new("E", 2024);
    g.expand_step(&src, &DensityDepthFilter::default(), &Lenient).unwrap();
    let s = sample_subgraph(&mut g, 1);
    let names: Vec<&str> = s.nodes.values().map(|n| n.entity.as_str()).collect();
    let leaf = &s.nodes[&s.marked_leaf.unwrap()].entity;
    assert_eq!((names, leaf.as_str()), (vec!["E", "u1"], "u1"));
    assert!(s.violations().is_empty());
}

#[test]
fn sampled_subgraphs_are_connected_and_shallow() {
    for seed in 0..30 {
        let mut g = film_graph(seed);
        for hops in 0..4 {
            let s = sample_subgraph(&mut g, hops);
            assert!(s.nodes.contains_key(&s.root_id));
            assert!(s.violations().is_empty(), "{:?}", s.violations());
            let leaf = s.marked_leaf.unwrap();
            assert_eq!(s.out_degree(leaf), 0);
            assert!(s.nodes.values().all(|n| n.depth as usize <= hops));
        }
    }
}

const REASONING: &str = "The city in the image is where Christopher Nolan was born, and he directed this entity, whose music came from the entity that was born in Frankfurt am Main.";

#[test]
fn multihop_golden() {
    let e = env();
    let s = seed(&e);
    let q0 = synthesize_single_hop(&s, &ScriptedChat::new([format!(r#"{{"question": "{Q0}"}}"#)]), &Prompts::default()).unwrap();
    let mut g = film_graph(11);
    fuzzify(&mut g, &film_source(), 1);
    g.marked_leaf = g.find("London");
    let leaf_img = e.store.register_asset(&synthetic_png(5, 5, 8), Some("https://img.example/london.png"), None).unwrap();
    let composer = ScriptedChat::new([format!(r#"{{"reasoning": "{REASONING}"}}"#)]);
    let q = compose_multihop(&s, &q0, &g, &leaf_img, &composer, &Prompts::default()).unwrap();
    assert_eq!(q.hop_count, 3);
    assert_eq!(q.answer, q0.answer);
    assert_eq!(q.input_images, vec![leaf_img.clone()]);
    assert_eq!(
        q.question_text,
        format!("{REASONING} A news article about this entity includes its theatrical poster image. How many people appear on that poster?")
    );
    for hidden in ["Inception", "London", "Hans Zimmer"] {
        assert!(!q.question_text.contains(hidden), "{hidden} leaked");
    }
    let prompt = &composer.prompts()[0];
    assert!(!prompt.contains("London") && !prompt.contains("Zimmer"), "{prompt}");
    assert!(prompt.contains("Christopher Nolan | birthplace | the entity shown in the image"), "{prompt}");

    let leaky = ScriptedChat::new([r#"{"reasoning": "Born in London, Nolan directed this entity."}"#]);
    assert!(matches!(
        compose_multihop(&s, &q0, &g, &leaf_img, &leaky, &Prompts::default()),
        Err(SynthError::ComposerRefusal(m)) if m.contains("London")
    ));
}

#[test]
fn questions_jsonl_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("questions.jsonl");
    let q = SynthesizedQuestion {
        question_text: "q".into(),
        answer: "a".into(),
        anchor_image: AssetId::new("https://x/y.png").unwrap(),
        input_images: vec![],
        hop_count: 1,
        provenance: vec![],
    };
    write_questions(&path, &[q.clone()]).unwrap();
    write_questions(&path, &[q.clone()]).unwrap();
    assert_eq!(read_questions(&path).unwrap(), vec![q.clone(), q]);
}
