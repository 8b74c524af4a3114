use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use deepsearch_cli::eval::{self, BenchItem, Harness, ingest_images};
use deepsearch_cli::runtime::{chat_client, live_model};
use deepsearch_cli::{CliError, Runtime};
use deepsearch_core::agent::{AgentConfig, ContextPolicy, ModelClient};
use deepsearch_core::{Agent, ToolCall};
use deepsearch_data::{
    ChatGrader, FilterCriteria, Grader, Manifest, NormalizedMatch, TurnCount, compute_stats, export_dataset,
    prefilter_query, read_sft, read_trajectories, rejection_filter, render_table,
};
use deepsearch_synth::{
    CandidateCountOracle, ChatJudge, DensityDepthFilter, FixtureSource, IrreversibilityJudge, KnowledgeGraph,
    LeafImage, Prompts, QuerySeed, compose_multihop, extract_seed, fuzzify, resolve_leaf_image, sample_subgraph,
    synthesize_single_hop, write_questions,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "deepsearch", version, about = "Multimodal deep-search agent toolkit")]
struct Cli {
    /// Asset store directory.
    #[arg(long, global = true, default_value = ".deepsearch/store")]
    store: PathBuf,
    /// Replay fixture directory instead of live endpoints.
    #[arg(long, global = true)]
    replay: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the agent.
    #[command(subcommand)]
    Agent(AgentCmd),
    /// Scrape one page through the middleware.
    Scrape {
        #[arg(long)]
        url: String,
        #[arg(long, default_value = "")]
        extract: String,
    },
    /// Question synthesis.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Training-data pipeline.
    #[command(subcommand)]
    Data(DataCmd),
    /// Interpolate two parameter files.
    Merge {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = deepsearch_merge::DEFAULT_ALPHA)]
        alpha: f64,
        /// Glob on key names; repeat for several. Default: all shared keys.
        #[arg(long = "key-filter")]
        key_filter: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark evaluation.
    #[command(subcommand)]
    Eval(EvalCmd),
}

#[derive(Args, Clone)]
struct PolicyArgs {
    #[arg(long, default_value_t = 30)]
    max_turns: u32,
    #[arg(long, default_value_t = 5, conflicts_with = "no_eviction")]
    keep_recent: usize,
    /// Keep every tool result in full.
    #[arg(long)]
    no_eviction: bool,
    #[arg(long, default_value_t = 128_000)]
    max_tokens: usize,
    /// Ask once more for a boxed answer when the model stops without one.
    #[arg(long)]
    final_summary: bool,
}

impl PolicyArgs {
    fn config(&self) -> Result<AgentConfig, CliError> {
        let k = (!self.no_eviction).then_some(self.keep_recent);
        let policy = ContextPolicy::new(self.max_turns, k, self.max_tokens).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(AgentConfig::with_policy(ContextPolicy {
            final_summary: self.final_summary,
            ..policy
        }))
    }
}

#[derive(Subcommand)]
enum AgentCmd {
    Run {
        #[arg(long)]
        question: String,
        #[arg(long = "image-url")]
        image_url: Vec<String>,
        #[arg(long, default_value = "task")]
        task_id: String,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Append the trajectory here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Extract a seed (entity, image, clue) from a page.
    Seed {
        #[arg(long)]
        page_url: String,
        /// JSON list of canned extractor replies.
        #[arg(long)]
        chat_script: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grow and fuzz a knowledge graph around the seed entity.
    Graph {
        #[arg(long)]
        seed_file: PathBuf,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        rng_seed: u64,
        /// Directory of entity attribute files.
        #[arg(long)]
        knowledge: PathBuf,
        /// Candidate-count table; the model judge is used when absent.
        #[arg(long)]
        counts: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        max_per_node: usize,
        #[arg(long, default_value_t = 3)]
        max_depth: u32,
        #[arg(long, default_value_t = 1)]
        degree_threshold: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a subgraph and write the single- and multi-hop questions.
    Question {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        seed_file: PathBuf,
        #[arg(long, default_value_t = 2)]
        max_hops: usize,
        #[arg(long, conflicts_with = "leaf_query")]
        leaf_image: Option<String>,
        #[arg(long)]
        leaf_query: Option<String>,
        /// JSON list of canned composer replies (single-hop first).
        #[arg(long)]
        chat_script: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct CriteriaArgs {
    #[arg(long, default_value_t = 40)]
    max_turns: usize,
    #[arg(long, default_value_t = 64_000)]
    max_context: usize,
    /// Count model calls instead of tool results as turns.
    #[arg(long)]
    count_model_calls: bool,
}

impl CriteriaArgs {
    fn criteria(&self) -> Result<FilterCriteria, CliError> {
        let mut c = FilterCriteria::new(self.max_turns, self.max_context).map_err(|e| CliError::Usage(e.to_string()))?;
        if self.count_model_calls {
            c.turn_count = TurnCount::ModelCalls;
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum DataCmd {
    /// Drop items the judge answers without search.
    Prefilter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep correct trajectories within the bounds.
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        criteria: CriteriaArgs,
    },
    /// Filter and write sft.jsonl + assets_manifest.json.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        criteria: CriteriaArgs,
    },
    /// Per-source counts and turn statistics.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    Run {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long, default_value_t = 4)]
        parallel: usize,
        /// Grade with the model endpoint instead of normalized matching.
        #[arg(long)]
        judge: bool,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Scaling {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60,70,80,90,100")]
        thresholds: Vec<u32>,
    },
}

fn rt(e: impl std::fmt::Display) -> CliError {
    CliError::runtime(e)
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(rt)?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn append_line(path: &Path, line: &str) -> Result<(), CliError> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    writeln!(f, "{line}").map_err(rt)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let raw = std::fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&raw).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn grader(judge: bool) -> Result<Box<dyn Grader>, CliError> {
    if judge {
        Ok(Box::new(ChatGrader::new(chat_client(None)?)))
    } else {
        Ok(Box::new(NormalizedMatch))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let replay = cli.replay.as_deref();
    match cli.command {
        Command::Agent(AgentCmd::Run {
            question,
            image_url,
            task_id,
            policy,
            out,
        }) => {
            let config = policy.config()?;
            let env = Runtime::open(&cli.store, replay)?;
            let inputs = ingest_images(&env.store, env.images.as_ref(), &image_url).map_err(CliError::Runtime)?;
            let agent = Agent::new(env.model_for(&task_id)?, env.registry.clone(), env.store.clone(), config);
            let traj = agent.run_task(&task_id, &question, &inputs).map_err(rt)?;
            let line = traj.to_json_line();
            match out {
                Some(path) => append_line(&path, &line)?,
                None => println!("{line}"),
            }
            eprintln!(
                "terminated_by={:?} turns={} answer={}",
                traj.terminated_by,
                traj.turns_used,
                traj.final_answer.as_deref().unwrap_or("(none)")
            );
        }
        Command::Scrape { url, extract } => {
            let env = Runtime::open(&cli.store, replay)?;
            let call = ToolCall::new("scrape_website", json!({"url": url, "info_to_extract": extract}));
            let result = env.registry.dispatch(&call, 0);
            println!("{}", result.text);
            if result.is_error {
                return Err(CliError::Runtime("scrape failed".into()));
            }
        }
        Command::Synth(cmd) => synth(cmd, &cli.store, replay)?,
        Command::Data(cmd) => data(cmd, &cli.store, replay)?,
        Command::Merge {
            a,
            b,
            alpha,
            key_filter,
            out,
        } => {
            let spec = deepsearch_merge::MergeSpec::new(alpha)
                .and_then(|s| s.with_key_filter(&key_filter))
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let v = deepsearch_merge::load(&a).map_err(rt)?;
            let t = deepsearch_merge::load(&b).map_err(rt)?;
            let merged = deepsearch_merge::interpolate(&v, &t, &spec).map_err(rt)?;
            let shared = v.keys().filter(|k| t.contains_key(*k) && spec.accepts(k)).count();
            deepsearch_merge::save(&out, &merged).map_err(rt)?;
            eprintln!("merged {shared} of {} keys into {}", merged.len(), out.display());
        }
        Command::Eval(EvalCmd::Run {
            bench,
            parallel,
            judge,
            policy,
            out,
        }) => {
            let config = policy.config()?;
            let items = eval::read_items(&bench).map_err(rt)?;
            let env = Runtime::open(&cli.store, replay)?;
            let grader = grader(judge)?;
            let harness = Harness {
                registry: env.registry.clone(),
                store: env.store.clone(),
                images: env.images.clone(),
                config,
                grader: grader.as_ref(),
                parallel,
            };
            let models = |item: &BenchItem| env.model_for(&item.item_id).map_err(|e| e.to_string());
            let records = harness.run_benchmark(&items, &models).map_err(rt)?;
            let text = eval::records_jsonl(&records);
            match out {
                Some(path) => write_file(&path, &text)?,
                None => print!("{text}"),
            }
            eprintln!("success rate: {:.1}", eval::success_rate(&records));
        }
        Command::Eval(EvalCmd::Scaling { records, thresholds }) => {
            if thresholds.contains(&0) {
                return Err(CliError::Usage("thresholds must be positive".into()));
            }
            let records = eval::read_records(&records).map_err(rt)?;
            let curve = eval::scaling_curve(&records, &thresholds);
            println!("{}", serde_json::to_string(&curve).map_err(rt)?);
        }
    }
    Ok(())
}

fn synth(cmd: SynthCmd, store: &Path, replay: Option<&Path>) -> Result<(), CliError> {
    let prompts = Prompts::default();
    match cmd {
        SynthCmd::Seed {
            page_url,
            chat_script,
            out,
        } => {
            let env = Runtime::open(store, replay)?;
            let extractor = chat_client(chat_script.as_deref())?;
            let seed = extract_seed(&page_url, env.pages.as_ref(), &env.middleware, extractor.as_ref(), &prompts).map_err(rt)?;
            write_file(&out, &serde_json::to_string_pretty(&seed).map_err(rt)?)?;
            eprintln!("seed entity: {}", seed.core_entity);
        }
        SynthCmd::Graph {
            seed_file,
            steps,
            rng_seed,
            knowledge,
            counts,
            max_per_node,
            max_depth,
            degree_threshold,
            out,
        } => {
            let seed: QuerySeed = read_json(&seed_file)?;
            let source = FixtureSource::new(knowledge);
            let judge: Box<dyn IrreversibilityJudge> = match counts {
                Some(path) => Box::new(CandidateCountOracle::load(&path).map_err(rt)?),
                None => Box::new(ChatJudge::new(chat_client(None)?)),
            };
            let filter = DensityDepthFilter {
                max_per_node,
                max_depth,
            };
            let mut graph = KnowledgeGraph::new(seed.core_entity.clone(), rng_seed);
            let taken = graph.expand_all(&source, &filter, judge.as_ref(), steps).map_err(rt)?;
            let report = fuzzify(&mut graph, &source, degree_threshold);
            graph.save(&out).map_err(rt)?;
            eprintln!(
                "{taken} steps, {} nodes, {} edges, {} fuzzed, {} skipped",
                graph.nodes.len(),
                graph.edges.len(),
                report.fuzzed.len(),
                report.skipped.len()
            );
        }
        SynthCmd::Question {
            graph,
            seed_file,
            max_hops,
            leaf_image,
            leaf_query,
            chat_script,
            out,
        } => {
            let seed: QuerySeed = read_json(&seed_file)?;
            let mut g = KnowledgeGraph::load(&graph).map_err(rt)?;
            let composer = chat_client(chat_script.as_deref())?;
            let q0 = synthesize_single_hop(&seed, composer.as_ref(), &prompts).map_err(rt)?;
            let sub = sample_subgraph(&mut g, max_hops);
            // persist the advanced generator so the next sample differs
            g.save(&graph).map_err(rt)?;
            let mut questions = vec![q0.clone()];
            if sub.edges.is_empty() {
                eprintln!("graph has no edges; wrote the single-hop question only");
            } else {
                let leaf = match (leaf_image, leaf_query) {
                    (Some(uid), _) => LeafImage::Asset(deepsearch_core::AssetId::new(uid).map_err(|e| CliError::Usage(e.to_string()))?),
                    (None, Some(q)) => LeafImage::Query(q),
                    (None, None) => {
                        let name = &sub.nodes[&sub.marked_leaf.expect("sampled")].entity;
                        LeafImage::Query(name.clone())
                    }
                };
                let env = Runtime::open(store, replay)?;
                let leaf_uid = resolve_leaf_image(&leaf, &env.store, env.search.as_ref(), env.images.as_ref()).map_err(rt)?;
                questions.push(compose_multihop(&seed, &q0, &sub, &leaf_uid, composer.as_ref(), &prompts).map_err(rt)?);
            }
            write_questions(&out, &questions).map_err(rt)?;
            eprintln!("wrote {} question(s) to {}", questions.len(), out.display());
        }
    }
    Ok(())
}

fn data(cmd: DataCmd, store: &Path, replay: Option<&Path>) -> Result<(), CliError> {
    match cmd {
        DataCmd::Prefilter { input, out } => {
            let items = eval::read_items(&input).map_err(rt)?;
            let env = Runtime::open(store, replay)?;
            let shared: Option<Arc<dyn ModelClient>> = if replay.is_none() { Some(live_model()?) } else { None };
            let mut kept = String::new();
            for item in &items {
                let judge = match &shared {
                    Some(m) => m.clone(),
                    None => env.model_for(&item.item_id)?,
                };
                let keep = match ingest_images(&env.store, env.images.as_ref(), &item.input_image_urls) {
                    Ok(images) => prefilter_query(&item.question, &images, &item.gold_answer, &env.store, judge.as_ref(), &NormalizedMatch),
                    Err(e) => {
                        tracing::warn!(item = %item.item_id, error = %e, "keeping item with unreadable images");
                        true
                    }
                };
                if keep {
                    kept.push_str(&serde_json::to_string(item).map_err(rt)?);
                    kept.push('\n');
                }
            }
            write_file(&out, &kept)?;
            eprintln!("kept {} of {}", kept.lines().count(), items.len());
        }
        DataCmd::Filter {
            input,
            manifest,
            out,
            criteria,
        } => {
            let criteria = criteria.criteria()?;
            let manifest = Manifest::load(&manifest).map_err(rt)?;
            let trajs = read_trajectories(&input).map_err(rt)?;
            let kept: Vec<String> = trajs
                .iter()
                .filter(|t| {
                    manifest
                        .label(&t.task_id)
                        .is_some_and(|l| rejection_filter(t, &l.gold_answer, &NormalizedMatch, &criteria))
                })
                .map(|t| t.to_json_line() + "\n")
                .collect();
            write_file(&out, &kept.concat())?;
            eprintln!("kept {} of {}", kept.len(), trajs.len());
        }
        DataCmd::Export {
            input,
            manifest,
            out,
            criteria,
        } => {
            let criteria = criteria.criteria()?;
            let manifest = Manifest::load(&manifest).map_err(rt)?;
            let trajs = read_trajectories(&input).map_err(rt)?;
            let store = deepsearch_core::AssetStore::open(store).map_err(rt)?;
            let (_, summary) = export_dataset(&trajs, &manifest, &store, &NormalizedMatch, &criteria, &out).map_err(rt)?;
            eprintln!("{}", serde_json::to_string(&summary).map_err(rt)?);
        }
        DataCmd::Stats { input, manifest, out } => {
            let records = read_sft(&input).map_err(rt)?;
            let stats = compute_stats(&records).map_err(rt)?;
            let order = match manifest {
                Some(path) => Manifest::load(&path).map_err(rt)?.source_order(),
                None => Vec::new(),
            };
            let mut order = order;
            for s in stats.per_source.keys() {
                if !order.contains(s) {
                    order.push(s.clone());
                }
            }
            if let Some(path) = out {
                write_file(&path, &serde_json::to_string_pretty(&stats).map_err(rt)?)?;
            }
            print!("{}", render_table(&stats, &order));
        }
    }
    Ok(())
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
