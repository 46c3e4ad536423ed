//! Subcommand implementations.

use crate::{AgentArgs, SearchArgs};
use anyhow::{bail, Context, Result};
use medkg::agents::{AgentSuite, HttpAgent, ProviderConfig, ScriptedMock, Verdict};
use medkg::builder::{BuildConfig, Builder, Pairing};
use medkg::graph::{export_graph_to_path, import_graph_from_path, ExportFormat, GraphStore, KnowledgeGraph};
use medkg::ingest::{ingest_corpus, HashEmbedder, IndexSearcher, IngestLog, IngestOptions, VectorIndex, WhitespaceTokenizer};
use medkg::qa::{answer_amg_rag, evaluate, load_dataset, EvalDeps, EvalReport, Mode, QAItem};
use medkg::search::{
    CachedSearcher, PubmedStyleClient, RateLimiter, SearchCache, SearchClient, SearchHttpConfig, SearchSource,
    SystemClock, WikiStyleClient,
};
use medkg::traversal::{ExplorationConfig, Strategy};
use medkg::RawConfidence;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

fn make_agents(args: &AgentArgs) -> Result<Arc<dyn AgentSuite>> {
    if let Some(script) = &args.mock_script {
        let mock = ScriptedMock::from_path(script).with_context(|| format!("loading mock script {}", script.display()))?;
        return Ok(Arc::new(mock));
    }
    if let Some(endpoint) = &args.agent_endpoint {
        let mut config = ProviderConfig::new(endpoint.clone(), args.agent_model.clone());
        config.token_env = args.agent_token_env.clone();
        let agent = HttpAgent::new(config).context("building the HTTP agent")?;
        return Ok(Arc::new(agent));
    }
    bail!("choose an agent: --mock-script <file> for offline runs or --agent-endpoint <url>")
}

fn make_searcher(args: &SearchArgs) -> Result<Arc<CachedSearcher>> {
    let source: SearchSource = args.source.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
    let cache = SearchCache::new(Duration::from_secs(args.cache_ttl), Arc::new(SystemClock));
    let searcher = match source {
        SearchSource::Fixture => {
            let dir = args
                .fixture_dir
                .clone()
                .context("--source fixture needs --fixture-dir <dir>")?;
            CachedSearcher::new(Box::new(medkg::search::FixtureSource::new(dir)), cache, None)
        }
        SearchSource::Pubmed | SearchSource::Wiki => {
            let endpoint = args
                .search_endpoint
                .clone()
                .context("--source pubmed|wiki needs --search-endpoint <url>")?;
            let config = SearchHttpConfig::new(endpoint);
            let client: Box<dyn SearchClient> = match source {
                SearchSource::Pubmed => Box::new(PubmedStyleClient::new(config).map_err(|e| anyhow::anyhow!("{e}"))?),
                _ => Box::new(WikiStyleClient::new(config).map_err(|e| anyhow::anyhow!("{e}"))?),
            };
            let limiter = RateLimiter::new(args.rate_limit, Duration::from_secs(60), Arc::new(SystemClock));
            CachedSearcher::new(client, cache, Some(limiter))
        }
    };
    Ok(Arc::new(searcher))
}

fn explore_config(tau: f64, max_docs: usize, strategy: &str, max_depth: usize) -> Result<ExplorationConfig<f64>> {
    let strategy: Strategy = strategy.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
    ExplorationConfig::new(tau, max_docs, strategy, max_depth).map_err(|e| anyhow::anyhow!("{e}"))
}

pub fn ingest(
    corpus: &Path,
    chunk_size: usize,
    overlap: usize,
    batch: usize,
    index_path: &Path,
    log_path: Option<&Path>,
    dimension: usize,
) -> Result<()> {
    let default_log = index_path.with_extension("log");
    let log_path = log_path.unwrap_or(&default_log);
    let mut index = if index_path.exists() {
        VectorIndex::<f64>::load(index_path).map_err(|e| anyhow::anyhow!("{e}"))?
    } else {
        VectorIndex::new(dimension)
    };
    let embedder = HashEmbedder::<f64>::new(index.dimension());
    let mut log = IngestLog::load(log_path).map_err(|e| anyhow::anyhow!("{e}"))?;
    let options = IngestOptions { max_tokens: chunk_size, overlap, batch_size: batch };
    let report = ingest_corpus(corpus, &options, &WhitespaceTokenizer, &embedder, &mut index, &mut log)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    index.save(index_path).map_err(|e| anyhow::anyhow!("{e}"))?;
    log.save(log_path).map_err(|e| anyhow::anyhow!("{e}"))?;
    log::debug!("log written to {}", log_path.display());
    println!(
        "ingested {} files ({} chunks), skipped {} unchanged, {} failures; index now holds {} entries",
        report.processed,
        report.chunks_indexed,
        report.skipped,
        report.failures.len(),
        index.len()
    );
    for (path, reason) in &report.failures {
        eprintln!("  failed: {path}: {reason}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn build_kg(
    search: &SearchArgs,
    queries_path: &Path,
    threshold: u8,
    out: &Path,
    seed_graph: Option<&Path>,
    term_cap: usize,
    pairing: &str,
    top_n: usize,
    rejected_out: Option<&Path>,
    agents: &AgentArgs,
) -> Result<()> {
    let queries = std::fs::read_to_string(queries_path)
        .with_context(|| format!("reading queries from {}", queries_path.display()))?;
    let queries: Vec<&str> = queries.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if queries.is_empty() {
        bail!("no queries in {}", queries_path.display());
    }
    let pairing = match pairing {
        "query-local" => Pairing::QueryLocal,
        "all-pairs" => Pairing::AllPairs,
        other => bail!("unknown pairing '{other}' (expected query-local|all-pairs)"),
    };
    let config = BuildConfig {
        quality_threshold: RawConfidence::new(threshold).map_err(|e| anyhow::anyhow!("{e}"))?,
        pairing,
        term_cap,
        top_n,
    };

    let initial = match seed_graph {
        Some(path) => import_graph_from_path(path).map_err(|e| anyhow::anyhow!("{e}"))?,
        None => KnowledgeGraph::new(),
    };
    let store = Arc::new(GraphStore::new(initial));
    let builder = Builder::new(make_agents(agents)?, make_searcher(search)?, store.clone());

    let mut rejected_file = match rejected_out {
        Some(path) => Some(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => None,
    };
    for query in queries {
        let delta = builder.build_for_query(query, &config).map_err(|e| anyhow::anyhow!("{e}"))?;
        println!(
            "query: {query}\n  nodes +{} ~{}  edges +{} ~{}  rejected {}  failures {}",
            delta.nodes_added,
            delta.nodes_updated,
            delta.edges_added,
            delta.edges_updated,
            delta.rejected.len(),
            delta.failures.len()
        );
        for failure in &delta.failures {
            eprintln!("  degraded [{}] {}: {}", failure.stage, failure.subject, failure.reason);
        }
        if let Some(file) = rejected_file.as_mut() {
            for pair in &delta.rejected {
                writeln!(file, "{}", serde_json::to_string(pair)?)?;
            }
        }
    }

    let graph = store.snapshot();
    export_graph_to_path(&graph, ExportFormat::Portable, out).map_err(|e| anyhow::anyhow!("{e}"))?;
    println!("graph written to {}: {} nodes, {} edges", out.display(), graph.node_count(), graph.edge_count());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn ask(
    graph_path: &Path,
    question: &str,
    tau: f64,
    max_docs: usize,
    strategy: &str,
    max_depth: usize,
    options: &[String],
    agents: &AgentArgs,
) -> Result<()> {
    let graph = import_graph_from_path(graph_path).map_err(|e| anyhow::anyhow!("{e}"))?;
    let config = explore_config(tau, max_docs, strategy, max_depth)?;
    let agent = make_agents(agents)?;

    let mut parsed_options = BTreeMap::new();
    for option in options {
        let (label, text) = option
            .split_once('=')
            .with_context(|| format!("option '{option}' is not label=text"))?;
        parsed_options.insert(label.trim().to_string(), text.trim().to_string());
    }
    if parsed_options.len() < 2 {
        bail!("provide at least two -o label=text options");
    }
    let item = QAItem {
        id: "cli".into(),
        question: question.to_string(),
        gold: parsed_options.keys().next().cloned().unwrap_or_default(),
        options: parsed_options,
        domain: None,
    };
    let record = answer_amg_rag(&item, &graph, &config, agent.as_ref()).map_err(|e| anyhow::anyhow!("{e}"))?;
    match &record.predicted {
        Verdict::Label(label) => println!("answer: {} ({})", label, item.options[label]),
        Verdict::Abstain => println!("answer: abstain"),
    }
    println!("confidence: {:.2}", record.confidence);
    if !record.rationale.is_empty() {
        println!("rationale: {}", record.rationale);
    }
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(())
}

pub struct EvalArgs<'a> {
    pub dataset: &'a Path,
    pub mode: &'a str,
    pub report: &'a Path,
    pub graph: Option<&'a Path>,
    pub index: Option<&'a Path>,
    pub k: usize,
    pub tau: f64,
    pub max_docs: usize,
    pub strategy: &'a str,
    pub max_depth: usize,
    pub m_external: usize,
    pub matrix_out: Option<&'a Path>,
    pub records_out: Option<&'a Path>,
    pub search: &'a SearchArgs,
    pub agents: &'a AgentArgs,
}

pub fn eval(args: EvalArgs<'_>) -> Result<()> {
    let mode: Mode = args.mode.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
    let (items, skipped) = load_dataset(args.dataset).map_err(|e| anyhow::anyhow!("{e}"))?;
    let agent = make_agents(args.agents)?;

    let graph = match args.graph {
        Some(path) => Some(import_graph_from_path(path).map_err(|e| anyhow::anyhow!("{e}"))?),
        None => None,
    };
    let retriever = match args.index {
        Some(path) => {
            let index = VectorIndex::<f64>::load(path).map_err(|e| anyhow::anyhow!("{e}"))?;
            let embedder = HashEmbedder::<f64>::new(index.dimension());
            Some(IndexSearcher::new(index, embedder))
        }
        None => None,
    };
    let searcher = if mode == Mode::RagSearch { Some(make_searcher(args.search)?) } else { None };

    let deps = EvalDeps {
        agents: agent.as_ref(),
        graph: graph.as_ref(),
        retriever: retriever.as_ref().map(|r| r as &dyn medkg::ingest::ChunkRetriever),
        searcher: searcher.as_deref(),
        explore: explore_config(args.tau, args.max_docs, args.strategy, args.max_depth)?,
        k: args.k,
        m_external: args.m_external,
    };
    let (report, records) = evaluate(&items, mode, &deps, &skipped).map_err(|e| anyhow::anyhow!("{e}"))?;

    std::fs::write(args.report, serde_json::to_vec_pretty(&report)?)
        .with_context(|| format!("writing report to {}", args.report.display()))?;
    if let Some(path) = args.matrix_out {
        std::fs::write(path, matrix_csv(&report)).with_context(|| format!("writing matrix to {}", path.display()))?;
    }
    if let Some(path) = args.records_out {
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        for record in &records {
            writeln!(file, "{}", serde_json::to_string(record)?)?;
        }
    }
    print_report(&report);
    Ok(())
}

fn matrix_csv(report: &EvalReport) -> String {
    let mut out = String::from("gold");
    for label in &report.confusion.labels {
        out.push_str(&format!(",{label}"));
    }
    out.push_str(",abstain\n");
    for (label, row) in report.confusion.labels.iter().zip(&report.confusion.matrix) {
        out.push_str(label);
        for count in row {
            out.push_str(&format!(",{count}"));
        }
        out.push('\n');
    }
    out
}

fn print_report(report: &EvalReport) {
    println!("mode: {}", report.mode);
    println!(
        "items: {}  correct: {}  abstained: {}  skipped: {}",
        report.total,
        report.correct,
        report.abstained,
        report.skipped.len()
    );
    println!("accuracy: {:.2}%  macro-F1: {:.2}%", report.accuracy * 100.0, report.macro_f1 * 100.0);
    if !report.per_domain.is_empty() {
        println!("per-domain:");
        for (domain, stats) in &report.per_domain {
            println!("  {:<24} {}/{} ({:.1}%)", domain, stats.correct, stats.total, stats.accuracy * 100.0);
        }
    }
    println!("confusion matrix (rows: gold, cols: predicted + abstain):");
    print!("{:>10}", "");
    for label in &report.confusion.labels {
        print!("{label:>8}");
    }
    println!("{:>8}", "abstain");
    for (label, row) in report.confusion.labels.iter().zip(&report.confusion.matrix) {
        print!("{label:>10}");
        for count in row {
            print!("{count:>8}");
        }
        println!();
    }
    for skip in &report.skipped {
        eprintln!("  skipped {}: {}", skip.id, skip.reason);
    }
}

pub fn export(graph_path: &Path, format: &str, out: &Path) -> Result<()> {
    let graph = import_graph_from_path(graph_path).map_err(|e| anyhow::anyhow!("{e}"))?;
    let format = match format {
        "portable" => ExportFormat::Portable,
        "cypher" => ExportFormat::Cypher,
        other => bail!("unknown format '{other}' (expected portable|cypher)"),
    };
    export_graph_to_path(&graph, format, out).map_err(|e| anyhow::anyhow!("{e}"))?;
    println!("wrote {} ({} nodes, {} edges)", out.display(), graph.node_count(), graph.edge_count());
    Ok(())
}
