//! `medkg` — build confidence-scored knowledge graphs from agent+search
//! pipelines, ingest corpora into a vector index, answer multiple-choice
//! questions by confidence-propagating graph traversal, and evaluate the
//! graph mode against retrieval baselines.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "medkg", version, about = "Confidence-scored knowledge graphs for question answering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub(crate) struct AgentArgs {
    /// Scripted mock agent file (offline runs)
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Chat-completion endpoint URL (live runs)
    #[arg(long)]
    agent_endpoint: Option<String>,
    /// Model name sent to the agent endpoint
    #[arg(long, default_value = "gpt-4o-mini")]
    agent_model: String,
    /// Environment variable holding the bearer token
    #[arg(long, default_value = "MEDKG_AGENT_TOKEN")]
    agent_token_env: String,
}

#[derive(Debug, Clone, clap::Args)]
pub(crate) struct SearchArgs {
    /// Knowledge source for descriptions
    #[arg(long, default_value = "fixture")]
    source: String,
    /// Directory of fixture files (source = fixture)
    #[arg(long)]
    fixture_dir: Option<PathBuf>,
    /// Base URL of the search API (source = pubmed|wiki)
    #[arg(long)]
    search_endpoint: Option<String>,
    /// Cache TTL in seconds
    #[arg(long, default_value_t = 3600)]
    cache_ttl: u64,
    /// Outbound requests allowed per minute (live sources)
    #[arg(long, default_value_t = 60)]
    rate_limit: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Chunk, embed, and index a plain-text corpus
    Ingest {
        /// Directory of plain-text files
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 512)]
        chunk_size: usize,
        #[arg(long, default_value_t = 100)]
        overlap: usize,
        /// Chunks per embedding batch
        #[arg(long, default_value_t = 10_000)]
        batch: usize,
        /// Index file to create or update
        #[arg(long)]
        index: PathBuf,
        /// Processed-file log (defaults to <index>.log)
        #[arg(long)]
        log: Option<PathBuf>,
        /// Embedding dimension for a fresh index
        #[arg(long, default_value_t = 64)]
        dimension: usize,
    },
    /// Build or grow a knowledge graph from a file of queries
    BuildKg {
        #[command(flatten)]
        search: SearchArgs,
        /// File with one query per line
        #[arg(long)]
        queries: PathBuf,
        /// Quality threshold on the 1-10 scale
        #[arg(long, default_value_t = 8)]
        threshold: u8,
        /// Output graph file (portable format)
        #[arg(long)]
        out: PathBuf,
        /// Grow an existing graph file instead of starting empty
        #[arg(long)]
        seed_graph: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        term_cap: usize,
        /// Pair selection: query-local or all-pairs
        #[arg(long, default_value = "query-local")]
        pairing: String,
        /// Search hits concatenated into each node description
        #[arg(long, default_value_t = 3)]
        top_n: usize,
        /// Optional file for below-threshold judgments (JSON lines)
        #[arg(long)]
        rejected_out: Option<PathBuf>,
        #[command(flatten)]
        agents: AgentArgs,
    },
    /// Answer one question against a graph file
    Ask {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        question: String,
        /// Propagated-confidence threshold in [0, 1]
        #[arg(long, default_value_t = 0.8)]
        tau: f64,
        /// Evidence cap per question
        #[arg(long, default_value_t = 10)]
        max_docs: usize,
        /// bfs or dfs
        #[arg(long, default_value = "bfs")]
        strategy: String,
        #[arg(long, default_value_t = 4)]
        max_depth: usize,
        /// Options as label=text pairs, e.g. -o A=Nifedipine -o C=Clopidogrel
        #[arg(short = 'o', long = "option")]
        options: Vec<String>,
        #[command(flatten)]
        agents: AgentArgs,
    },
    /// Evaluate a mode over a line-delimited dataset
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// amg-rag | rag | rag-cot | rag-search
        #[arg(long)]
        mode: String,
        /// Report output (JSON)
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0.8)]
        tau: f64,
        #[arg(long, default_value_t = 10)]
        max_docs: usize,
        #[arg(long, default_value = "bfs")]
        strategy: String,
        #[arg(long, default_value_t = 4)]
        max_depth: usize,
        /// External snippets unioned into rag-search evidence
        #[arg(long, default_value_t = 2)]
        m_external: usize,
        /// Plot-ready confusion matrix (CSV)
        #[arg(long)]
        matrix_out: Option<PathBuf>,
        /// Per-item answer records (JSON lines, append-only)
        #[arg(long)]
        records_out: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        agents: AgentArgs,
    },
    /// Re-serialize a graph file
    Export {
        #[arg(long)]
        graph: PathBuf,
        /// portable or cypher
        #[arg(long, default_value = "cypher")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { corpus, chunk_size, overlap, batch, index, log, dimension } => {
            commands::ingest(&corpus, chunk_size, overlap, batch, &index, log.as_deref(), dimension)
        }
        Command::BuildKg {
            search,
            queries,
            threshold,
            out,
            seed_graph,
            term_cap,
            pairing,
            top_n,
            rejected_out,
            agents,
        } => commands::build_kg(
            &search,
            &queries,
            threshold,
            &out,
            seed_graph.as_deref(),
            term_cap,
            &pairing,
            top_n,
            rejected_out.as_deref(),
            &agents,
        ),
        Command::Ask { graph, question, tau, max_docs, strategy, max_depth, options, agents } => {
            commands::ask(&graph, &question, tau, max_docs, &strategy, max_depth, &options, &agents)
        }
        Command::Eval {
            dataset,
            mode,
            report,
            graph,
            index,
            k,
            tau,
            max_docs,
            strategy,
            max_depth,
            m_external,
            matrix_out,
            records_out,
            search,
            agents,
        } => commands::eval(commands::EvalArgs {
            dataset: &dataset,
            mode: &mode,
            report: &report,
            graph: graph.as_deref(),
            index: index.as_deref(),
            k,
            tau,
            max_docs,
            strategy: &strategy,
            max_depth,
            m_external,
            matrix_out: matrix_out.as_deref(),
            records_out: records_out.as_deref(),
            search: &search,
            agents: &agents,
        }),
        Command::Export { graph, format, out } => commands::export(&graph, &format, &out),
    };
    if let Err(error) = result {
        eprintln!("error: {error:#}");
        std::process::exit(1);
    }
}

