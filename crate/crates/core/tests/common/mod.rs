//! Helpers shared by the integration and acceptance suites: fixture loading,
//! a canned HTTP responder, and seeded random graph generation.

#![allow(dead_code)]

use medkg::agents::ScriptedMock;
use medkg::builder::{BuildConfig, Builder};
use medkg::graph::{EntityNode, GraphStore, KnowledgeGraph, NodeId};
use medkg::qa::QAItem;
use medkg::search::CachedSearcher;
use medkg::RawConfidence;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_mock() -> ScriptedMock {
    ScriptedMock::from_path(&fixtures_dir().join("mkg_script.json")).expect("fixture mock script loads")
}

pub fn fixture_searcher() -> CachedSearcher {
    CachedSearcher::fixture(fixtures_dir().join("search"))
}

pub fn fixture_queries() -> Vec<String> {
    std::fs::read_to_string(fixtures_dir().join("queries.txt"))
        .expect("fixture queries load")
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect()
}

pub fn fixture_items() -> Vec<QAItem> {
    let (items, skipped) =
        medkg::qa::load_dataset(&fixtures_dir().join("qa_items.jsonl")).expect("fixture dataset loads");
    assert!(skipped.is_empty(), "fixture dataset has invalid lines: {skipped:?}");
    items
}

/// Builds the fixture graph from every scripted query and returns the store.
pub fn build_fixture_store() -> Arc<GraphStore> {
    let store = Arc::new(GraphStore::default());
    let builder = Builder::new(Arc::new(fixture_mock()), Arc::new(fixture_searcher()), store.clone());
    for query in fixture_queries() {
        let delta = builder.build_for_query(&query, &BuildConfig::default()).expect("fixture build succeeds");
        assert!(delta.failures.is_empty(), "fixture build degraded: {:?}", delta.failures);
    }
    store
}

/// Seeded random graph: `node_count` nodes, `edge_count` edge upserts with
/// rubric confidences drawn uniformly.
pub fn random_graph(rng: &mut ChaCha8Rng, node_count: usize, edge_count: usize) -> KnowledgeGraph {
    let mut graph = KnowledgeGraph::new();
    let ids: Vec<NodeId> = (0..node_count)
        .map(|i| {
            graph
                .upsert_node(EntityNode::new(&format!("n{i:03}"), &format!("entity {i}")).unwrap())
                .unwrap()
                .id
        })
        .collect();
    for _ in 0..edge_count {
        let a = rng.random_range(0..node_count);
        let b = rng.random_range(0..node_count);
        if a == b {
            continue;
        }
        let confidence = RawConfidence::new(rng.random_range(1..=10)).unwrap();
        graph.upsert_edge(&ids[a], &ids[b], "related", "", confidence).unwrap();
    }
    graph
}

pub fn node_id(i: usize) -> NodeId {
    NodeId::from_term(&format!("n{i:03}")).unwrap()
}

/// Canned HTTP/1.1 responder: serves `(status, body)` pairs in request
/// order, repeating the last. Returns the base URL and a request counter.
pub fn serve(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind test server");
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let hits_thread = hits.clone();
    std::thread::spawn(move || {
        let mut served = 0usize;
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            if read_request(&mut stream).is_none() {
                continue;
            }
            hits_thread.fetch_add(1, Ordering::SeqCst);
            let (status, body) =
                responses.get(served).or_else(|| responses.last()).cloned().unwrap_or((200, String::new()));
            served += 1;
            let reason = if status == 200 { "OK" } else { "ERR" };
            let reply = format!(
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });
    (format!("http://{addr}"), hits)
}

fn read_request(stream: &mut std::net::TcpStream) -> Option<String> {
    let mut buf = vec![0u8; 65536];
    let mut read = 0usize;
    let body_start = loop {
        match stream.read(&mut buf[read..]) {
            Ok(0) => return None,
            Ok(n) => {
                read += n;
                if let Some(pos) = buf[..read].windows(4).position(|w| w == b"\r\n\r\n") {
                    break pos + 4;
                }
                if read == buf.len() {
                    return None;
                }
            }
            Err(_) => return None,
        }
    };
    let headers = String::from_utf8_lossy(&buf[..body_start]).to_string();
    let content_length = headers
        .lines()
        .find_map(|l| {
            l.to_ascii_lowercase()
                .strip_prefix("content-length:")
                .map(|v| v.trim().parse::<usize>().unwrap_or(0))
        })
        .unwrap_or(0);
    while read < body_start + content_length {
        match stream.read(&mut buf[read..]) {
            Ok(0) => break,
            Ok(n) => read += n,
            Err(_) => break,
        }
    }
    Some(String::from_utf8_lossy(&buf[..read]).to_string())
}
