//! Snapshot store: single writer, many readers.
//!
//! Readers take an `Arc` snapshot of the current graph and keep working on it
//! for as long as they like; the builder publishes a fully constructed
//! replacement atomically. No reader ever observes a half-applied
//! forward/reverse pair because mutation happens only on the builder's
//! private clone.

use super::KnowledgeGraph;
use std::sync::{Arc, Mutex, MutexGuard};

#[derive(Debug)]
pub struct GraphStore {
    // a mutex around the Arc, held only for the pointer clone or swap, so a
    // publisher can never be starved by read traffic
    current: Mutex<Arc<KnowledgeGraph>>,
    build_lock: Mutex<()>,
}

impl GraphStore {
    pub fn new(graph: KnowledgeGraph) -> Self {
        Self { current: Mutex::new(Arc::new(graph)), build_lock: Mutex::new(()) }
    }

    /// The current immutable snapshot.
    pub fn snapshot(&self) -> Arc<KnowledgeGraph> {
        self.current.lock().expect("graph store lock poisoned").clone()
    }

    /// Atomically replaces the published graph and returns the new snapshot.
    pub fn publish(&self, graph: KnowledgeGraph) -> Arc<KnowledgeGraph> {
        let snapshot = Arc::new(graph);
        *self.current.lock().expect("graph store lock poisoned") = snapshot.clone();
        snapshot
    }

    /// Serializes builders: at most one build/refresh mutates per store.
    pub fn builder_guard(&self) -> MutexGuard<'_, ()> {
        self.build_lock.lock().expect("builder lock poisoned")
    }
}

impl Default for GraphStore {
    fn default() -> Self {
        Self::new(KnowledgeGraph::new())
    }
}
