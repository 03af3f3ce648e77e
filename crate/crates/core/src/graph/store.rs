use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;

use super::LinkGraph;

/// Holds the current graph snapshot. Readers load an `Arc` without locking;
/// writers are serialized and install a new snapshot in one atomic swap.
pub struct GraphStore {
    current: ArcSwap<LinkGraph>,
    writer: Mutex<()>,
}

impl GraphStore {
    pub fn new(graph: LinkGraph) -> Self {
        Self {
            current: ArcSwap::from_pointee(graph),
            writer: Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> Arc<LinkGraph> {
        self.current.load_full()
    }

    /// Runs `f` against the current snapshot while holding the writer lock.
    /// A returned graph is installed with the next version number; on error
    /// nothing changes.
    pub fn update<T, E>(
        &self,
        f: impl FnOnce(&LinkGraph) -> Result<(Option<LinkGraph>, T), E>,
    ) -> Result<T, E> {
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.current.load_full();
        let (next, out) = f(&current)?;
        if let Some(next) = next {
            self.current
                .store(Arc::new(next.with_version(current.version() + 1)));
        }
        Ok(out)
    }
}
