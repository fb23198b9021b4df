//! Exploration-based protocols: no location state, queries search the network.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::ProtocolError;
use crate::net::{ChangeNotice, Network, NodeId};
use crate::proto::{DataId, ReconfigTrace};

mod flood;
mod walk;

pub use flood::Flooding;
pub use walk::RandomWalk;

/// One exploration request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExploreQuery {
    pub query_id: u64,
    pub data: DataId,
    pub ttl: u32,
    /// Ignored by flooding.
    pub walkers: u32,
}

/// Per-node record of queries already forwarded.
#[derive(Clone, Debug, Default)]
pub struct SeenSet {
    seen: BTreeMap<NodeId, BTreeSet<u64>>,
}

impl SeenSet {
    /// Returns false when `node` had already seen `query`.
    pub fn insert(&mut self, node: NodeId, query: u64) -> bool {
        self.seen.entry(node).or_default().insert(query)
    }

    pub fn contains(&self, node: NodeId, query: u64) -> bool {
        self.seen.get(&node).is_some_and(|s| s.contains(&query))
    }

    /// Drops a finished query everywhere.
    pub fn forget(&mut self, query: u64) {
        for s in self.seen.values_mut() {
            s.remove(&query);
        }
    }

    pub fn nodes_seen(&self, query: u64) -> usize {
        self.seen.values().filter(|s| s.contains(&query)).count()
    }
}

/// Where each object lives; exploration protocols keep nothing else.
#[derive(Clone, Debug, Default)]
pub(crate) struct Holdings {
    placed: BTreeMap<DataId, NodeId>,
}

impl Holdings {
    pub(crate) fn get(&self, data: &DataId) -> Option<NodeId> {
        self.placed.get(data).copied()
    }

    pub(crate) fn insert(&mut self, data: DataId, node: NodeId) -> Result<(), ProtocolError> {
        if self.placed.contains_key(&data) {
            return Err(ProtocolError::DuplicateData(data.to_string()));
        }
        self.placed.insert(data, node);
        Ok(())
    }

    pub(crate) fn relocate(&mut self, data: &DataId, to: NodeId) -> Result<(), ProtocolError> {
        match self.placed.get_mut(data) {
            Some(v) => {
                *v = to;
                Ok(())
            }
            None => Err(ProtocolError::UnknownData(data.to_string())),
        }
    }

    pub(crate) fn on_change(&mut self, notice: &ChangeNotice) -> ReconfigTrace {
        if let ChangeNotice::Left { node, .. } = notice {
            self.placed.retain(|_, v| v != node);
        }
        ReconfigTrace::default()
    }
}

pub(crate) fn default_origin(net: &Network) -> Result<NodeId, ProtocolError> {
    net.topology().nodes().next().ok_or(ProtocolError::Unsupported("empty network"))
}
