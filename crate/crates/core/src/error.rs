use thiserror::Error;

use crate::net::{Address, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("topology needs at least one node")]
    Empty,
    #[error("unknown topology kind `{0}`")]
    UnknownKind(String),
    #[error("{n} nodes do not fit in a {width}-bit address space")]
    AddressSpace { n: usize, width: u8 },
    #[error("node {0} is not live")]
    UnknownNode(NodeId),
    #[error("duplicate link to node {0}")]
    DuplicateLink(NodeId),
    #[error("change would disconnect the network")]
    WouldDisconnect,
    #[error("address {0:?} is already held by another node")]
    AddressInUse(Address),
    #[error("address {0:?} does not fit the address width")]
    AddressOutOfRange(Address),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("event budget of {budget} exhausted (livelock guard)")]
    BudgetExhausted { budget: u64 },
    #[error("node {0} is not live")]
    UnknownNode(NodeId),
    #[error("no route from {from} to {to}")]
    Unreachable { from: NodeId, to: NodeId },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("data identifier must not be empty")]
    EmptyName,
    #[error("data `{0}` is already stored")]
    DuplicateData(String),
    #[error("data `{0}` is not stored")]
    UnknownData(String),
    #[error("node {0} is not live")]
    NodeNotLive(NodeId),
    #[error("`{0}` is not a location-embedded name (expected <address-bits>/<local-name>)")]
    BadEmbeddedName(String),
    #[error("no name placing `{name}` on node {node} found after {tries} trials")]
    NameSearchExhausted { name: String, node: NodeId, tries: u64 },
    #[error("{0}")]
    Unsupported(&'static str),
}

impl From<TopologyError> for ProtocolError {
    fn from(e: TopologyError) -> Self {
        ProtocolError::Sim(SimError::Topology(e))
    }
}
