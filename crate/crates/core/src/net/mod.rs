//! Deterministic network substrate shared by every protocol.

mod sim;
mod topology;
mod trace;

pub use sim::{
    Delivery, Network, Occurrence, OpStats, Outbox, Outgoing, SimConfig, SimEvent, SimEventKind,
    DEFAULT_EVENT_BUDGET,
};
pub use topology::{
    Address, BfsTree, Change, ChangeNotice, LinkId, NodeId, Topology, TopologyKind,
    DEFAULT_ADDRESS_WIDTH,
};
pub use trace::{MsgKind, OpId, TraceLog, TraceMode, TraceRecord};
