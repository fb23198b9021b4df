//! The contract every data location protocol implements.

use std::fmt;
use std::str::FromStr;

use crate::error::ProtocolError;
use crate::net::{Change, ChangeNotice, MsgKind, Network, NodeId, OpStats, Outgoing};

/// User-chosen name of a piece of data.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DataId(String);

impl DataId {
    pub fn new(name: impl Into<String>) -> Result<Self, ProtocolError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ProtocolError::EmptyName);
        }
        Ok(DataId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl fmt::Display for DataId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacementRequest {
    pub data: DataId,
    pub preferred_node: Option<NodeId>,
}

impl PlacementRequest {
    pub fn new(data: DataId, preferred_node: Option<NodeId>) -> Self {
        PlacementRequest { data, preferred_node }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NameAfterMove {
    Stable,
    Changes,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacementOutcome {
    /// The name under which the data can be located from now on.
    pub name: DataId,
    pub stored_at: NodeId,
    pub name_accepted: bool,
    pub placement_honored: bool,
    pub name_after_move: NameAfterMove,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LookupTrace {
    /// Request messages sent over the network. Local table reads are free.
    pub requests: u64,
    pub links_used: u64,
    /// Protocol-level forwarding steps (overlay hops, referrals, walk steps).
    pub hops: u64,
    /// Every message attributed to the lookup, replies included.
    pub messages: u64,
    pub success: bool,
    pub resolved_at: Option<NodeId>,
}

impl LookupTrace {
    pub fn local(node: NodeId) -> Self {
        LookupTrace { success: true, resolved_at: Some(node), ..Default::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReconfigTrace {
    pub messages: u64,
    pub links_used: u64,
    pub tables_updated: u64,
    pub records_moved: u64,
    pub manual_intervention: bool,
}

impl ReconfigTrace {
    pub fn manual() -> Self {
        ReconfigTrace { manual_intervention: true, ..Default::default() }
    }

    pub fn absorb(&mut self, other: &ReconfigTrace) {
        self.messages += other.messages;
        self.links_used += other.links_used;
        self.tables_updated += other.tables_updated;
        self.records_moved += other.records_moved;
        self.manual_intervention |= other.manual_intervention;
    }
}

/// Location state currently held by the protocol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TableStats {
    /// Largest number of entries held by any single node.
    pub max_table_size: usize,
    /// Nodes holding a non-empty table.
    pub table_count: usize,
}

impl TableStats {
    pub fn from_sizes(sizes: impl IntoIterator<Item = usize>) -> Self {
        let mut stats = TableStats::default();
        for s in sizes {
            stats.max_table_size = stats.max_table_size.max(s);
            if s > 0 {
                stats.table_count += 1;
            }
        }
        stats
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtocolKind {
    Central,
    Gossip,
    Dns,
    IpRouting,
    Dht,
    ConsistentHashing,
    Flooding,
    RandomWalk,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 8] = [
        ProtocolKind::Central,
        ProtocolKind::Gossip,
        ProtocolKind::Dns,
        ProtocolKind::IpRouting,
        ProtocolKind::Dht,
        ProtocolKind::ConsistentHashing,
        ProtocolKind::Flooding,
        ProtocolKind::RandomWalk,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ProtocolKind::Central => "central",
            ProtocolKind::Gossip => "gossip",
            ProtocolKind::Dns => "dns",
            ProtocolKind::IpRouting => "ip-routing",
            ProtocolKind::Dht => "dht",
            ProtocolKind::ConsistentHashing => "consistent-hashing",
            ProtocolKind::Flooding => "flooding",
            ProtocolKind::RandomWalk => "random-walk",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ProtocolKind::Central => "Central server",
            ProtocolKind::Gossip => "Gossip",
            ProtocolKind::Dns => "Domain Name System",
            ProtocolKind::IpRouting => "IP routing",
            ProtocolKind::Dht => "Distributed hash table",
            ProtocolKind::ConsistentHashing => "Consistent hashing",
            ProtocolKind::Flooding => "Flooding",
            ProtocolKind::RandomWalk => "Random walk",
        }
    }

    pub fn family(self) -> &'static str {
        match self {
            ProtocolKind::Central | ProtocolKind::Gossip | ProtocolKind::Dns | ProtocolKind::IpRouting => {
                "directory"
            }
            ProtocolKind::Dht | ProtocolKind::ConsistentHashing => "hash",
            ProtocolKind::Flooding | ProtocolKind::RandomWalk => "exploration",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "central" | "central-server" => ProtocolKind::Central,
            "gossip" => ProtocolKind::Gossip,
            "dns" => ProtocolKind::Dns,
            "ip-routing" | "ip" | "embedded" => ProtocolKind::IpRouting,
            "dht" | "chord" => ProtocolKind::Dht,
            "consistent-hashing" | "ch" => ProtocolKind::ConsistentHashing,
            "flooding" | "flood" => ProtocolKind::Flooding,
            "random-walk" | "walk" => ProtocolKind::RandomWalk,
            other => return Err(format!("unknown protocol `{other}`")),
        })
    }
}

/// A protocol bound to a simulated network.
pub trait Protocol {
    fn kind(&self) -> ProtocolKind;

    fn network(&self) -> &Network;

    fn network_mut(&mut self) -> &mut Network;

    /// Name a workload should use for its `index`-th object when it wants the
    /// protocol's preferred naming scheme.
    fn conventional_name(&self, base: &str, _index: usize) -> String {
        base.to_string()
    }

    fn store(&mut self, req: PlacementRequest) -> Result<PlacementOutcome, ProtocolError>;

    fn locate(&mut self, data: &DataId, origin: NodeId) -> Result<LookupTrace, ProtocolError>;

    /// Called after `notice`'s change has been applied to the topology.
    fn on_topology_change(&mut self, notice: &ChangeNotice) -> Result<ReconfigTrace, ProtocolError>;

    fn change(&mut self, change: Change) -> Result<(ChangeNotice, ReconfigTrace), ProtocolError> {
        let notice = self.network_mut().apply_change(change)?;
        let trace = self.on_topology_change(&notice)?;
        Ok((notice, trace))
    }

    /// Moves stored data to `to`; returns the name it must be located by afterwards.
    fn relocate(&mut self, data: &DataId, to: NodeId) -> Result<DataId, ProtocolError>;

    fn holder(&self, data: &DataId) -> Option<NodeId>;

    fn tables(&self) -> TableStats;

    /// Runs background dissemination to quiescence; returns the messages spent.
    fn settle(&mut self) -> Result<u64, ProtocolError> {
        Ok(0)
    }

    /// Operator action that brings a protocol without self-healing back in line
    /// with the current topology. No-op for protocols that reconfigure themselves.
    fn manual_update(&mut self) -> Result<ReconfigTrace, ProtocolError> {
        Ok(ReconfigTrace::default())
    }
}

pub(crate) fn require_live(net: &Network, node: NodeId) -> Result<(), ProtocolError> {
    if net.topology().contains(node) {
        Ok(())
    } else {
        Err(ProtocolError::NodeNotLive(node))
    }
}

/// Sends one payload-free message and waits for its delivery.
pub(crate) fn send_one(
    net: &mut Network,
    src: NodeId,
    dst: NodeId,
    kind: MsgKind,
) -> Result<OpStats, ProtocolError> {
    let op = net.begin_op();
    Ok(net.exchange(op, vec![Outgoing::new(src, dst, kind, ())], |_, _| {})?)
}
