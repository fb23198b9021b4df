use std::collections::{BTreeMap, BTreeSet};

use crate::error::ProtocolError;
use crate::net::{Address, ChangeNotice, MsgKind, Network, NodeId, Outgoing};
use crate::proto::{
    require_live, DataId, LookupTrace, NameAfterMove, PlacementOutcome, PlacementRequest, Protocol,
    ProtocolKind, ReconfigTrace, TableStats,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Entry {
    pub address: Address,
    pub version: u64,
}

/// Every node keeps a full directory; neighbors reconcile in synchronous
/// push-pull rounds.
#[derive(Clone, Debug)]
pub struct GossipDirectory {
    net: Network,
    tables: BTreeMap<NodeId, BTreeMap<DataId, Entry>>,
    /// Entries each node learned or changed during the previous round.
    fresh: BTreeMap<NodeId, BTreeSet<DataId>>,
    /// Nodes whose neighbors must send their whole table next round.
    needs_full: BTreeSet<NodeId>,
    placed: BTreeMap<DataId, NodeId>,
    version: u64,
    rounds: u64,
    round_messages: u64,
}

impl GossipDirectory {
    pub fn new(net: Network) -> Self {
        let tables = net.topology().nodes().map(|v| (v, BTreeMap::new())).collect();
        GossipDirectory {
            net,
            tables,
            fresh: BTreeMap::new(),
            needs_full: BTreeSet::new(),
            placed: BTreeMap::new(),
            version: 0,
            rounds: 0,
            round_messages: 0,
        }
    }

    pub fn table(&self, node: NodeId) -> Option<&BTreeMap<DataId, Entry>> {
        self.tables.get(&node)
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn round_messages(&self) -> u64 {
        self.round_messages
    }

    pub fn is_quiescent(&self) -> bool {
        self.needs_full.is_empty() && self.fresh.values().all(|s| s.is_empty())
    }

    /// True when every live node holds the same entries.
    pub fn converged(&self) -> bool {
        let mut it = self.tables.values();
        match it.next() {
            Some(first) => it.all(|t| t == first),
            None => true,
        }
    }

    fn write_local(&mut self, node: NodeId, data: DataId) -> Result<(), ProtocolError> {
        let address = self.net.topology().address(node).ok_or(ProtocolError::NodeNotLive(node))?;
        self.version += 1;
        let entry = Entry { address, version: self.version };
        self.tables.entry(node).or_default().insert(data.clone(), entry);
        self.fresh.entry(node).or_default().insert(data);
        Ok(())
    }

    /// One synchronous anti-entropy round. Returns whether any table changed.
    pub fn round(&mut self) -> Result<bool, ProtocolError> {
        let edges: Vec<(NodeId, NodeId)> = self.net.topology().edges().map(|(a, b, _)| (a, b)).collect();
        let fresh = std::mem::take(&mut self.fresh);
        let needs_full = std::mem::take(&mut self.needs_full);
        let offer = |from: NodeId, to: NodeId| -> Vec<(DataId, Entry)> {
            let table = &self.tables[&from];
            if needs_full.contains(&to) {
                table.iter().map(|(k, e)| (k.clone(), *e)).collect()
            } else {
                fresh
                    .get(&from)
                    .map(|keys| keys.iter().filter_map(|k| table.get(k).map(|e| (k.clone(), *e))).collect())
                    .unwrap_or_default()
            }
        };
        let mut inbound: Vec<(NodeId, Vec<(DataId, Entry)>)> = Vec::new();
        let mut msgs = Vec::new();
        for &(a, b) in &edges {
            let to_b = offer(a, b);
            let to_a = offer(b, a);
            msgs.push(Outgoing::new(a, b, MsgKind::Control, ()).with_size(to_b.len() as u64));
            msgs.push(Outgoing::new(b, a, MsgKind::Control, ()).with_size(to_a.len() as u64));
            inbound.push((b, to_b));
            inbound.push((a, to_a));
        }
        let op = self.net.begin_op();
        let stats = self.net.exchange(op, msgs, |_, _| {})?;
        self.round_messages += stats.messages;
        self.rounds += 1;

        let mut changed = false;
        for (node, entries) in inbound {
            let table = self.tables.entry(node).or_default();
            for (key, entry) in entries {
                let newer = table.get(&key).is_none_or(|e| e.version < entry.version);
                if newer {
                    table.insert(key.clone(), entry);
                    self.fresh.entry(node).or_default().insert(key);
                    changed = true;
                }
            }
        }
        Ok(changed)
    }
}

impl Protocol for GossipDirectory {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Gossip
    }

    fn network(&self) -> &Network {
        &self.net
    }

    fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    fn store(&mut self, req: PlacementRequest) -> Result<PlacementOutcome, ProtocolError> {
        if self.placed.contains_key(&req.data) {
            return Err(ProtocolError::DuplicateData(req.data.to_string()));
        }
        let at = match req.preferred_node {
            Some(v) => v,
            None => self.net.topology().nodes().next().ok_or(ProtocolError::Unsupported("empty network"))?,
        };
        require_live(&self.net, at)?;
        self.write_local(at, req.data.clone())?;
        self.placed.insert(req.data.clone(), at);
        Ok(PlacementOutcome {
            name: req.data,
            stored_at: at,
            name_accepted: true,
            placement_honored: true,
            name_after_move: NameAfterMove::Stable,
        })
    }

    fn locate(&mut self, data: &DataId, origin: NodeId) -> Result<LookupTrace, ProtocolError> {
        require_live(&self.net, origin)?;
        let holder = self.placed.get(data).copied();
        if holder == Some(origin) {
            return Ok(LookupTrace::local(origin));
        }
        let resolved = self.tables[&origin].get(data).and_then(|e| self.net.topology().node_at(e.address));
        Ok(LookupTrace {
            success: resolved.is_some() && resolved == holder,
            resolved_at: resolved,
            ..Default::default()
        })
    }

    fn on_topology_change(&mut self, notice: &ChangeNotice) -> Result<ReconfigTrace, ProtocolError> {
        match notice {
            ChangeNotice::Joined { node, .. } => {
                self.tables.insert(*node, BTreeMap::new());
                self.needs_full.insert(*node);
                Ok(ReconfigTrace { tables_updated: 1, ..Default::default() })
            }
            ChangeNotice::Left { node, .. } => {
                self.tables.remove(node);
                self.fresh.remove(node);
                self.needs_full.remove(node);
                self.placed.retain(|_, v| v != node);
                Ok(ReconfigTrace::default())
            }
            ChangeNotice::Readdressed { node, .. } => {
                let own: Vec<DataId> =
                    self.placed.iter().filter(|(_, v)| *v == node).map(|(k, _)| k.clone()).collect();
                for data in own {
                    self.write_local(*node, data)?;
                }
                Ok(ReconfigTrace { tables_updated: 1, ..Default::default() })
            }
        }
    }

    fn relocate(&mut self, data: &DataId, to: NodeId) -> Result<DataId, ProtocolError> {
        require_live(&self.net, to)?;
        if !self.placed.contains_key(data) {
            return Err(ProtocolError::UnknownData(data.to_string()));
        }
        self.write_local(to, data.clone())?;
        self.placed.insert(data.clone(), to);
        Ok(data.clone())
    }

    fn holder(&self, data: &DataId) -> Option<NodeId> {
        self.placed.get(data).copied()
    }

    fn tables(&self) -> TableStats {
        TableStats::from_sizes(self.tables.values().map(|t| t.len()))
    }

    fn settle(&mut self) -> Result<u64, ProtocolError> {
        let before = self.round_messages;
        while !self.is_quiescent() {
            self.round()?;
        }
        Ok(self.round_messages - before)
    }
}
