use std::collections::{BTreeMap, BTreeSet};

use super::chord::search_name;
use super::keyspace::{Key, Keyspace, Ring};
use crate::error::ProtocolError;
use crate::net::{Change, ChangeNotice, MsgKind, Network, NodeId, Outgoing};
use crate::proto::{
    require_live, DataId, LookupTrace, NameAfterMove, PlacementOutcome, PlacementRequest, Protocol,
    ProtocolKind, ReconfigTrace, TableStats,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pattern {
    Exact(DataId),
    Prefix(String),
}

impl Pattern {
    pub fn matches(&self, data: &DataId) -> bool {
        match self {
            Pattern::Exact(d) => d == data,
            Pattern::Prefix(p) => data.as_str().starts_with(p.as_str()),
        }
    }
}

/// Pins matching data to a target node, overriding the hash.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacementRule {
    pub pattern: Pattern,
    pub target: NodeId,
}

/// Consistent hashing where every node holds the full ring view.
#[derive(Clone, Debug)]
pub struct ConsistentHashing {
    net: Network,
    space: Keyspace,
    ring: Ring,
    rules: Vec<PlacementRule>,
    /// View version installed at each node.
    views: BTreeMap<NodeId, u64>,
    version: u64,
    placed: BTreeMap<DataId, NodeId>,
}

impl ConsistentHashing {
    pub fn new(net: Network, space: Keyspace) -> Self {
        let mut ring = Ring::new();
        for v in net.topology().node_ids() {
            let k = ring.assign_key(&space, v);
            ring.insert(k, v);
        }
        let views = ring.members().map(|(_, v)| (v, 0)).collect();
        ConsistentHashing { net, space, ring, rules: Vec::new(), views, version: 0, placed: BTreeMap::new() }
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn rules(&self) -> &[PlacementRule] {
        &self.rules
    }

    pub fn hash(&self, data: &DataId) -> Key {
        self.space.hash(data.as_bytes())
    }

    /// True when every member has installed the latest view.
    pub fn views_synchronized(&self) -> bool {
        self.ring.members().all(|(_, v)| self.views.get(&v) == Some(&self.version))
    }

    /// First matching live rule target, else the successor of the name's key.
    pub fn owner(&self, data: &DataId) -> Option<NodeId> {
        self.rules
            .iter()
            .find(|r| r.pattern.matches(data) && self.ring.key_of(r.target).is_some())
            .map(|r| r.target)
            .or_else(|| self.ring.successor(self.hash(data)))
    }

    fn broadcast(&mut self, from: NodeId) -> Result<(u64, u64), ProtocolError> {
        self.version += 1;
        let members: Vec<NodeId> = self.ring.members().map(|(_, v)| v).collect();
        for &v in &members {
            self.views.insert(v, self.version);
        }
        let msgs: Vec<Outgoing<()>> = members
            .into_iter()
            .filter(|&v| v != from)
            .map(|v| Outgoing::new(from, v, MsgKind::Control, ()))
            .collect();
        if msgs.is_empty() {
            return Ok((0, 0));
        }
        let op = self.net.begin_op();
        let stats = self.net.exchange(op, msgs, |_, _| {})?;
        Ok((stats.messages, stats.links))
    }

    /// Moves every record whose owner changed; one batched transfer per (from, to) pair.
    fn rebalance(&mut self, trace: &mut ReconfigTrace) -> Result<(), ProtocolError> {
        let mut batches: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        let names: Vec<DataId> = self.placed.keys().cloned().collect();
        for d in names {
            let Some(owner) = self.owner(&d) else { continue };
            let from = self.placed[&d];
            if owner != from {
                self.placed.insert(d, owner);
                trace.records_moved += 1;
                batches.insert((from, owner));
            }
        }
        let msgs: Vec<Outgoing<()>> = batches
            .into_iter()
            .map(|(from, to)| {
                let src = if self.net.topology().contains(from) { from } else { to };
                Outgoing::new(src, to, MsgKind::Control, ())
            })
            .collect();
        if !msgs.is_empty() {
            let op = self.net.begin_op();
            let stats = self.net.exchange(op, msgs, |_, _| {})?;
            trace.messages += stats.messages;
            trace.links_used += stats.links;
        }
        Ok(())
    }

    fn membership_change(&mut self, announcer: NodeId) -> Result<ReconfigTrace, ProtocolError> {
        let mut trace = ReconfigTrace::default();
        let (m, l) = self.broadcast(announcer)?;
        trace.messages += m;
        trace.links_used += l;
        trace.tables_updated = self.ring.len() as u64;
        self.rebalance(&mut trace)?;
        Ok(trace)
    }

    /// Replicates `rule` to every member, then moves data it now covers.
    pub fn add_rule(&mut self, rule: PlacementRule, from: NodeId) -> Result<ReconfigTrace, ProtocolError> {
        require_live(&self.net, rule.target)?;
        self.rules.push(rule);
        self.membership_change(from)
    }

    /// Stores with an exact-match rule pinning the data to the preferred node.
    pub fn store_with_rule(&mut self, req: PlacementRequest) -> Result<PlacementOutcome, ProtocolError> {
        let Some(target) = req.preferred_node else {
            return self.store(req);
        };
        require_live(&self.net, target)?;
        if self.placed.contains_key(&req.data) {
            return Err(ProtocolError::DuplicateData(req.data.to_string()));
        }
        self.add_rule(PlacementRule { pattern: Pattern::Exact(req.data.clone()), target }, target)?;
        self.store(req)
    }
}

impl Protocol for ConsistentHashing {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::ConsistentHashing
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
        if let Some(p) = req.preferred_node {
            require_live(&self.net, p)?;
        }
        let at = self.owner(&req.data).ok_or(ProtocolError::Unsupported("empty ring"))?;
        self.placed.insert(req.data.clone(), at);
        let ruled = self.rules.iter().any(|r| r.pattern.matches(&req.data));
        Ok(PlacementOutcome {
            name: req.data,
            stored_at: at,
            name_accepted: true,
            placement_honored: req.preferred_node.is_none_or(|p| p == at),
            name_after_move: if ruled { NameAfterMove::Stable } else { NameAfterMove::Changes },
        })
    }

    fn locate(&mut self, data: &DataId, origin: NodeId) -> Result<LookupTrace, ProtocolError> {
        require_live(&self.net, origin)?;
        let holder = self.placed.get(data).copied();
        if holder == Some(origin) {
            return Ok(LookupTrace::local(origin));
        }
        let Some(owner) = self.owner(data) else {
            return Ok(LookupTrace::default());
        };
        let mut trace = LookupTrace { resolved_at: Some(owner), ..Default::default() };
        if owner != origin {
            let op = self.net.begin_op();
            let stats = self.net.exchange(op, vec![Outgoing::new(origin, owner, MsgKind::Request, ())], |_, _| {})?;
            trace.requests = 1;
            trace.hops = 1;
            trace.messages = stats.messages;
            trace.links_used = stats.links;
        }
        trace.success = holder == Some(owner);
        Ok(trace)
    }

    fn change(&mut self, change: Change) -> Result<(ChangeNotice, ReconfigTrace), ProtocolError> {
        if let Change::Leave(node) = change {
            require_live(&self.net, node)?;
            let mut probe = self.net.topology().clone();
            probe.apply_change(Change::Leave(node))?;
            self.ring.remove(node);
            self.views.remove(&node);
            self.rules.retain(|r| r.target != node);
            let trace = self.membership_change(node)?;
            let notice = self.net.apply_change(change)?;
            return Ok((notice, trace));
        }
        let notice = self.net.apply_change(change)?;
        let trace = self.on_topology_change(&notice)?;
        Ok((notice, trace))
    }

    fn on_topology_change(&mut self, notice: &ChangeNotice) -> Result<ReconfigTrace, ProtocolError> {
        match notice {
            ChangeNotice::Joined { node, .. } => {
                let k = self.ring.assign_key(&self.space, *node);
                self.ring.insert(k, *node);
                self.membership_change(*node)
            }
            ChangeNotice::Left { node, .. } => {
                if self.ring.remove(*node).is_none() {
                    return Ok(ReconfigTrace::default());
                }
                self.views.remove(node);
                self.rules.retain(|r| r.target != *node);
                self.placed.retain(|_, v| v != node);
                let announcer = self.ring.members().next().map(|(_, v)| v).unwrap_or(*node);
                self.membership_change(announcer)
            }
            ChangeNotice::Readdressed { node, .. } => self.membership_change(*node),
        }
    }

    fn relocate(&mut self, data: &DataId, to: NodeId) -> Result<DataId, ProtocolError> {
        require_live(&self.net, to)?;
        let from = self.placed.get(data).copied().ok_or_else(|| ProtocolError::UnknownData(data.to_string()))?;
        if from == to {
            return Ok(data.clone());
        }
        if let Some(rule) = self.rules.iter_mut().find(|r| r.pattern == Pattern::Exact(data.clone())) {
            rule.target = to;
            self.broadcast(to)?;
            self.placed.insert(data.clone(), to);
            return Ok(data.clone());
        }
        let placed = &self.placed;
        let (name, _) = search_name(&self.space, &self.ring, data.as_str(), to, |d| placed.contains_key(d))?;
        self.placed.remove(data);
        self.placed.insert(name.clone(), to);
        Ok(name)
    }

    fn holder(&self, data: &DataId) -> Option<NodeId> {
        self.placed.get(data).copied()
    }

    fn tables(&self) -> TableStats {
        let per_node = self.ring.len() + self.rules.len();
        TableStats { max_table_size: per_node, table_count: self.ring.len() }
    }
}
