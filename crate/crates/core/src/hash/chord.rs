use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::keyspace::{Key, Keyspace, Ring};
use crate::error::ProtocolError;
use crate::net::{Change, ChangeNotice, MsgKind, Network, NodeId, Outgoing};
use crate::proto::{
    require_live, DataId, LookupTrace, NameAfterMove, PlacementOutcome, PlacementRequest, Protocol,
    ProtocolKind, ReconfigTrace, TableStats,
};

/// Chord-style distributed hash table with finger-table routing.
#[derive(Clone, Debug)]
pub struct Chord {
    net: Network,
    space: Keyspace,
    ring: Ring,
    fingers: BTreeMap<NodeId, Vec<NodeId>>,
    records: BTreeMap<NodeId, BTreeMap<DataId, Key>>,
    placed: BTreeMap<DataId, NodeId>,
}

/// Searches `base~0`, `base~1`, ... for a name whose key is owned by `node`.
pub(crate) fn search_name(
    space: &Keyspace,
    ring: &Ring,
    base: &str,
    node: NodeId,
    taken: impl Fn(&DataId) -> bool,
) -> Result<(DataId, u64), ProtocolError> {
    let limit = 64 * space.size();
    for i in 0..limit {
        let cand = DataId::new(format!("{base}~{i}"))?;
        if ring.successor(space.hash(cand.as_bytes())) == Some(node) && !taken(&cand) {
            return Ok((cand, i + 1));
        }
    }
    Err(ProtocolError::NameSearchExhausted { name: base.to_string(), node, tries: limit })
}

impl Chord {
    pub fn new(net: Network, space: Keyspace) -> Self {
        let mut ring = Ring::new();
        for v in net.topology().node_ids() {
            let k = ring.assign_key(&space, v);
            ring.insert(k, v);
        }
        Self::from_ring(net, space, ring)
    }

    /// Places every listed node at the given key. Nodes left out stay off the ring.
    pub fn with_keys(net: Network, space: Keyspace, keys: &[(NodeId, Key)]) -> Result<Self, ProtocolError> {
        let mut ring = Ring::new();
        for &(v, k) in keys {
            require_live(&net, v)?;
            if k.0 >= space.size() || ring.node_at(k).is_some() || ring.key_of(v).is_some() {
                return Err(ProtocolError::Unsupported("ring keys must be distinct and inside the keyspace"));
            }
            ring.insert(k, v);
        }
        Ok(Self::from_ring(net, space, ring))
    }

    fn from_ring(net: Network, space: Keyspace, ring: Ring) -> Self {
        let records = ring.members().map(|(_, v)| (v, BTreeMap::new())).collect();
        let mut chord = Chord { net, space, ring, fingers: BTreeMap::new(), records, placed: BTreeMap::new() };
        chord.rebuild_fingers();
        chord
    }

    pub fn keyspace(&self) -> Keyspace {
        self.space
    }

    pub fn ring(&self) -> &Ring {
        &self.ring
    }

    pub fn hash(&self, data: &DataId) -> Key {
        self.space.hash(data.as_bytes())
    }

    pub fn successor(&self, k: Key) -> Option<NodeId> {
        self.ring.successor(k)
    }

    pub fn fingers(&self, node: NodeId) -> Option<&[NodeId]> {
        self.fingers.get(&node).map(|f| f.as_slice())
    }

    pub fn records(&self, node: NodeId) -> Option<&BTreeMap<DataId, Key>> {
        self.records.get(&node)
    }

    fn compute_fingers(&self, node: NodeId) -> Vec<NodeId> {
        let Some(k) = self.ring.key_of(node) else { return Vec::new() };
        (0..self.space.bits())
            .filter_map(|i| self.ring.successor(self.space.add(k, 1u64 << i)))
            .collect()
    }

    /// Recomputes every finger table; returns the nodes whose table changed.
    fn rebuild_fingers(&mut self) -> Vec<NodeId> {
        let mut changed = Vec::new();
        let mut fresh = BTreeMap::new();
        for (_, v) in self.ring.members() {
            let f = self.compute_fingers(v);
            if self.fingers.get(&v) != Some(&f) {
                changed.push(v);
            }
            fresh.insert(v, f);
        }
        self.fingers = fresh;
        changed
    }

    /// `owner i target` lines, owners and targets given by key.
    pub fn finger_dump(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.ring.members() {
            for (i, t) in self.fingers[&v].iter().enumerate() {
                let tk = self.ring.key_of(*t).unwrap_or(Key(0));
                let _ = writeln!(out, "{k} {i} {tk}");
            }
        }
        out
    }

    fn closest_preceding(&self, node: NodeId, k: Key) -> Option<NodeId> {
        let nk = self.ring.key_of(node)?;
        self.fingers.get(&node)?.iter().rev().copied().find(|&f| {
            self.ring.key_of(f).is_some_and(|fk| self.space.in_open(fk, nk, k))
        })
    }

    /// Greedy finger routing from `origin` to the owner of `k`.
    pub fn locate_key(&mut self, k: Key, origin: NodeId) -> Result<LookupTrace, ProtocolError> {
        require_live(&self.net, origin)?;
        let mut trace = LookupTrace::default();
        let mut cur = origin;
        loop {
            let Some(ck) = self.ring.key_of(cur) else {
                return Ok(trace);
            };
            let pk = self.ring.predecessor_key(ck).unwrap_or(ck);
            if pk == ck || self.space.in_half_open(k, pk, ck) {
                trace.resolved_at = Some(cur);
                trace.success = true;
                return Ok(trace);
            }
            if trace.hops > self.ring.len() as u64 {
                return Ok(trace);
            }
            let sk = self.ring.next_key(ck).unwrap_or(ck);
            let succ = self.ring.node_at(sk).unwrap_or(cur);
            let next = if self.space.in_half_open(k, ck, sk) {
                succ
            } else {
                self.closest_preceding(cur, k).unwrap_or(succ)
            };
            let op = self.net.begin_op();
            let stats = self.net.exchange(op, vec![Outgoing::new(cur, next, MsgKind::Request, ())], |_, _| {})?;
            trace.requests += 1;
            trace.hops += 1;
            trace.messages += stats.messages;
            trace.links_used += stats.links;
            cur = next;
        }
    }

    fn notify(&mut self, from: NodeId, targets: &[NodeId]) -> Result<(u64, u64), ProtocolError> {
        let msgs: Vec<Outgoing<()>> = targets
            .iter()
            .filter(|&&t| t != from && self.net.topology().contains(t))
            .map(|&t| Outgoing::new(from, t, MsgKind::Control, ()))
            .collect();
        if msgs.is_empty() || !self.net.topology().contains(from) {
            return Ok((0, 0));
        }
        let op = self.net.begin_op();
        let stats = self.net.exchange(op, msgs, |_, _| {})?;
        Ok((stats.messages, stats.links))
    }

    /// Inserts `node` at `key`: takes over the records of its arc and repairs fingers.
    pub fn ring_join(&mut self, node: NodeId, key: Key) -> Result<ReconfigTrace, ProtocolError> {
        require_live(&self.net, node)?;
        if self.ring.key_of(node).is_some() || self.ring.node_at(key).is_some() || key.0 >= self.space.size() {
            return Err(ProtocolError::Unsupported("node or key already on the ring"));
        }
        let mut trace = ReconfigTrace::default();
        let first = self.ring.is_empty();
        self.ring.insert(key, node);
        self.records.insert(node, BTreeMap::new());
        if !first {
            let succ = self.ring.successor(self.space.add(key, 1)).unwrap_or(node);
            let pk = self.ring.predecessor_key(key).unwrap_or(key);
            let moving: Vec<(DataId, Key)> = self.records[&succ]
                .iter()
                .filter(|(_, &k)| self.space.in_half_open(k, pk, key))
                .map(|(d, k)| (d.clone(), *k))
                .collect();
            for (d, k) in &moving {
                self.records.get_mut(&succ).map(|r| r.remove(d));
                self.records.get_mut(&node).map(|r| r.insert(d.clone(), *k));
                self.placed.insert(d.clone(), node);
            }
            trace.records_moved = moving.len() as u64;
            let (m, l) = self.notify(node, &[succ])?;
            trace.messages += m;
            trace.links_used += l;
            if !moving.is_empty() {
                let (m, l) = self.notify(succ, &[node])?;
                trace.messages += m;
                trace.links_used += l;
            }
        }
        let changed = self.rebuild_fingers();
        trace.tables_updated = changed.len() as u64;
        let (m, l) = self.notify(node, &changed)?;
        trace.messages += m;
        trace.links_used += l;
        Ok(trace)
    }

    /// Removes `node`, handing its records to its successor.
    pub fn ring_leave(&mut self, node: NodeId) -> Result<ReconfigTrace, ProtocolError> {
        let Some(key) = self.ring.key_of(node) else {
            return Ok(ReconfigTrace::default());
        };
        if self.ring.len() == 1 {
            return Err(ProtocolError::Unsupported("the last ring member cannot leave"));
        }
        let mut trace = ReconfigTrace::default();
        self.ring.remove(node);
        let succ = self.ring.successor(key).unwrap_or(node);
        let mine = self.records.remove(&node).unwrap_or_default();
        trace.records_moved = mine.len() as u64;
        for (d, k) in mine {
            self.placed.insert(d.clone(), succ);
            self.records.entry(succ).or_default().insert(d, k);
        }
        self.fingers.remove(&node);
        if trace.records_moved > 0 {
            let (m, l) = self.notify(node, &[succ])?;
            trace.messages += m;
            trace.links_used += l;
        }
        let changed = self.rebuild_fingers();
        trace.tables_updated = changed.len() as u64;
        let announcer = if self.net.topology().contains(node) { node } else { succ };
        let (m, l) = self.notify(announcer, &changed)?;
        trace.messages += m;
        trace.links_used += l;
        Ok(trace)
    }

    /// A name that hashes onto `node`, with the number of trials it took.
    pub fn name_for_node(&self, base: &str, node: NodeId) -> Result<(DataId, u64), ProtocolError> {
        let base = base.split('~').next().unwrap_or(base);
        search_name(&self.space, &self.ring, base, node, |d| self.placed.contains_key(d))
    }
}

impl Protocol for Chord {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Dht
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
        let k = self.hash(&req.data);
        let at = self.ring.successor(k).ok_or(ProtocolError::Unsupported("empty ring"))?;
        self.records.entry(at).or_default().insert(req.data.clone(), k);
        self.placed.insert(req.data.clone(), at);
        Ok(PlacementOutcome {
            name: req.data,
            stored_at: at,
            name_accepted: true,
            placement_honored: req.preferred_node.is_none_or(|p| p == at),
            name_after_move: NameAfterMove::Changes,
        })
    }

    fn locate(&mut self, data: &DataId, origin: NodeId) -> Result<LookupTrace, ProtocolError> {
        require_live(&self.net, origin)?;
        let holder = self.placed.get(data).copied();
        if holder == Some(origin) {
            return Ok(LookupTrace::local(origin));
        }
        let mut trace = self.locate_key(self.hash(data), origin)?;
        trace.success = trace.success && holder.is_some() && trace.resolved_at == holder;
        Ok(trace)
    }

    fn change(&mut self, change: Change) -> Result<(ChangeNotice, ReconfigTrace), ProtocolError> {
        // Leaves are graceful: the node hands off its arc before disconnecting.
        if let Change::Leave(node) = change {
            require_live(&self.net, node)?;
            let mut probe = self.net.topology().clone();
            probe.apply_change(Change::Leave(node))?;
            let trace = self.ring_leave(node)?;
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
                let key = self.ring.assign_key(&self.space, *node);
                self.ring_join(*node, key)
            }
            ChangeNotice::Left { node, .. } => self.ring_leave(*node),
            ChangeNotice::Readdressed { node, .. } => {
                let mut pointing: Vec<NodeId> =
                    self.fingers.iter().filter(|(v, f)| *v != node && f.contains(node)).map(|(v, _)| *v).collect();
                if let Some(pk) = self.ring.key_of(*node).and_then(|k| self.ring.predecessor_key(k)) {
                    if let Some(p) = self.ring.node_at(pk) {
                        if p != *node && !pointing.contains(&p) {
                            pointing.push(p);
                        }
                    }
                }
                let (messages, links_used) = self.notify(*node, &pointing)?;
                Ok(ReconfigTrace { messages, links_used, tables_updated: pointing.len() as u64, ..Default::default() })
            }
        }
    }

    fn relocate(&mut self, data: &DataId, to: NodeId) -> Result<DataId, ProtocolError> {
        require_live(&self.net, to)?;
        let from = self.placed.get(data).copied().ok_or_else(|| ProtocolError::UnknownData(data.to_string()))?;
        if from == to {
            return Ok(data.clone());
        }
        let (name, _) = self.name_for_node(data.as_str(), to)?;
        self.placed.remove(data);
        self.records.get_mut(&from).map(|r| r.remove(data));
        let k = self.hash(&name);
        self.records.entry(to).or_default().insert(name.clone(), k);
        self.placed.insert(name.clone(), to);
        Ok(name)
    }

    fn holder(&self, data: &DataId) -> Option<NodeId> {
        self.placed.get(data).copied()
    }

    fn tables(&self) -> TableStats {
        TableStats {
            max_table_size: self
                .ring
                .members()
                .map(|(_, v)| self.records.get(&v).map_or(0, |r| r.len()) + self.fingers.get(&v).map_or(0, |f| f.len()))
                .max()
                .unwrap_or(0),
            table_count: self.ring.len(),
        }
    }
}
