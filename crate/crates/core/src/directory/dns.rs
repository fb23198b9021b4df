use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::ProtocolError;
use crate::net::{Address, ChangeNotice, MsgKind, Network, NodeId};
use crate::proto::{
    require_live, send_one, DataId, LookupTrace, NameAfterMove, PlacementOutcome, PlacementRequest,
    Protocol, ProtocolKind, ReconfigTrace, TableStats,
};

/// How zones are laid out over the nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DnsLayout {
    /// One zone per node, zone `i` delegated from zone `(i - 1) / arity`.
    Balanced { arity: usize },
    /// A single root zone on the lowest node.
    Flat,
    /// Explicit zones as (labels from the root down, server).
    Zones(Vec<(Vec<String>, NodeId)>),
}

#[derive(Clone, Debug)]
pub struct Zone {
    /// Labels from the root down; empty for the root zone.
    pub labels: Vec<String>,
    pub server: NodeId,
    pub parent: Option<usize>,
    children: BTreeMap<String, usize>,
    /// Child server addresses as this zone knows them.
    delegations: BTreeMap<String, Address>,
    records: BTreeMap<DataId, Address>,
}

impl Zone {
    /// Dotted suffix, `.` for the root.
    pub fn suffix(&self) -> String {
        if self.labels.is_empty() {
            ".".to_string()
        } else {
            self.labels.iter().rev().cloned().collect::<Vec<_>>().join(".")
        }
    }

    pub fn records(&self) -> &BTreeMap<DataId, Address> {
        &self.records
    }

    pub fn table_size(&self) -> usize {
        self.records.len() + self.delegations.len()
    }
}

/// Hierarchical name resolution with iterative lookups from the root.
#[derive(Clone, Debug)]
pub struct Dns {
    net: Network,
    zones: Vec<Zone>,
    root_hint: Address,
    leaves: Vec<usize>,
    unreachable: BTreeSet<NodeId>,
    placed: BTreeMap<DataId, NodeId>,
}

fn name_labels(name: &str) -> Vec<&str> {
    name.split('.').filter(|l| !l.is_empty()).rev().collect()
}

impl Dns {
    pub fn new(net: Network, layout: DnsLayout) -> Result<Self, ProtocolError> {
        let nodes = net.topology().node_ids();
        let mut spec: Vec<(Vec<String>, NodeId)> = match layout {
            DnsLayout::Flat => vec![(Vec::new(), nodes[0])],
            DnsLayout::Balanced { arity } => {
                let arity = arity.max(1);
                let mut labels: Vec<Vec<String>> = Vec::with_capacity(nodes.len());
                for i in 0..nodes.len() {
                    if i == 0 {
                        labels.push(Vec::new());
                    } else {
                        let mut l = labels[(i - 1) / arity].clone();
                        l.push(format!("z{i}"));
                        labels.push(l);
                    }
                }
                labels.into_iter().zip(nodes.iter().copied()).collect()
            }
            DnsLayout::Zones(z) => z,
        };
        spec.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        if spec.first().is_none_or(|(l, _)| !l.is_empty()) {
            return Err(ProtocolError::Unsupported("zone layout needs a root zone"));
        }
        let mut zones: Vec<Zone> = Vec::with_capacity(spec.len());
        let mut index: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        for (labels, server) in spec {
            require_live(&net, server)?;
            if index.contains_key(&labels) {
                return Err(ProtocolError::Unsupported("duplicate zone"));
            }
            let parent = if labels.is_empty() {
                None
            } else {
                let p = *index
                    .get(&labels[..labels.len() - 1])
                    .ok_or(ProtocolError::Unsupported("zone without a parent zone"))?;
                Some(p)
            };
            let id = zones.len();
            if let Some(p) = parent {
                let label = labels.last().cloned().unwrap_or_default();
                let addr = net.topology().address(server).ok_or(ProtocolError::NodeNotLive(server))?;
                zones[p].children.insert(label.clone(), id);
                zones[p].delegations.insert(label, addr);
            }
            index.insert(labels.clone(), id);
            zones.push(Zone {
                labels,
                server,
                parent,
                children: BTreeMap::new(),
                delegations: BTreeMap::new(),
                records: BTreeMap::new(),
            });
        }
        let root_hint = net.topology().address(zones[0].server).ok_or(ProtocolError::NodeNotLive(zones[0].server))?;
        let leaves = (0..zones.len()).filter(|&z| zones[z].children.is_empty()).collect();
        Ok(Dns { net, zones, root_hint, leaves, unreachable: BTreeSet::new(), placed: BTreeMap::new() })
    }

    /// Parses `suffix-path server-node` lines (`.` is the root, `#` starts a comment).
    pub fn from_zone_file(net: Network, text: &str) -> Result<Self, ProtocolError> {
        let mut zones = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(suffix), Some(server), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(ProtocolError::Unsupported("zone line must be `suffix-path server-node`"));
            };
            let server: u32 = server.parse().map_err(|_| ProtocolError::Unsupported("bad server node id"))?;
            let labels = name_labels(suffix).into_iter().map(str::to_string).collect();
            zones.push((labels, NodeId(server)));
        }
        Dns::new(net, DnsLayout::Zones(zones))
    }

    pub fn zone_file(&self) -> String {
        let mut out = String::new();
        for z in &self.zones {
            let _ = writeln!(out, "{} {}", z.suffix(), z.server);
        }
        out
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn depth(&self, zone: usize) -> usize {
        self.zones[zone].labels.len()
    }

    /// The deepest zone whose suffix is a proper suffix of `name`.
    pub fn zone_for(&self, name: &str) -> usize {
        let labels = name_labels(name);
        let mut z = 0;
        while labels.len() > self.zones[z].labels.len() + 1 {
            match self.zones[z].children.get(labels[self.zones[z].labels.len()]) {
                Some(&c) => z = c,
                None => break,
            }
        }
        z
    }

    /// Zone servers stop answering; the node stays in the network.
    pub fn set_unreachable(&mut self, server: NodeId) {
        self.unreachable.insert(server);
    }

    pub fn set_reachable(&mut self, server: NodeId) {
        self.unreachable.remove(&server);
    }
}

impl Protocol for Dns {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Dns
    }

    fn network(&self) -> &Network {
        &self.net
    }

    fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    fn conventional_name(&self, base: &str, index: usize) -> String {
        let zone = &self.zones[self.leaves[index % self.leaves.len()]];
        if zone.labels.is_empty() {
            base.to_string()
        } else {
            format!("{base}.{}", zone.suffix())
        }
    }

    fn store(&mut self, req: PlacementRequest) -> Result<PlacementOutcome, ProtocolError> {
        if self.placed.contains_key(&req.data) {
            return Err(ProtocolError::DuplicateData(req.data.to_string()));
        }
        let at = req.preferred_node.unwrap_or(self.zones[0].server);
        require_live(&self.net, at)?;
        let z = self.zone_for(req.data.as_str());
        let server = self.zones[z].server;
        if server != at && self.net.topology().contains(server) {
            send_one(&mut self.net, at, server, MsgKind::Control)?;
        }
        let address = self.net.topology().address(at).ok_or(ProtocolError::NodeNotLive(at))?;
        self.zones[z].records.insert(req.data.clone(), address);
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
        let labels = name_labels(data.as_str());
        let mut trace = LookupTrace::default();
        let mut next = self.root_hint;
        let mut z = 0;
        loop {
            let server = self.zones[z].server;
            // A stale address either reaches nobody or the wrong node.
            if self.net.topology().node_at(next) != Some(server) {
                return Ok(trace);
            }
            trace.hops += 1;
            if server != origin {
                let stats = send_one(&mut self.net, origin, server, MsgKind::Request)?;
                trace.requests += 1;
                trace.messages += stats.messages;
                trace.links_used += stats.links;
            }
            if self.unreachable.contains(&server) {
                return Ok(trace);
            }
            let zone = &self.zones[z];
            let depth = zone.labels.len();
            if labels.len() > depth + 1 {
                if let (Some(&addr), Some(&child)) =
                    (zone.delegations.get(labels[depth]), zone.children.get(labels[depth]))
                {
                    next = addr;
                    z = child;
                    continue;
                }
            }
            let resolved = zone.records.get(data).and_then(|&a| self.net.topology().node_at(a));
            trace.success = resolved.is_some() && resolved == holder;
            trace.resolved_at = resolved;
            return Ok(trace);
        }
    }

    fn on_topology_change(&mut self, notice: &ChangeNotice) -> Result<ReconfigTrace, ProtocolError> {
        if let ChangeNotice::Left { node, .. } = notice {
            self.placed.retain(|_, v| v != node);
        }
        Ok(ReconfigTrace::manual())
    }

    /// Rewrites every delegation and record with the current addresses.
    fn manual_update(&mut self) -> Result<ReconfigTrace, ProtocolError> {
        let topo = self.net.topology();
        let mut updated = 0;
        if let Some(a) = topo.address(self.zones[0].server) {
            self.root_hint = a;
        }
        let servers: Vec<NodeId> = self.zones.iter().map(|z| z.server).collect();
        for z in 0..self.zones.len() {
            let mut changed = false;
            let children: Vec<(String, usize)> = self.zones[z].children.iter().map(|(l, &c)| (l.clone(), c)).collect();
            for (label, c) in children {
                if let Some(a) = topo.address(servers[c]) {
                    if self.zones[z].delegations.insert(label, a) != Some(a) {
                        changed = true;
                    }
                }
            }
            let placed = &self.placed;
            self.zones[z].records.retain(|k, _| placed.contains_key(k));
            for (k, a) in self.zones[z].records.iter_mut() {
                if let Some(fresh) = placed.get(k).and_then(|&v| topo.address(v)) {
                    if *a != fresh {
                        *a = fresh;
                        changed = true;
                    }
                }
            }
            updated += changed as u64;
        }
        Ok(ReconfigTrace { tables_updated: updated, manual_intervention: true, ..Default::default() })
    }

    fn relocate(&mut self, data: &DataId, to: NodeId) -> Result<DataId, ProtocolError> {
        require_live(&self.net, to)?;
        if !self.placed.contains_key(data) {
            return Err(ProtocolError::UnknownData(data.to_string()));
        }
        let z = self.zone_for(data.as_str());
        let server = self.zones[z].server;
        if server != to && self.net.topology().contains(server) {
            send_one(&mut self.net, to, server, MsgKind::Control)?;
        }
        let address = self.net.topology().address(to).ok_or(ProtocolError::NodeNotLive(to))?;
        self.zones[z].records.insert(data.clone(), address);
        self.placed.insert(data.clone(), to);
        Ok(data.clone())
    }

    fn holder(&self, data: &DataId) -> Option<NodeId> {
        self.placed.get(data).copied()
    }

    fn tables(&self) -> TableStats {
        let mut per_node: BTreeMap<NodeId, usize> = BTreeMap::new();
        for z in &self.zones {
            *per_node.entry(z.server).or_default() += z.table_size();
        }
        TableStats { max_table_size: per_node.values().copied().max().unwrap_or(0), table_count: self.zones.len() }
    }
}
