use std::collections::{BTreeMap, VecDeque};

use crate::directory::routes::{Prefix, RouteTable};
use crate::error::ProtocolError;
use crate::net::{Address, ChangeNotice, MsgKind, Network, NodeId, Outgoing, Topology};
use crate::proto::{
    require_live, DataId, LookupTrace, NameAfterMove, PlacementOutcome, PlacementRequest, Protocol,
    ProtocolKind, ReconfigTrace, TableStats,
};

/// Builds `<address-bits>/<local-name>`.
pub fn embed(address: Address, width: u8, local: &str) -> String {
    format!("{}/{}", address.to_bits(width), local)
}

/// Splits an embedded name into its destination address and local part.
pub fn parse_embedded(name: &str, width: u8) -> Option<(Address, &str)> {
    let (bits, local) = name.split_once('/')?;
    if bits.len() != width as usize || local.is_empty() {
        return None;
    }
    Some((Address::from_bits(bits)?, local))
}

/// Host routes from every node to every other node along shortest paths.
pub fn shortest_path_tables(topology: &Topology) -> BTreeMap<NodeId, RouteTable> {
    let width = topology.address_width();
    let mut tables = BTreeMap::new();
    for root in topology.nodes() {
        let mut table = RouteTable::new(width);
        let mut first: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        let mut queue = VecDeque::new();
        first.insert(root, root);
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            for w in topology.neighbors(v) {
                if first.contains_key(&w) {
                    continue;
                }
                let hop = if v == root { w } else { first[&v] };
                first.insert(w, hop);
                queue.push_back(w);
                if let Some(a) = topology.address(w) {
                    table.insert(Prefix::host(a, width), hop);
                }
            }
        }
        tables.insert(root, table);
    }
    tables
}

/// Names carry the holder's address; routers forward by longest-prefix match.
#[derive(Clone, Debug)]
pub struct EmbeddedRouting {
    net: Network,
    width: u8,
    routes: BTreeMap<NodeId, RouteTable>,
    aggregated: bool,
    placed: BTreeMap<DataId, NodeId>,
}

impl EmbeddedRouting {
    pub fn new(net: Network) -> Self {
        let width = net.topology().address_width();
        let routes = shortest_path_tables(net.topology());
        EmbeddedRouting { net, width, routes, aggregated: false, placed: BTreeMap::new() }
    }

    /// Replaces every table by its sibling-merged form.
    pub fn aggregate_all(&mut self) {
        for t in self.routes.values_mut() {
            *t = t.aggregate();
        }
        self.aggregated = true;
    }

    pub fn route_table(&self, node: NodeId) -> Option<&RouteTable> {
        self.routes.get(&node)
    }

    pub fn route_table_mut(&mut self, node: NodeId) -> Option<&mut RouteTable> {
        self.routes.get_mut(&node)
    }

    fn name_for(&self, at: NodeId, data: &DataId) -> Result<DataId, ProtocolError> {
        let address = self.net.topology().address(at).ok_or(ProtocolError::NodeNotLive(at))?;
        let local = match parse_embedded(data.as_str(), self.width) {
            Some((_, local)) => local,
            None => data.as_str(),
        };
        DataId::new(embed(address, self.width, local))
    }
}

impl Protocol for EmbeddedRouting {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::IpRouting
    }

    fn network(&self) -> &Network {
        &self.net
    }

    fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    fn store(&mut self, req: PlacementRequest) -> Result<PlacementOutcome, ProtocolError> {
        let at = match req.preferred_node {
            Some(v) => v,
            None => self.net.topology().nodes().next().ok_or(ProtocolError::Unsupported("empty network"))?,
        };
        require_live(&self.net, at)?;
        let name = self.name_for(at, &req.data)?;
        if self.placed.contains_key(&name) {
            return Err(ProtocolError::DuplicateData(name.to_string()));
        }
        self.placed.insert(name.clone(), at);
        Ok(PlacementOutcome {
            name_accepted: name == req.data,
            name,
            stored_at: at,
            placement_honored: true,
            name_after_move: NameAfterMove::Changes,
        })
    }

    fn locate(&mut self, data: &DataId, origin: NodeId) -> Result<LookupTrace, ProtocolError> {
        require_live(&self.net, origin)?;
        let (dest, _) =
            parse_embedded(data.as_str(), self.width).ok_or_else(|| ProtocolError::BadEmbeddedName(data.to_string()))?;
        let holder = self.placed.get(data).copied();
        let mut trace = LookupTrace::default();
        let mut cur = origin;
        let guard = self.net.topology().id_bound() as u64 + 1;
        loop {
            if self.net.topology().address(cur) == Some(dest) {
                trace.success = holder == Some(cur);
                trace.resolved_at = Some(cur);
                return Ok(trace);
            }
            if trace.hops >= guard {
                return Ok(trace);
            }
            let Some(next) = self.routes.get(&cur).and_then(|t| t.lookup(dest)) else {
                return Ok(trace);
            };
            if self.net.topology().link_between(cur, next).is_none() {
                return Ok(trace);
            }
            let kind =
                if self.net.topology().address(next) == Some(dest) { MsgKind::Request } else { MsgKind::Forward };
            let op = self.net.begin_op();
            let stats = self.net.exchange(op, vec![Outgoing::new(cur, next, kind, ())], |_, _| {})?;
            trace.requests = 1;
            trace.hops += 1;
            trace.messages += stats.messages;
            trace.links_used += stats.links;
            cur = next;
        }
    }

    fn on_topology_change(&mut self, notice: &ChangeNotice) -> Result<ReconfigTrace, ProtocolError> {
        match notice {
            ChangeNotice::Joined { node, .. } => {
                self.routes.insert(*node, RouteTable::new(self.width));
            }
            ChangeNotice::Left { node, .. } => {
                self.routes.remove(node);
                self.placed.retain(|_, v| v != node);
            }
            ChangeNotice::Readdressed { .. } => {}
        }
        Ok(ReconfigTrace::manual())
    }

    /// Recomputes every routing table from the current topology.
    fn manual_update(&mut self) -> Result<ReconfigTrace, ProtocolError> {
        let fresh = shortest_path_tables(self.net.topology());
        let updated = fresh.iter().filter(|(v, t)| self.routes.get(v) != Some(t)).count() as u64;
        self.routes = fresh;
        if self.aggregated {
            self.aggregate_all();
        }
        Ok(ReconfigTrace { tables_updated: updated, manual_intervention: true, ..Default::default() })
    }

    fn relocate(&mut self, data: &DataId, to: NodeId) -> Result<DataId, ProtocolError> {
        require_live(&self.net, to)?;
        if self.placed.remove(data).is_none() {
            return Err(ProtocolError::UnknownData(data.to_string()));
        }
        let name = self.name_for(to, data)?;
        self.placed.insert(name.clone(), to);
        Ok(name)
    }

    fn holder(&self, data: &DataId) -> Option<NodeId> {
        self.placed.get(data).copied()
    }

    fn tables(&self) -> TableStats {
        TableStats { max_table_size: self.routes.values().map(|t| t.size()).max().unwrap_or(0), table_count: self.routes.len() }
    }
}
