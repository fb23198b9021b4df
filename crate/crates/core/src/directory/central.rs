use std::collections::BTreeMap;

use crate::error::ProtocolError;
use crate::net::{Address, ChangeNotice, MsgKind, Network, NodeId};
use crate::proto::{
    require_live, send_one, DataId, LookupTrace, NameAfterMove, PlacementOutcome, PlacementRequest,
    Protocol, ProtocolKind, ReconfigTrace, TableStats,
};

/// One server holds the location of every object.
#[derive(Clone, Debug)]
pub struct CentralDirectory {
    net: Network,
    server: NodeId,
    server_lost: bool,
    table: BTreeMap<DataId, Address>,
    placed: BTreeMap<DataId, NodeId>,
}

impl CentralDirectory {
    /// The lowest live node id becomes the server.
    pub fn new(net: Network) -> Self {
        let server = net.topology().nodes().next().unwrap_or(NodeId(0));
        Self::with_server(net, server)
    }

    pub fn with_server(net: Network, server: NodeId) -> Self {
        CentralDirectory { net, server, server_lost: false, table: BTreeMap::new(), placed: BTreeMap::new() }
    }

    pub fn server(&self) -> NodeId {
        self.server
    }

    pub fn table(&self) -> &BTreeMap<DataId, Address> {
        &self.table
    }

    fn notify_server(&mut self, from: NodeId) -> Result<ReconfigTrace, ProtocolError> {
        if from == self.server {
            return Ok(ReconfigTrace { tables_updated: 1, ..Default::default() });
        }
        let stats = send_one(&mut self.net, from, self.server, MsgKind::Control)?;
        Ok(ReconfigTrace { messages: stats.messages, links_used: stats.links, tables_updated: 1, ..Default::default() })
    }
}

impl Protocol for CentralDirectory {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Central
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
        let at = req.preferred_node.unwrap_or(self.server);
        require_live(&self.net, at)?;
        if at != self.server && !self.server_lost {
            send_one(&mut self.net, at, self.server, MsgKind::Control)?;
        }
        let address = self.net.topology().address(at).ok_or(ProtocolError::NodeNotLive(at))?;
        self.table.insert(req.data.clone(), address);
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
        if self.placed.get(data) == Some(&origin) {
            return Ok(LookupTrace::local(origin));
        }
        if self.server_lost {
            return Ok(LookupTrace::default());
        }
        let mut trace = LookupTrace::default();
        if origin != self.server {
            let stats = send_one(&mut self.net, origin, self.server, MsgKind::Request)?;
            trace.requests = 1;
            trace.hops = 1;
            trace.messages = stats.messages;
            trace.links_used = stats.links;
        }
        let resolved = self.table.get(data).and_then(|&a| self.net.topology().node_at(a));
        trace.success = resolved.is_some() && resolved == self.placed.get(data).copied();
        trace.resolved_at = resolved;
        Ok(trace)
    }

    fn on_topology_change(&mut self, notice: &ChangeNotice) -> Result<ReconfigTrace, ProtocolError> {
        match notice {
            ChangeNotice::Joined { node, .. } => {
                let mut trace = self.notify_server(*node)?;
                trace.tables_updated = 0;
                Ok(trace)
            }
            ChangeNotice::Left { node, address, neighbors } => {
                if *node == self.server {
                    self.server_lost = true;
                    return Ok(ReconfigTrace::manual());
                }
                self.table.retain(|_, a| a != address);
                self.placed.retain(|_, n| n != node);
                let reporter = neighbors.iter().copied().find(|&v| self.net.topology().contains(v));
                match reporter {
                    Some(r) => self.notify_server(r),
                    None => Ok(ReconfigTrace::default()),
                }
            }
            ChangeNotice::Readdressed { node, old, new } => {
                for a in self.table.values_mut() {
                    if a == old {
                        *a = *new;
                    }
                }
                if *node == self.server {
                    return Ok(ReconfigTrace::default());
                }
                self.notify_server(*node)
            }
        }
    }

    fn relocate(&mut self, data: &DataId, to: NodeId) -> Result<DataId, ProtocolError> {
        require_live(&self.net, to)?;
        if !self.placed.contains_key(data) {
            return Err(ProtocolError::UnknownData(data.to_string()));
        }
        self.notify_server(to)?;
        let address = self.net.topology().address(to).ok_or(ProtocolError::NodeNotLive(to))?;
        self.table.insert(data.clone(), address);
        self.placed.insert(data.clone(), to);
        Ok(data.clone())
    }

    fn holder(&self, data: &DataId) -> Option<NodeId> {
        self.placed.get(data).copied()
    }

    fn tables(&self) -> TableStats {
        TableStats { max_table_size: self.table.len(), table_count: 1 }
    }
}
