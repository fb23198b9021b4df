use std::collections::BTreeSet;

use super::{default_origin, ExploreQuery, Holdings, SeenSet};
use crate::error::ProtocolError;
use crate::net::{ChangeNotice, MsgKind, Network, NodeId, Outgoing};
use crate::proto::{
    require_live, DataId, LookupTrace, NameAfterMove, PlacementOutcome, PlacementRequest, Protocol,
    ProtocolKind, ReconfigTrace, TableStats,
};

/// TTL-bounded flooding with duplicate suppression.
#[derive(Clone, Debug)]
pub struct Flooding {
    net: Network,
    ttl: Option<u32>,
    holdings: Holdings,
    next_query: u64,
}

impl Flooding {
    /// `ttl = None` uses the current node count, which always reaches everyone.
    pub fn new(net: Network, ttl: Option<u32>) -> Self {
        Flooding { net, ttl, holdings: Holdings::default(), next_query: 0 }
    }

    pub fn ttl(&self) -> u32 {
        self.ttl.unwrap_or(self.net.topology().len() as u32)
    }

    pub fn set_ttl(&mut self, ttl: Option<u32>) {
        self.ttl = ttl;
    }

    pub fn query(&mut self, data: DataId, ttl: u32) -> ExploreQuery {
        self.next_query += 1;
        ExploreQuery { query_id: self.next_query, data, ttl, walkers: 1 }
    }

    pub fn locate_query(&mut self, q: &ExploreQuery, origin: NodeId) -> Result<LookupTrace, ProtocolError> {
        require_live(&self.net, origin)?;
        let holder = self.holdings.get(&q.data);
        if holder == Some(origin) {
            return Ok(LookupTrace::local(origin));
        }
        let mut trace = LookupTrace::default();
        if q.ttl == 0 {
            return Ok(trace);
        }
        let mut seen = SeenSet::default();
        seen.insert(origin, q.query_id);
        let first: Vec<Outgoing<(NodeId, u32)>> = self
            .net
            .topology()
            .neighbors(origin)
            .map(|w| Outgoing::new(origin, w, MsgKind::Request, (origin, q.ttl - 1)))
            .collect();
        let mut reached: BTreeSet<NodeId> = BTreeSet::new();
        let mut found: Option<(u64, NodeId)> = None;
        let start = self.net.now();
        let qid = q.query_id;
        let op = self.net.begin_op();
        let stats = self.net.exchange(op, first, |out, d| {
            let (_, remaining) = d.payload;
            reached.insert(d.dst);
            if !seen.insert(d.dst, qid) {
                return;
            }
            if Some(d.dst) == holder {
                if found.is_none() {
                    found = Some((d.time - start, d.dst));
                }
                return;
            }
            if remaining == 0 {
                return;
            }
            let from = d.src;
            let targets: Vec<NodeId> = out.topology().neighbors(d.dst).filter(|&w| w != from).collect();
            for w in targets {
                out.send(Outgoing::new(d.dst, w, MsgKind::Request, (d.dst, remaining - 1)));
            }
        })?;
        trace.requests = reached.len() as u64;
        trace.messages = stats.messages;
        trace.links_used = stats.links;
        if let Some((at, node)) = found {
            trace.success = true;
            trace.hops = at;
            trace.resolved_at = Some(node);
        }
        Ok(trace)
    }
}

impl Protocol for Flooding {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Flooding
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
            None => default_origin(&self.net)?,
        };
        require_live(&self.net, at)?;
        self.holdings.insert(req.data.clone(), at)?;
        Ok(PlacementOutcome {
            name: req.data,
            stored_at: at,
            name_accepted: true,
            placement_honored: true,
            name_after_move: NameAfterMove::Stable,
        })
    }

    fn locate(&mut self, data: &DataId, origin: NodeId) -> Result<LookupTrace, ProtocolError> {
        let ttl = self.ttl();
        let q = self.query(data.clone(), ttl);
        self.locate_query(&q, origin)
    }

    fn on_topology_change(&mut self, notice: &ChangeNotice) -> Result<ReconfigTrace, ProtocolError> {
        Ok(self.holdings.on_change(notice))
    }

    fn relocate(&mut self, data: &DataId, to: NodeId) -> Result<DataId, ProtocolError> {
        require_live(&self.net, to)?;
        self.holdings.relocate(data, to)?;
        Ok(data.clone())
    }

    fn holder(&self, data: &DataId) -> Option<NodeId> {
        self.holdings.get(data)
    }

    fn tables(&self) -> TableStats {
        TableStats::default()
    }
}
