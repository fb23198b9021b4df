use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{default_origin, ExploreQuery, Holdings};
use crate::error::ProtocolError;
use crate::net::{ChangeNotice, MsgKind, Network, NodeId, Outgoing};
use crate::proto::{
    require_live, DataId, LookupTrace, NameAfterMove, PlacementOutcome, PlacementRequest, Protocol,
    ProtocolKind, ReconfigTrace, TableStats,
};

#[derive(Clone, Copy, Debug)]
struct Step {
    walker: u32,
    remaining: u32,
}

/// Independent random walkers that never step straight back unless forced to.
#[derive(Clone, Debug)]
pub struct RandomWalk {
    net: Network,
    ttl: Option<u32>,
    walkers: u32,
    rng: ChaCha8Rng,
    holdings: Holdings,
    next_query: u64,
}

impl RandomWalk {
    /// `ttl = None` uses `16 * n^2` steps.
    pub fn new(net: Network, ttl: Option<u32>, walkers: u32, seed: u64) -> Self {
        RandomWalk {
            net,
            ttl,
            walkers: walkers.max(1),
            rng: ChaCha8Rng::seed_from_u64(seed),
            holdings: Holdings::default(),
            next_query: 0,
        }
    }

    pub fn ttl(&self) -> u32 {
        let n = self.net.topology().len() as u64;
        self.ttl.unwrap_or((16 * n * n).min(u32::MAX as u64) as u32)
    }

    pub fn query(&mut self, data: DataId, ttl: u32, walkers: u32) -> ExploreQuery {
        self.next_query += 1;
        ExploreQuery { query_id: self.next_query, data, ttl, walkers }
    }

    fn pick(rng: &mut ChaCha8Rng, choices: &[NodeId], came_from: Option<NodeId>) -> Option<NodeId> {
        if choices.is_empty() {
            return None;
        }
        if choices.len() > 1 {
            if let Some(back) = came_from {
                let allowed: Vec<NodeId> = choices.iter().copied().filter(|&w| w != back).collect();
                return Some(allowed[rng.random_range(0..allowed.len())]);
            }
        }
        Some(choices[rng.random_range(0..choices.len())])
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
        let rng = &mut self.rng;
        let neighbors: Vec<NodeId> = self.net.topology().neighbors(origin).collect();
        let mut first = Vec::new();
        for w in 0..q.walkers.max(1) {
            if let Some(next) = Self::pick(rng, &neighbors, None) {
                first.push(Outgoing::new(origin, next, MsgKind::Request, Step { walker: w, remaining: q.ttl - 1 }));
            }
        }
        let mut visited: BTreeSet<NodeId> = BTreeSet::new();
        let mut steps_to_find: Option<u64> = None;
        let mut steps = vec![0u64; q.walkers.max(1) as usize];
        let op = self.net.begin_op();
        let stats = self.net.exchange(op, first, |out, d| {
            let step = d.payload;
            steps[step.walker as usize] += 1;
            visited.insert(d.dst);
            if Some(d.dst) == holder {
                let s = steps[step.walker as usize];
                steps_to_find = Some(steps_to_find.map_or(s, |m| m.min(s)));
                return;
            }
            if step.remaining == 0 {
                return;
            }
            let choices: Vec<NodeId> = out.topology().neighbors(d.dst).collect();
            if let Some(next) = Self::pick(rng, &choices, Some(d.src)) {
                out.send(Outgoing::new(d.dst, next, MsgKind::Request, Step { remaining: step.remaining - 1, ..step }));
            }
        })?;
        visited.remove(&origin);
        trace.requests = visited.len() as u64;
        trace.messages = stats.messages;
        trace.links_used = stats.links;
        if let Some(s) = steps_to_find {
            trace.success = true;
            trace.hops = s;
            trace.resolved_at = holder;
        }
        Ok(trace)
    }
}

impl Protocol for RandomWalk {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::RandomWalk
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
        let q = self.query(data.clone(), ttl, self.walkers);
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
