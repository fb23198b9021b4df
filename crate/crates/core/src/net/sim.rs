//! Logical-time message delivery with unit link latency.
//!
//! A message sent at tick `t` along a path of `h` links is delivered at `t + h`.
//! Events run in `(time, insertion order)` order, so a run is a pure function of
//! its inputs.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::trace::{MsgKind, OpId, TraceLog, TraceMode, TraceRecord};
use super::{BfsTree, Change, ChangeNotice, LinkId, NodeId, Topology};
use crate::error::SimError;

pub const DEFAULT_EVENT_BUDGET: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub event_budget: u64,
    pub trace: TraceMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { event_budget: DEFAULT_EVENT_BUDGET, trace: TraceMode::Summary }
    }
}

/// A message about to be sent. Routed over the current shortest path.
#[derive(Clone, Debug)]
pub struct Outgoing<P> {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: MsgKind,
    pub size: u64,
    pub payload: P,
}

impl<P> Outgoing<P> {
    pub fn new(src: NodeId, dst: NodeId, kind: MsgKind, payload: P) -> Self {
        Outgoing { src, dst, kind, size: 1, payload }
    }

    pub fn with_size(mut self, size: u64) -> Self {
        self.size = size;
        self
    }
}

#[derive(Clone, Debug)]
pub struct Delivery<P> {
    pub time: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: MsgKind,
    pub hops: u32,
    pub payload: P,
}

/// Scripted input for [`Network::run`].
#[derive(Clone, Debug)]
pub enum SimEventKind<P> {
    Send(Outgoing<P>),
    Change(Change),
}

#[derive(Clone, Debug)]
pub struct SimEvent<P> {
    pub time: u64,
    pub kind: SimEventKind<P>,
}

/// What a handler observes while a run executes.
#[derive(Clone, Debug)]
pub enum Occurrence<P> {
    Delivered(Delivery<P>),
    Changed(ChangeNotice),
}

/// Handed to handlers so they can inspect the topology and emit messages.
pub struct Outbox<'a, P> {
    topology: &'a Topology,
    now: u64,
    out: Vec<Outgoing<P>>,
}

impl<'a, P> Outbox<'a, P> {
    pub fn topology(&self) -> &'a Topology {
        self.topology
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn send(&mut self, msg: Outgoing<P>) {
        self.out.push(msg);
    }
}

/// Counters for one call to [`Network::exchange`] or [`Network::run`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OpStats {
    pub messages: u64,
    pub requests: u64,
    pub links: u64,
    /// Messages whose path was cut by a change while in flight.
    pub dropped: u64,
    pub end_time: u64,
}

enum Action<P> {
    Send(Outgoing<P>),
    Deliver { msg: Outgoing<P>, links: Vec<LinkId>, version: u64 },
    Change(Change),
}

struct Scheduled<P> {
    time: u64,
    seq: u64,
    action: Action<P>,
}

impl<P> PartialEq for Scheduled<P> {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl<P> Eq for Scheduled<P> {}

impl<P> PartialOrd for Scheduled<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Scheduled<P> {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// A topology plus the machinery that moves messages across it and accounts for them.
#[derive(Clone, Debug)]
pub struct Network {
    topology: Topology,
    config: SimConfig,
    clock: u64,
    events: u64,
    next_op: u64,
    trace: TraceLog,
    link_usage: Vec<u64>,
    request_receipts: Vec<u64>,
    paths: HashMap<NodeId, BfsTree>,
    paths_version: u64,
}

impl Network {
    pub fn new(topology: Topology) -> Self {
        Self::with_config(topology, SimConfig::default())
    }

    pub fn with_config(topology: Topology, config: SimConfig) -> Self {
        let paths_version = topology.version();
        Network {
            topology,
            config,
            clock: 0,
            events: 0,
            next_op: 0,
            trace: TraceLog::new(config.trace),
            link_usage: Vec::new(),
            request_receipts: Vec::new(),
            paths: HashMap::new(),
            paths_version,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn config(&self) -> SimConfig {
        self.config
    }

    pub fn now(&self) -> u64 {
        self.clock
    }

    /// Events processed so far (deliveries and topology changes).
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn trace(&self) -> &TraceLog {
        &self.trace
    }

    pub fn link_usage(&self, link: LinkId) -> u64 {
        self.link_usage.get(link.0 as usize).copied().unwrap_or(0)
    }

    pub fn total_link_usage(&self) -> u64 {
        self.link_usage.iter().sum()
    }

    /// Request messages delivered to each node so far, indexed by `NodeId.0`.
    pub fn request_receipts(&self) -> &[u64] {
        &self.request_receipts
    }

    pub fn begin_op(&mut self) -> OpId {
        self.next_op += 1;
        OpId(self.next_op)
    }

    fn charge_event(&mut self) -> Result<(), SimError> {
        self.events += 1;
        if self.events > self.config.event_budget {
            return Err(SimError::BudgetExhausted { budget: self.config.event_budget });
        }
        Ok(())
    }

    pub fn apply_change(&mut self, change: Change) -> Result<ChangeNotice, SimError> {
        self.charge_event()?;
        let notice = self.topology.apply_change(change)?;
        Ok(notice)
    }

    fn tree(&mut self, root: NodeId) -> &BfsTree {
        if self.paths_version != self.topology.version() {
            self.paths.clear();
            self.paths_version = self.topology.version();
        }
        let topology = &self.topology;
        self.paths.entry(root).or_insert_with(|| topology.bfs(root))
    }

    /// Links of the current shortest path, lowest node ids first on ties.
    pub fn route(&mut self, src: NodeId, dst: NodeId) -> Result<Vec<LinkId>, SimError> {
        if !self.topology.contains(src) {
            return Err(SimError::UnknownNode(src));
        }
        if !self.topology.contains(dst) {
            return Err(SimError::UnknownNode(dst));
        }
        if src == dst {
            return Ok(Vec::new());
        }
        if let Some(l) = self.topology.link_between(src, dst) {
            return Ok(vec![l]);
        }
        self.tree(src).path_links(dst).ok_or(SimError::Unreachable { from: src, to: dst })
    }

    pub fn distance(&mut self, src: NodeId, dst: NodeId) -> Result<u32, SimError> {
        if src == dst {
            return Ok(0);
        }
        if self.topology.link_between(src, dst).is_some() {
            return Ok(1);
        }
        if !self.topology.contains(src) {
            return Err(SimError::UnknownNode(src));
        }
        self.tree(src).distance(dst).ok_or(SimError::Unreachable { from: src, to: dst })
    }

    /// Sends `initial` and lets `handler` react to every delivery until no message is in flight.
    pub fn exchange<P, F>(
        &mut self,
        op: OpId,
        initial: Vec<Outgoing<P>>,
        handler: F,
    ) -> Result<OpStats, SimError>
    where
        F: FnMut(&mut Outbox<'_, P>, Delivery<P>),
    {
        let now = self.clock;
        let events =
            initial.into_iter().map(|m| SimEvent { time: now, kind: SimEventKind::Send(m) }).collect();
        let mut handler = handler;
        self.run(op, events, |outbox, occ| {
            if let Occurrence::Delivered(d) = occ {
                handler(outbox, d)
            }
        })
    }

    /// Executes scripted sends and topology changes to quiescence.
    pub fn run<P, F>(
        &mut self,
        op: OpId,
        events: Vec<SimEvent<P>>,
        mut handler: F,
    ) -> Result<OpStats, SimError>
    where
        F: FnMut(&mut Outbox<'_, P>, Occurrence<P>),
    {
        let mut queue: BinaryHeap<Scheduled<P>> = BinaryHeap::new();
        let mut seq = 0u64;
        let start = self.clock;
        for ev in events {
            let action = match ev.kind {
                SimEventKind::Send(m) => Action::Send(m),
                SimEventKind::Change(c) => Action::Change(c),
            };
            queue.push(Scheduled { time: start.max(ev.time), seq, action });
            seq += 1;
        }
        let mut stats = OpStats { end_time: start, ..Default::default() };

        while let Some(Scheduled { time, action, .. }) = queue.pop() {
            self.clock = self.clock.max(time);
            let occurrence = match action {
                Action::Send(msg) => {
                    let links = self.route(msg.src, msg.dst)?;
                    let at = self.clock + links.len() as u64;
                    let version = self.topology.version();
                    queue.push(Scheduled { time: at, seq, action: Action::Deliver { msg, links, version } });
                    seq += 1;
                    continue;
                }
                Action::Deliver { msg, links, version } => {
                    self.charge_event()?;
                    if version != self.topology.version()
                        && (!self.topology.contains(msg.dst)
                            || links.iter().any(|&l| !self.topology.has_link(l)))
                    {
                        stats.dropped += 1;
                        continue;
                    }
                    self.account(op, &msg, &links, &mut stats);
                    Occurrence::Delivered(Delivery {
                        time: self.clock,
                        src: msg.src,
                        dst: msg.dst,
                        kind: msg.kind,
                        hops: links.len() as u32,
                        payload: msg.payload,
                    })
                }
                Action::Change(change) => Occurrence::Changed(self.apply_change(change)?),
            };
            let mut outbox = Outbox { topology: &self.topology, now: self.clock, out: Vec::new() };
            handler(&mut outbox, occurrence);
            for msg in outbox.out {
                queue.push(Scheduled { time: self.clock, seq, action: Action::Send(msg) });
                seq += 1;
            }
        }
        stats.end_time = self.clock;
        Ok(stats)
    }

    fn account<P>(&mut self, op: OpId, msg: &Outgoing<P>, links: &[LinkId], stats: &mut OpStats) {
        for &l in links {
            let i = l.0 as usize;
            if self.link_usage.len() <= i {
                self.link_usage.resize(self.topology.link_bound().max(i + 1), 0);
            }
            self.link_usage[i] += 1;
        }
        if msg.kind == MsgKind::Request {
            let i = msg.dst.0 as usize;
            if self.request_receipts.len() <= i {
                self.request_receipts.resize(self.topology.id_bound().max(i + 1), 0);
            }
            self.request_receipts[i] += 1;
            stats.requests += 1;
        }
        stats.messages += 1;
        stats.links += links.len() as u64;
        self.trace.push(TraceRecord {
            time: self.clock,
            op,
            kind: msg.kind,
            src: msg.src,
            dst: msg.dst,
            size: msg.size,
            links: links.to_vec(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::TopologyKind;

    fn full(t: Topology) -> Network {
        Network::with_config(t, SimConfig { trace: TraceMode::Full, ..Default::default() })
    }

    #[test]
    fn delivery_time_is_hop_count() {
        let mut net = full(Topology::build(TopologyKind::Chain, 6, 0).unwrap());
        let op = net.begin_op();
        let mut seen = Vec::new();
        let stats = net
            .exchange(op, vec![Outgoing::new(NodeId(0), NodeId(5), MsgKind::Request, ())], |_, d| {
                seen.push((d.time, d.hops))
            })
            .unwrap();
        assert_eq!(seen, vec![(5, 5)]);
        assert_eq!(stats.links, 5);
        assert_eq!(net.total_link_usage(), 5);
        assert_eq!(net.request_receipts()[5], 1);
    }

    #[test]
    fn ping_pong_follows_time_order() {
        let mut net = full(Topology::build(TopologyKind::Ring, 5, 0).unwrap());
        let op = net.begin_op();
        let mut bounces = 0;
        net.exchange(op, vec![Outgoing::new(NodeId(0), NodeId(2), MsgKind::Request, 3u32)], |out, d| {
            bounces += 1;
            if d.payload > 0 {
                out.send(Outgoing::new(d.dst, d.src, MsgKind::Reply, d.payload - 1));
            }
        })
        .unwrap();
        assert_eq!(bounces, 4);
        let times: Vec<u64> = net.trace().records().iter().map(|r| r.time).collect();
        assert_eq!(times, vec![2, 4, 6, 8]);
    }

    #[test]
    fn budget_aborts_livelock() {
        let t = Topology::build(TopologyKind::Complete, 3, 0).unwrap();
        let mut net = Network::with_config(t, SimConfig { event_budget: 100, ..Default::default() });
        let op = net.begin_op();
        let err = net
            .exchange(op, vec![Outgoing::new(NodeId(0), NodeId(1), MsgKind::Control, ())], |out, d| {
                out.send(Outgoing::new(d.dst, d.src, MsgKind::Control, ()))
            })
            .unwrap_err();
        assert_eq!(err, SimError::BudgetExhausted { budget: 100 });
    }

    #[test]
    fn in_flight_message_dropped_when_path_is_cut() {
        let mut net = full(Topology::build(TopologyKind::Ring, 6, 0).unwrap());
        let op = net.begin_op();
        let events = vec![
            SimEvent { time: 0, kind: SimEventKind::Send(Outgoing::new(NodeId(0), NodeId(2), MsgKind::Request, ())) },
            SimEvent { time: 1, kind: SimEventKind::Change(Change::Leave(NodeId(1))) },
        ];
        let stats = net.run(op, events, |_, _| {}).unwrap();
        assert_eq!(stats.dropped, 1);
        assert_eq!(stats.messages, 0);
    }
}
