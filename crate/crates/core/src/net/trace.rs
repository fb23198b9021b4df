use std::fmt::Write as _;

use super::{LinkId, NodeId};

/// Identifier attached to every message of one protocol operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MsgKind {
    /// A question sent to locate data; what the request metrics count.
    Request,
    Reply,
    /// A request relayed by a router on its way to the final destination.
    Forward,
    /// Maintenance traffic: gossip rounds, table updates, record transfers.
    Control,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceMode {
    /// Keep counters only.
    #[default]
    Summary,
    /// Keep one record per delivered message.
    Full,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: u64,
    pub op: OpId,
    pub kind: MsgKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub size: u64,
    pub links: Vec<LinkId>,
}

impl TraceRecord {
    pub fn hops(&self) -> usize {
        self.links.len()
    }
}

/// Every delivered message, in delivery order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceLog {
    mode: TraceMode,
    records: Vec<TraceRecord>,
    delivered: u64,
    links: u64,
}

impl TraceLog {
    pub fn new(mode: TraceMode) -> Self {
        TraceLog { mode, ..Default::default() }
    }

    pub fn mode(&self) -> TraceMode {
        self.mode
    }

    pub(crate) fn push(&mut self, record: TraceRecord) {
        self.delivered += 1;
        self.links += record.links.len() as u64;
        if self.mode == TraceMode::Full {
            self.records.push(record);
        }
    }

    /// Empty in summary mode.
    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    /// Sum of hop counts over all delivered messages.
    pub fn total_links(&self) -> u64 {
        self.links
    }

    pub fn for_op(&self, op: OpId) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.op == op)
    }

    /// One line per message: `time src dst hops link,link,...` (`-` when no links).
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let links = if r.links.is_empty() {
                "-".to_string()
            } else {
                r.links.iter().map(|l| l.0.to_string()).collect::<Vec<_>>().join(",")
            };
            let _ = writeln!(out, "{} {} {} {} {}", r.time, r.src, r.dst, r.links.len(), links);
        }
        out
    }
}
