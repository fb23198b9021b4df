//! Workload driver that turns protocol runs into metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::directory::{CentralDirectory, Dns, DnsLayout, EmbeddedRouting, GossipDirectory};
use crate::error::ProtocolError;
use crate::explore::{Flooding, RandomWalk};
use crate::hash::{Chord, ConsistentHashing, Keyspace, DEFAULT_KEY_BITS};
use crate::net::{Change, Network, NodeId};
use crate::proto::{DataId, NameAfterMove, PlacementRequest, Protocol, ProtocolKind, ReconfigTrace, TableStats};

/// Protocol knobs that are not part of the topology.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolParams {
    pub key_bits: u8,
    pub ttl: Option<u32>,
    pub walkers: u32,
    /// DNS only; `None` means one zone.
    pub dns_arity: Option<usize>,
    /// IP routing only: sibling-merge every table.
    pub aggregate: bool,
    pub seed: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams { key_bits: DEFAULT_KEY_BITS, ttl: None, walkers: 1, dns_arity: Some(2), aggregate: false, seed: 0 }
    }
}

pub type BoxedProtocol = Box<dyn Protocol + Send>;

pub fn build_protocol(kind: ProtocolKind, net: Network, params: &ProtocolParams) -> Result<BoxedProtocol, ProtocolError> {
    Ok(match kind {
        ProtocolKind::Central => Box::new(CentralDirectory::new(net)),
        ProtocolKind::Gossip => Box::new(GossipDirectory::new(net)),
        ProtocolKind::Dns => {
            let layout = match params.dns_arity {
                Some(arity) => DnsLayout::Balanced { arity },
                None => DnsLayout::Flat,
            };
            Box::new(Dns::new(net, layout)?)
        }
        ProtocolKind::IpRouting => {
            let mut p = EmbeddedRouting::new(net);
            if params.aggregate {
                p.aggregate_all();
            }
            Box::new(p)
        }
        ProtocolKind::Dht => Box::new(Chord::new(net, Keyspace::new(params.key_bits))),
        ProtocolKind::ConsistentHashing => Box::new(ConsistentHashing::new(net, Keyspace::new(params.key_bits))),
        ProtocolKind::Flooding => Box::new(Flooding::new(net, params.ttl)),
        ProtocolKind::RandomWalk => Box::new(RandomWalk::new(net, params.ttl, params.walkers, params.seed)),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Each object prefers a uniformly random node.
    #[default]
    Random,
    /// Every object prefers the node of largest eccentricity, least connected first.
    Farthest,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Workload {
    pub d: usize,
    pub lookups: usize,
    /// Scripted as join, readdress, leave, readdress, repeated.
    pub changes: usize,
    pub relocations: usize,
    pub placement: Placement,
    pub seed: u64,
}

impl Workload {
    /// `10 * d` lookups, 8 changes, up to 4 relocations.
    pub fn new(d: usize, seed: u64) -> Self {
        Workload { d, lookups: 10 * d, changes: 8, relocations: 4, placement: Placement::Random, seed }
    }
}

/// One CSV row of results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub protocol: String,
    pub n: usize,
    pub d: usize,
    pub max_table_size: usize,
    pub table_count: usize,
    pub mean_lookup_requests: f64,
    pub mean_links_used: f64,
    pub reconfig_messages: u64,
    pub manual_intervention: bool,
}

/// A [`MetricsRecord`] plus the evidence the audit needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub record: MetricsRecord,
    pub lookups: usize,
    pub success_rate: f64,
    pub mean_hops: f64,
    /// Largest fraction of all lookup requests received by a single node.
    pub max_request_share: f64,
    /// Lookups that claimed success at a node not holding the data.
    pub untruthful: usize,
    pub changes: usize,
    pub reconfig: ReconfigTrace,
    pub name_accepted: bool,
    pub placement_honored: bool,
    pub name_stable: bool,
    pub events: u64,
}

impl Measurement {
    fn per_change(&self, v: u64) -> f64 {
        if self.changes == 0 {
            0.0
        } else {
            v as f64 / self.changes as f64
        }
    }

    pub fn mean_reconfig_messages(&self) -> f64 {
        self.per_change(self.reconfig.messages)
    }

    pub fn mean_tables_updated(&self) -> f64 {
        self.per_change(self.reconfig.tables_updated)
    }

    pub fn mean_records_moved(&self) -> f64 {
        self.per_change(self.reconfig.records_moved)
    }

    /// Links per lookup request; the per-request path length.
    pub fn links_per_request(&self) -> f64 {
        if self.record.mean_lookup_requests == 0.0 {
            0.0
        } else {
            self.record.mean_links_used / self.record.mean_lookup_requests
        }
    }
}

fn high_water(acc: &mut TableStats, now: TableStats) {
    acc.max_table_size = acc.max_table_size.max(now.max_table_size);
    acc.table_count = acc.table_count.max(now.table_count);
}

fn random_node(rng: &mut ChaCha8Rng, nodes: &[NodeId]) -> NodeId {
    nodes[rng.random_range(0..nodes.len())]
}

fn farthest_node(net: &Network) -> NodeId {
    let topo = net.topology();
    let mut best: Option<(u32, usize, NodeId)> = None;
    for v in topo.nodes() {
        let (e, deg) = (topo.eccentricity(v), topo.neighbors(v).count());
        if best.is_none_or(|(b, bd, _)| e > b || (e == b && deg < bd)) {
            best = Some((e, deg, v));
        }
    }
    best.map_or(NodeId(0), |(_, _, v)| v)
}

/// Stores `d` objects, settles, runs the lookups, injects the changes and relocations.
pub fn measure(protocol: &mut dyn Protocol, workload: &Workload) -> Result<Measurement, ProtocolError> {
    let mut rng = ChaCha8Rng::seed_from_u64(workload.seed);
    let n = protocol.network().topology().len();
    let events_before = protocol.network().events();
    let mut tables = TableStats::default();
    let mut accepted = true;
    let mut honored = true;
    let mut stable = true;

    let nodes = protocol.network().topology().node_ids();
    let anchor = match workload.placement {
        Placement::Farthest => Some(farthest_node(protocol.network())),
        Placement::Random => None,
    };
    let mut names: Vec<DataId> = Vec::with_capacity(workload.d);
    for i in 0..workload.d {
        let name = DataId::new(protocol.conventional_name(&format!("obj-{i}"), i))?;
        let preferred = match anchor {
            Some(a) => a,
            None => random_node(&mut rng, &nodes),
        };
        let out = protocol.store(PlacementRequest::new(name.clone(), Some(preferred)))?;
        accepted &= out.name_accepted && out.name == name;
        honored &= out.placement_honored && out.stored_at == preferred;
        stable &= out.name_after_move == NameAfterMove::Stable;
        names.push(out.name);
    }
    protocol.settle()?;
    high_water(&mut tables, protocol.tables());

    let receipts_before = protocol.network().request_receipts().to_vec();
    let (mut requests, mut links, mut hops, mut successes, mut untruthful) = (0u64, 0u64, 0u64, 0usize, 0usize);
    if !names.is_empty() {
        for _ in 0..workload.lookups {
            let name = &names[rng.random_range(0..names.len())];
            let holder = protocol.holder(name);
            let live: Vec<NodeId> =
                protocol.network().topology().node_ids().into_iter().filter(|&v| Some(v) != holder || n == 1).collect();
            let origin = random_node(&mut rng, &live);
            let trace = protocol.locate(name, origin)?;
            requests += trace.requests;
            links += trace.links_used;
            hops += trace.hops;
            if trace.success {
                if trace.resolved_at.is_some() && trace.resolved_at == protocol.holder(name) {
                    successes += 1;
                } else {
                    untruthful += 1;
                }
            }
        }
    }
    let receipts = protocol.network().request_receipts();
    let max_received = receipts
        .iter()
        .enumerate()
        .map(|(i, &r)| r - receipts_before.get(i).copied().unwrap_or(0))
        .max()
        .unwrap_or(0);
    let lookups = if names.is_empty() { 0 } else { workload.lookups };
    let max_request_share = if requests == 0 { 0.0 } else { max_received as f64 / requests as f64 };

    let mut reconfig = ReconfigTrace::default();
    let mut joined: Vec<NodeId> = Vec::new();
    let mut applied = 0;
    for step in 0..workload.changes {
        let live = protocol.network().topology().node_ids();
        let change = match step % 4 {
            0 => {
                let mut links = vec![random_node(&mut rng, &live)];
                if live.len() > 1 {
                    loop {
                        let w = random_node(&mut rng, &live);
                        if w != links[0] {
                            links.push(w);
                            break;
                        }
                    }
                }
                Change::Join { links }
            }
            2 if !joined.is_empty() => Change::Leave(joined.pop().unwrap_or(NodeId(0))),
            _ => {
                let v = random_node(&mut rng, &live);
                Change::Readdress(v, protocol.network().topology().fresh_address())
            }
        };
        let (notice, trace) = protocol.change(change)?;
        if let crate::net::ChangeNotice::Joined { node, .. } = notice {
            joined.push(node);
        }
        reconfig.absorb(&trace);
        applied += 1;
        if trace.manual_intervention {
            protocol.manual_update()?;
        }
        protocol.settle()?;
        high_water(&mut tables, protocol.tables());
    }

    let moves = workload.relocations.min(names.len());
    for slot in names.iter_mut().take(moves) {
        let name = slot.clone();
        let live = protocol.network().topology().node_ids();
        let Some(from) = protocol.holder(&name) else { continue };
        if live.len() < 2 {
            break;
        }
        let to = loop {
            let v = random_node(&mut rng, &live);
            if v != from {
                break v;
            }
        };
        let renamed = protocol.relocate(&name, to)?;
        stable &= renamed == name;
        *slot = renamed;
        protocol.settle()?;
        high_water(&mut tables, protocol.tables());
    }

    let q = lookups.max(1) as f64;
    Ok(Measurement {
        record: MetricsRecord {
            protocol: protocol.kind().label().to_string(),
            n,
            d: workload.d,
            max_table_size: tables.max_table_size,
            table_count: tables.table_count,
            mean_lookup_requests: requests as f64 / q,
            mean_links_used: links as f64 / q,
            reconfig_messages: reconfig.messages,
            manual_intervention: reconfig.manual_intervention,
        },
        lookups,
        success_rate: if lookups == 0 { 1.0 } else { successes as f64 / lookups as f64 },
        mean_hops: hops as f64 / q,
        max_request_share,
        untruthful,
        changes: applied,
        reconfig,
        name_accepted: accepted,
        placement_honored: honored,
        name_stable: stable,
        events: protocol.network().events() - events_before,
    })
}
