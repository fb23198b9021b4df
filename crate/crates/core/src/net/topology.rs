//! Simulated physical network: nodes, undirected links and addresses.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::TopologyError;

/// Identifier of a simulated node. Never reused within one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub u32);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Network-level location identifier: the low `width` bits of the value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub u128);

impl Address {
    pub fn to_bits(self, width: u8) -> String {
        (0..width)
            .rev()
            .map(|i| if (self.0 >> i) & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn from_bits(bits: &str) -> Option<Address> {
        if bits.is_empty() || bits.len() > 128 {
            return None;
        }
        let mut value = 0u128;
        for c in bits.chars() {
            value = (value << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return None,
                };
        }
        Some(Address(value))
    }

    pub fn fits(self, width: u8) -> bool {
        width >= 128 || self.0 >> width == 0
    }
}

pub const DEFAULT_ADDRESS_WIDTH: u8 = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TopologyKind {
    Chain,
    Ring,
    Complete,
    BalancedTree { arity: u32 },
    RandomConnected { p: f64 },
    /// Clique on the first half of the nodes with a path hanging off it.
    Lollipop,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Chain => write!(f, "chain"),
            TopologyKind::Ring => write!(f, "ring"),
            TopologyKind::Complete => write!(f, "complete"),
            TopologyKind::BalancedTree { arity } => write!(f, "balanced-tree({arity})"),
            TopologyKind::RandomConnected { p } => write!(f, "random-connected({p})"),
            TopologyKind::Lollipop => write!(f, "lollipop"),
        }
    }
}

impl FromStr for TopologyKind {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(open) if s.ends_with(')') => (&s[..open], Some(&s[open + 1..s.len() - 1])),
            Some(_) => return Err(TopologyError::UnknownKind(s.to_string())),
            None => (s, None),
        };
        let bad = || TopologyError::UnknownKind(s.to_string());
        match (name, arg) {
            ("chain", None) => Ok(TopologyKind::Chain),
            ("ring", None) => Ok(TopologyKind::Ring),
            ("complete", None) => Ok(TopologyKind::Complete),
            ("lollipop", None) => Ok(TopologyKind::Lollipop),
            ("balanced-tree" | "tree", None) => Ok(TopologyKind::BalancedTree { arity: 2 }),
            ("balanced-tree" | "tree", Some(a)) => {
                let arity: u32 = a.trim().parse().map_err(|_| bad())?;
                if arity == 0 {
                    return Err(bad());
                }
                Ok(TopologyKind::BalancedTree { arity })
            }
            ("random-connected" | "random", Some(p)) => {
                let p: f64 = p.trim().parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(bad());
                }
                Ok(TopologyKind::RandomConnected { p })
            }
            _ => Err(bad()),
        }
    }
}

/// A permanent topology modification.
#[derive(Clone, Debug, PartialEq)]
pub enum Change {
    Join { links: Vec<NodeId> },
    Leave(NodeId),
    Readdress(NodeId, Address),
}

/// What actually happened, handed to protocols after a change was applied.
#[derive(Clone, Debug, PartialEq)]
pub enum ChangeNotice {
    Joined { node: NodeId, address: Address, links: Vec<NodeId> },
    Left { node: NodeId, address: Address, neighbors: Vec<NodeId> },
    Readdressed { node: NodeId, old: Address, new: Address },
}

impl ChangeNotice {
    pub fn node(&self) -> NodeId {
        match self {
            ChangeNotice::Joined { node, .. }
            | ChangeNotice::Left { node, .. }
            | ChangeNotice::Readdressed { node, .. } => *node,
        }
    }
}

/// Breadth-first search tree rooted at one node, indexed by `NodeId.0`.
#[derive(Clone, Debug)]
pub struct BfsTree {
    pub root: NodeId,
    dist: Vec<u32>,
    parent: Vec<Option<(NodeId, LinkId)>>,
}

const UNREACHED: u32 = u32::MAX;

impl BfsTree {
    pub fn distance(&self, to: NodeId) -> Option<u32> {
        match self.dist.get(to.0 as usize) {
            Some(&d) if d != UNREACHED => Some(d),
            _ => None,
        }
    }

    /// Links from the root to `to`, in traversal order.
    pub fn path_links(&self, to: NodeId) -> Option<Vec<LinkId>> {
        self.distance(to)?;
        let mut links = Vec::new();
        let mut cur = to;
        while cur != self.root {
            let (parent, link) = self.parent[cur.0 as usize]?;
            links.push(link);
            cur = parent;
        }
        links.reverse();
        Some(links)
    }

    pub fn eccentricity(&self) -> u32 {
        self.dist.iter().copied().filter(|&d| d != UNREACHED).max().unwrap_or(0)
    }

    pub fn reached(&self) -> usize {
        self.dist.iter().filter(|&&d| d != UNREACHED).count()
    }
}

#[derive(Clone, Debug)]
pub struct Topology {
    kind: TopologyKind,
    width: u8,
    nodes: BTreeMap<NodeId, Address>,
    by_address: BTreeMap<Address, NodeId>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
    links: BTreeMap<(NodeId, NodeId), LinkId>,
    live_links: Vec<bool>,
    next_node: u32,
    next_link: u32,
    next_address: u128,
    version: u64,
}

fn edge_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Topology {
    fn empty(kind: TopologyKind, width: u8) -> Self {
        Topology {
            kind,
            width,
            nodes: BTreeMap::new(),
            by_address: BTreeMap::new(),
            adjacency: BTreeMap::new(),
            links: BTreeMap::new(),
            live_links: Vec::new(),
            next_node: 0,
            next_link: 0,
            next_address: 0,
            version: 0,
        }
    }

    pub fn build(kind: TopologyKind, n: usize, seed: u64) -> Result<Self, TopologyError> {
        Self::build_with_width(kind, n, seed, DEFAULT_ADDRESS_WIDTH)
    }

    pub fn build_with_width(
        kind: TopologyKind,
        n: usize,
        seed: u64,
        width: u8,
    ) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        if width == 0 || width > 128 || (width < 64 && (n as u128) > (1u128 << width)) {
            return Err(TopologyError::AddressSpace { n, width });
        }
        let mut t = Topology::empty(kind, width);
        let ids: Vec<NodeId> = (0..n).map(|_| t.add_node()).collect();
        match kind {
            TopologyKind::Chain => {
                for w in ids.windows(2) {
                    t.add_link(w[0], w[1]);
                }
            }
            TopologyKind::Ring => {
                for w in ids.windows(2) {
                    t.add_link(w[0], w[1]);
                }
                if n >= 3 {
                    t.add_link(ids[n - 1], ids[0]);
                }
            }
            TopologyKind::Complete => {
                for i in 0..n {
                    for j in i + 1..n {
                        t.add_link(ids[i], ids[j]);
                    }
                }
            }
            TopologyKind::BalancedTree { arity } => {
                if arity == 0 {
                    return Err(TopologyError::UnknownKind(kind.to_string()));
                }
                for i in 1..n {
                    t.add_link(ids[(i - 1) / arity as usize], ids[i]);
                }
            }
            TopologyKind::RandomConnected { p } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random_bool(p) {
                            t.add_link(ids[i], ids[j]);
                        }
                    }
                }
                t.repair_connectivity(&mut rng);
            }
            TopologyKind::Lollipop => {
                let clique = n.div_ceil(2);
                for i in 0..clique {
                    for j in i + 1..clique {
                        t.add_link(ids[i], ids[j]);
                    }
                }
                for i in clique..n {
                    t.add_link(ids[i - 1], ids[i]);
                }
            }
        }
        debug_assert!(t.is_connected());
        Ok(t)
    }

    /// Joins every component to the one holding the smallest node id.
    fn repair_connectivity(&mut self, rng: &mut ChaCha8Rng) {
        let components = self.components();
        if components.len() <= 1 {
            return;
        }
        let mut main: Vec<NodeId> = components[0].clone();
        for comp in &components[1..] {
            let a = main[rng.random_range(0..main.len())];
            let b = comp[rng.random_range(0..comp.len())];
            self.add_link(a, b);
            main.extend(comp.iter().copied());
        }
    }

    fn components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &start in self.nodes.keys() {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[&u] {
                    if seen.insert(v) {
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort();
            out.push(comp);
        }
        out
    }

    fn add_node(&mut self) -> NodeId {
        let id = NodeId(self.next_node);
        self.next_node += 1;
        let address = Address(self.next_address);
        self.next_address += 1;
        self.nodes.insert(id, address);
        self.by_address.insert(address, id);
        self.adjacency.insert(id, BTreeSet::new());
        id
    }

    fn add_link(&mut self, a: NodeId, b: NodeId) -> LinkId {
        if let Some(&l) = self.links.get(&edge_key(a, b)) {
            return l;
        }
        let l = LinkId(self.next_link);
        self.next_link += 1;
        self.live_links.push(true);
        self.links.insert(edge_key(a, b), l);
        self.adjacency.get_mut(&a).expect("live node").insert(b);
        self.adjacency.get_mut(&b).expect("live node").insert(a);
        l
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn address_width(&self) -> u8 {
        self.width
    }

    /// Bumped on every applied change.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.links.len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.nodes.contains_key(&node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.keys().copied().collect()
    }

    /// Upper bound (exclusive) on every `NodeId.0` ever issued.
    pub fn id_bound(&self) -> usize {
        self.next_node as usize
    }

    pub fn link_bound(&self) -> usize {
        self.next_link as usize
    }

    pub fn address(&self, node: NodeId) -> Option<Address> {
        self.nodes.get(&node).copied()
    }

    pub fn node_at(&self, address: Address) -> Option<NodeId> {
        self.by_address.get(&address).copied()
    }

    pub fn addresses(&self) -> impl Iterator<Item = (NodeId, Address)> + '_ {
        self.nodes.iter().map(|(&n, &a)| (n, a))
    }

    /// An address that no live node holds and that was never handed out by the builder.
    pub fn fresh_address(&self) -> Address {
        let mut a = self.next_address;
        while self.by_address.contains_key(&Address(a)) {
            a += 1;
        }
        Address(a)
    }

    pub fn neighbors(&self, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency.get(&node).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adjacency.get(&node).map_or(0, |s| s.len())
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.links.get(&edge_key(a, b)).copied()
    }

    pub fn has_link(&self, link: LinkId) -> bool {
        self.live_links.get(link.0 as usize).copied().unwrap_or(false)
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, LinkId)> + '_ {
        self.links.iter().map(|(&(a, b), &l)| (a, b, l))
    }

    pub fn bfs(&self, root: NodeId) -> BfsTree {
        let bound = self.id_bound();
        let mut dist = vec![UNREACHED; bound];
        let mut parent = vec![None; bound];
        if self.contains(root) {
            dist[root.0 as usize] = 0;
            let mut queue = VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                let du = dist[u.0 as usize];
                for v in self.neighbors(u) {
                    if dist[v.0 as usize] == UNREACHED {
                        dist[v.0 as usize] = du + 1;
                        parent[v.0 as usize] = Some((u, self.links[&edge_key(u, v)]));
                        queue.push_back(v);
                    }
                }
            }
        }
        BfsTree { root, dist, parent }
    }

    pub fn is_connected(&self) -> bool {
        match self.nodes.keys().next() {
            None => true,
            Some(&first) => self.bfs(first).reached() == self.len(),
        }
    }

    pub fn eccentricity(&self, node: NodeId) -> u32 {
        self.bfs(node).eccentricity()
    }

    /// Longest shortest path over all node pairs.
    pub fn diameter(&self) -> u32 {
        self.nodes().map(|n| self.eccentricity(n)).max().unwrap_or(0)
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> Option<u32> {
        self.bfs(a).distance(b)
    }

    /// Applies a change in place, refusing anything that would disconnect the graph.
    pub fn apply_change(&mut self, change: Change) -> Result<ChangeNotice, TopologyError> {
        let notice = match change {
            Change::Join { links } => {
                let mut targets = BTreeSet::new();
                for &l in &links {
                    if !self.contains(l) {
                        return Err(TopologyError::UnknownNode(l));
                    }
                    if !targets.insert(l) {
                        return Err(TopologyError::DuplicateLink(l));
                    }
                }
                if targets.is_empty() && !self.is_empty() {
                    return Err(TopologyError::WouldDisconnect);
                }
                let address = self.fresh_address();
                if !address.fits(self.width) {
                    return Err(TopologyError::AddressSpace { n: self.len() + 1, width: self.width });
                }
                let node = NodeId(self.next_node);
                self.next_node += 1;
                self.next_address = self.next_address.max(address.0 + 1);
                self.nodes.insert(node, address);
                self.by_address.insert(address, node);
                self.adjacency.insert(node, BTreeSet::new());
                for &t in &targets {
                    self.add_link(node, t);
                }
                ChangeNotice::Joined { node, address, links: targets.into_iter().collect() }
            }
            Change::Leave(node) => {
                let address = self.address(node).ok_or(TopologyError::UnknownNode(node))?;
                if self.len() == 1 {
                    return Err(TopologyError::WouldDisconnect);
                }
                if !self.connected_without(node) {
                    return Err(TopologyError::WouldDisconnect);
                }
                let neighbors: Vec<NodeId> = self.neighbors(node).collect();
                for &v in &neighbors {
                    if let Some(l) = self.links.remove(&edge_key(node, v)) {
                        self.live_links[l.0 as usize] = false;
                    }
                    self.adjacency.get_mut(&v).expect("live neighbor").remove(&node);
                }
                self.adjacency.remove(&node);
                self.nodes.remove(&node);
                self.by_address.remove(&address);
                ChangeNotice::Left { node, address, neighbors }
            }
            Change::Readdress(node, new) => {
                let old = self.address(node).ok_or(TopologyError::UnknownNode(node))?;
                if !new.fits(self.width) {
                    return Err(TopologyError::AddressOutOfRange(new));
                }
                if let Some(holder) = self.node_at(new) {
                    if holder != node {
                        return Err(TopologyError::AddressInUse(new));
                    }
                }
                self.by_address.remove(&old);
                self.by_address.insert(new, node);
                self.nodes.insert(node, new);
                self.next_address = self.next_address.max(new.0 + 1);
                ChangeNotice::Readdressed { node, old, new }
            }
        };
        self.version += 1;
        Ok(notice)
    }

    fn connected_without(&self, removed: NodeId) -> bool {
        let Some(start) = self.nodes.keys().copied().find(|&n| n != removed) else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in self.neighbors(u) {
                if v != removed && seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen.len() == self.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_and_complete_diameters() {
        let chain = Topology::build(TopologyKind::Chain, 5, 0).unwrap();
        assert_eq!(chain.diameter(), 4);
        let complete = Topology::build(TopologyKind::Complete, 8, 0).unwrap();
        assert_eq!(complete.diameter(), 1);
        let single = Topology::build(TopologyKind::Ring, 1, 0).unwrap();
        assert_eq!(single.diameter(), 0);
    }

    #[test]
    fn rejects_empty_and_unknown() {
        assert!(matches!(Topology::build(TopologyKind::Chain, 0, 0), Err(TopologyError::Empty)));
        assert!("hypercube".parse::<TopologyKind>().is_err());
        assert!("random-connected(1.5)".parse::<TopologyKind>().is_err());
        assert_eq!(
            "balanced-tree(3)".parse::<TopologyKind>().unwrap(),
            TopologyKind::BalancedTree { arity: 3 }
        );
    }

    #[test]
    fn leave_refuses_cut_vertex() {
        let mut chain = Topology::build(TopologyKind::Chain, 4, 0).unwrap();
        assert!(matches!(
            chain.apply_change(Change::Leave(NodeId(1))),
            Err(TopologyError::WouldDisconnect)
        ));
        assert!(chain.apply_change(Change::Leave(NodeId(3))).is_ok());
        assert_eq!(chain.len(), 3);
    }

    #[test]
    fn readdress_changes_one_entry() {
        let mut t = Topology::build(TopologyKind::Ring, 6, 0).unwrap();
        let before: Vec<_> = t.addresses().collect();
        let fresh = t.fresh_address();
        t.apply_change(Change::Readdress(NodeId(3), fresh)).unwrap();
        let after: Vec<_> = t.addresses().collect();
        let differing = before.iter().zip(&after).filter(|(a, b)| a != b).count();
        assert_eq!(differing, 1);
        assert_eq!(t.node_at(fresh), Some(NodeId(3)));
        assert!(matches!(
            t.apply_change(Change::Readdress(NodeId(2), fresh)),
            Err(TopologyError::AddressInUse(_))
        ));
    }

    #[test]
    fn node_ids_are_not_reused() {
        let mut t = Topology::build(TopologyKind::Complete, 3, 0).unwrap();
        t.apply_change(Change::Leave(NodeId(2))).unwrap();
        let n = t.apply_change(Change::Join { links: vec![NodeId(0)] }).unwrap();
        assert_eq!(n.node(), NodeId(3));
    }

    #[test]
    fn address_bits_round_trip() {
        let a = Address(0b1011);
        assert_eq!(a.to_bits(6), "001011");
        assert_eq!(Address::from_bits("001011"), Some(a));
        assert_eq!(Address::from_bits("0a1"), None);
    }
}
