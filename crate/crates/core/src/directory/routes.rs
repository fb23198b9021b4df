//! Longest-prefix-match forwarding tables and prefix aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv6Addr;

use crate::net::{Address, NodeId};

/// The top `len` bits of an address, stored right-aligned in `bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    pub bits: u128,
    pub len: u8,
}

fn top_bits(value: u128, width: u8, len: u8) -> u128 {
    if len == 0 {
        0
    } else {
        (value >> (width - len)) & mask(len)
    }
}

fn mask(len: u8) -> u128 {
    if len >= 128 {
        u128::MAX
    } else {
        (1u128 << len) - 1
    }
}

impl Prefix {
    pub fn of(address: Address, width: u8, len: u8) -> Prefix {
        let len = len.min(width);
        Prefix { bits: top_bits(address.0, width, len), len }
    }

    pub fn host(address: Address, width: u8) -> Prefix {
        Prefix::of(address, width, width)
    }

    pub fn matches(&self, address: Address, width: u8) -> bool {
        top_bits(address.0, width, self.len) == self.bits
    }

    /// The prefix one bit shorter.
    pub fn parent(&self) -> Option<Prefix> {
        (self.len > 0).then(|| Prefix { bits: self.bits >> 1, len: self.len - 1 })
    }

    pub fn sibling(&self) -> Option<Prefix> {
        (self.len > 0).then_some(Prefix { bits: self.bits ^ 1, len: self.len })
    }

    /// Left-aligned value, used for ordering dumps.
    pub fn network(&self, width: u8) -> u128 {
        if self.len == 0 {
            0
        } else {
            self.bits << (width - self.len)
        }
    }

    /// Longest prefix shared by two prefixes.
    pub fn common(a: Prefix, b: Prefix, width: u8) -> Prefix {
        let len = a.len.min(b.len);
        let x = a.network(width);
        let y = b.network(width);
        let mut l = 0;
        while l < len && top_bits(x, width, l + 1) == top_bits(y, width, l + 1) {
            l += 1;
        }
        Prefix { bits: top_bits(x, width, l), len: l }
    }

    /// Parses `bits/len` written as a binary string, e.g. `1011/4`.
    pub fn parse_bits(s: &str) -> Option<Prefix> {
        let (bits, len) = s.split_once('/')?;
        let len: u8 = len.parse().ok()?;
        if bits.len() != len as usize {
            return None;
        }
        if len == 0 {
            return Some(Prefix { bits: 0, len: 0 });
        }
        Some(Prefix { bits: Address::from_bits(bits)?.0, len })
    }

    /// Parses IPv6 prefix notation such as `2001:db8::/32` (width 128).
    pub fn parse_v6(s: &str) -> Option<Prefix> {
        let (addr, len) = s.split_once('/')?;
        let addr: Ipv6Addr = addr.parse().ok()?;
        let len: u8 = len.parse().ok()?;
        if len > 128 {
            return None;
        }
        Some(Prefix::of(Address(u128::from(addr)), 128, len))
    }

    pub fn to_v6(&self) -> String {
        format!("{}/{}", Ipv6Addr::from(self.network(128)), self.len)
    }

    pub fn display(&self) -> PrefixDisplay {
        PrefixDisplay(*self)
    }
}

pub struct PrefixDisplay(Prefix);

impl fmt::Display for PrefixDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.0;
        if p.len == 0 {
            return write!(f, "/0");
        }
        write!(f, "{}/{}", Address(p.bits).to_bits(p.len), p.len)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteTable {
    width: u8,
    routes: BTreeMap<Prefix, NodeId>,
    lengths: BTreeMap<u8, usize>,
    pub default: Option<NodeId>,
}

impl RouteTable {
    pub fn new(width: u8) -> Self {
        RouteTable { width, routes: BTreeMap::new(), lengths: BTreeMap::new(), default: None }
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    /// Entries including the default route.
    pub fn size(&self) -> usize {
        self.routes.len() + self.default.is_some() as usize
    }

    pub fn routes(&self) -> impl Iterator<Item = (Prefix, NodeId)> + '_ {
        self.routes.iter().map(|(p, n)| (*p, *n))
    }

    pub fn insert(&mut self, prefix: Prefix, next_hop: NodeId) -> Option<NodeId> {
        let old = self.routes.insert(prefix, next_hop);
        if old.is_none() {
            *self.lengths.entry(prefix.len).or_default() += 1;
        }
        old
    }

    pub fn remove(&mut self, prefix: &Prefix) -> Option<NodeId> {
        let old = self.routes.remove(prefix);
        if old.is_some() {
            if let Some(c) = self.lengths.get_mut(&prefix.len) {
                *c -= 1;
                if *c == 0 {
                    self.lengths.remove(&prefix.len);
                }
            }
        }
        old
    }

    pub fn get(&self, prefix: &Prefix) -> Option<NodeId> {
        self.routes.get(prefix).copied()
    }

    /// Most specific matching route, then the default.
    pub fn lookup(&self, address: Address) -> Option<NodeId> {
        self.lookup_route(address).map(|(_, n)| n).or(self.default)
    }

    pub fn lookup_route(&self, address: Address) -> Option<(Prefix, NodeId)> {
        for &len in self.lengths.keys().rev() {
            let p = Prefix::of(address, self.width, len);
            if let Some(&n) = self.routes.get(&p) {
                return Some((p, n));
            }
        }
        None
    }

    /// Greedy sibling merge to a fixpoint: two routes with the same next hop whose
    /// prefixes differ only in their last bit become their parent prefix.
    /// Forwarding is unchanged for every address.
    pub fn aggregate(&self) -> RouteTable {
        let mut out = self.clone();
        loop {
            let mut merged = false;
            let candidates: Vec<(Prefix, NodeId)> =
                out.routes.iter().filter(|(p, _)| p.len > 0 && p.bits & 1 == 0).map(|(p, n)| (*p, *n)).collect();
            for (p, hop) in candidates {
                let Some(sib) = p.sibling() else { continue };
                if out.get(&p) != Some(hop) || out.get(&sib) != Some(hop) {
                    continue;
                }
                out.remove(&p);
                out.remove(&sib);
                if let Some(parent) = p.parent() {
                    out.insert(parent, hop);
                }
                merged = true;
            }
            if !merged {
                return out;
            }
        }
    }

    /// Merges same-next-hop routes into their common prefix whenever no address in
    /// `live` changes its forwarding. Unlike [`RouteTable::aggregate`] this can join
    /// prefixes that are not siblings, so equivalence holds only for `live`.
    pub fn aggregate_covering(&self, live: &[Address]) -> RouteTable {
        let mut out = self.clone();
        let expected: Vec<Option<NodeId>> = live.iter().map(|&a| self.lookup(a)).collect();
        loop {
            let mut merged = false;
            let routes: Vec<(Prefix, NodeId)> = out.routes().collect();
            'pairs: for (i, &(a, hop)) in routes.iter().enumerate() {
                for &(b, hop_b) in &routes[i + 1..] {
                    if hop != hop_b {
                        continue;
                    }
                    let parent = Prefix::common(a, b, out.width);
                    if parent == a || parent == b {
                        continue;
                    }
                    let mut trial = out.clone();
                    trial.remove(&a);
                    trial.remove(&b);
                    if trial.get(&parent).is_some_and(|n| n != hop) {
                        continue;
                    }
                    trial.insert(parent, hop);
                    if live.iter().zip(&expected).all(|(&addr, want)| trial.lookup(addr) == *want) {
                        out = trial;
                        merged = true;
                        break 'pairs;
                    }
                }
            }
            if !merged {
                return out;
            }
        }
    }

    /// `bits/len next-hop` lines sorted by network then length.
    pub fn dump(&self) -> String {
        let mut rows: Vec<(u128, u8, String)> = self
            .routes
            .iter()
            .map(|(p, n)| (p.network(self.width), p.len, format!("{} {}", p.display(), n)))
            .collect();
        rows.sort();
        let mut out = String::new();
        for (_, _, line) in rows {
            out.push_str(&line);
            out.push('\n');
        }
        if let Some(d) = self.default {
            out.push_str(&format!("default {d}\n"));
        }
        out
    }

    /// Next hops reachable from this table.
    pub fn next_hops(&self) -> BTreeSet<NodeId> {
        self.routes.values().copied().chain(self.default).collect()
    }
}
