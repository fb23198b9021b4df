use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use crate::net::NodeId;

pub const DEFAULT_KEY_BITS: u8 = 16;

/// A position on the hash ring, in `[0, N)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key(pub u64);

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn fmix64(mut h: u64) -> u64 {
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h = h.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    h ^= h >> 33;
    h
}

/// Keyspace of size `N = 2^bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Keyspace {
    bits: u8,
}

impl Default for Keyspace {
    fn default() -> Self {
        Keyspace { bits: DEFAULT_KEY_BITS }
    }
}

impl Keyspace {
    /// `bits` is clamped to `1..=32`.
    pub fn new(bits: u8) -> Self {
        Keyspace { bits: bits.clamp(1, 32) }
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn size(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn hash(&self, bytes: &[u8]) -> Key {
        Key(fmix64(fnv1a(bytes)) >> (64 - self.bits as u32))
    }

    pub fn add(&self, k: Key, delta: u64) -> Key {
        Key((k.0 + delta) & (self.size() - 1))
    }

    /// Whether `k` lies in the ring interval `(from, to]`.
    pub fn in_half_open(&self, k: Key, from: Key, to: Key) -> bool {
        if from < to {
            from < k && k <= to
        } else {
            k > from || k <= to
        }
    }

    /// Whether `k` lies in the ring interval `(from, to)`.
    pub fn in_open(&self, k: Key, from: Key, to: Key) -> bool {
        if from < to {
            from < k && k < to
        } else if from == to {
            k != from
        } else {
            k > from || k < to
        }
    }
}

/// Membership of a hash ring: which node sits at which key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ring {
    by_key: BTreeMap<Key, NodeId>,
    by_node: BTreeMap<NodeId, Key>,
}

impl Ring {
    pub fn new() -> Self {
        Ring::default()
    }

    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }

    pub fn key_of(&self, node: NodeId) -> Option<Key> {
        self.by_node.get(&node).copied()
    }

    pub fn node_at(&self, key: Key) -> Option<NodeId> {
        self.by_key.get(&key).copied()
    }

    pub fn members(&self) -> impl Iterator<Item = (Key, NodeId)> + '_ {
        self.by_key.iter().map(|(k, n)| (*k, *n))
    }

    /// Hashes the node id, probing forward past occupied keys.
    pub fn assign_key(&self, space: &Keyspace, node: NodeId) -> Key {
        let mut k = space.hash(&node.0.to_le_bytes());
        while self.by_key.contains_key(&k) {
            k = space.add(k, 1);
        }
        k
    }

    /// Panics if `key` is already taken or the keyspace is full.
    pub fn insert(&mut self, key: Key, node: NodeId) {
        assert!(!self.by_key.contains_key(&key), "key {key} already on the ring");
        self.by_key.insert(key, node);
        self.by_node.insert(node, key);
    }

    pub fn remove(&mut self, node: NodeId) -> Option<Key> {
        let key = self.by_node.remove(&node)?;
        self.by_key.remove(&key);
        Some(key)
    }

    /// First member key `>= k`, wrapping.
    pub fn successor_key(&self, k: Key) -> Option<Key> {
        self.by_key.range(k..).next().or_else(|| self.by_key.iter().next()).map(|(k, _)| *k)
    }

    pub fn successor(&self, k: Key) -> Option<NodeId> {
        self.successor_key(k).and_then(|k| self.node_at(k))
    }

    /// Last member key strictly below `k`, wrapping.
    pub fn predecessor_key(&self, k: Key) -> Option<Key> {
        self.by_key.range(..k).next_back().or_else(|| self.by_key.iter().next_back()).map(|(k, _)| *k)
    }

    /// The member key right after `k`, wrapping.
    pub fn next_key(&self, k: Key) -> Option<Key> {
        use std::ops::Bound::{Excluded, Unbounded};
        self.by_key.range((Excluded(k), Unbounded)).next().or_else(|| self.by_key.iter().next()).map(|(k, _)| *k)
    }

    /// `key node-id` lines in ring order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, n) in &self.by_key {
            let _ = writeln!(out, "{k} {n}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn successor_wraps() {
        let mut r = Ring::new();
        for (k, n) in [(10, 0), (20, 1), (30, 2)] {
            r.insert(Key(k), NodeId(n));
        }
        assert_eq!(r.successor(Key(31)), Some(NodeId(0)));
        assert_eq!(r.successor(Key(20)), Some(NodeId(1)));
        assert_eq!(r.successor(Key(21)), Some(NodeId(2)));
        assert_eq!(r.predecessor_key(Key(10)), Some(Key(30)));
    }

    #[test]
    fn intervals() {
        let s = Keyspace::new(5);
        assert!(s.in_half_open(Key(2), Key(30), Key(5)));
        assert!(s.in_half_open(Key(5), Key(30), Key(5)));
        assert!(!s.in_half_open(Key(30), Key(30), Key(5)));
        assert!(!s.in_open(Key(3), Key(3), Key(3)));
        assert!(s.in_open(Key(4), Key(3), Key(3)));
    }
}
