use std::collections::BTreeMap;

use dataloc::hash::{Chord, ConsistentHashing, Key, Keyspace, Pattern, PlacementRule};
use dataloc::net::{Change, Network, NodeId, Topology, TopologyKind};
use dataloc::proto::{DataId, NameAfterMove, PlacementRequest, Protocol};

fn net(kind: TopologyKind, n: usize) -> Network {
    Network::new(Topology::build(kind, n, 0).unwrap())
}

fn data(s: &str) -> DataId {
    DataId::new(s).unwrap()
}

fn ring(bits: u8, keys: &[u64], extra: usize) -> Chord {
    let nodes: Vec<(NodeId, Key)> = keys.iter().enumerate().map(|(i, &k)| (NodeId(i as u32), Key(k))).collect();
    Chord::with_keys(net(TopologyKind::Ring, keys.len() + extra), Keyspace::new(bits), &nodes).unwrap()
}

/// Textbook finger routing replayed on plain key lists.
fn route_oracle(keys: &[u64], bits: u8, k: u64, origin: usize) -> (usize, u64) {
    let size = 1u64 << bits;
    let mut sorted: Vec<u64> = keys.to_vec();
    sorted.sort();
    let succ = |x: u64| *sorted.iter().find(|&&nk| nk >= x).unwrap_or(&sorted[0]);
    let dist = |from: u64, to: u64| (to + size - from) % size;
    let mut cur = keys[origin];
    let mut hops = 0;
    loop {
        if succ(k) == cur {
            return (keys.iter().position(|&x| x == cur).unwrap(), hops);
        }
        let next_key = succ((cur + 1) % size);
        let next = if dist(cur, k) <= dist(cur, next_key) {
            next_key
        } else {
            let fingers: Vec<u64> = (0..bits).map(|i| succ((cur + (1 << i)) % size)).collect();
            fingers
                .into_iter()
                .rev()
                .find(|&f| f != cur && dist(cur, f) < dist(cur, k))
                .unwrap_or(next_key)
        };
        cur = next;
        hops += 1;
    }
}

#[test]
fn successor_boundaries() {
    let c = ring(5, &[10, 20, 30], 0);
    assert_eq!(c.successor(Key(31)), Some(NodeId(0)));
    assert_eq!(c.successor(Key(20)), Some(NodeId(1)));
    assert_eq!(c.successor(Key(21)), Some(NodeId(2)));
    assert_eq!(c.successor(Key(0)), Some(NodeId(0)));
}

#[test]
fn key_42_goes_to_next_node_up() {
    let without = ring(6, &[1, 8, 14, 21, 32, 38, 48, 51, 56], 0);
    assert_eq!(without.successor(Key(42)), Some(NodeId(6)));
    let with = ring(6, &[1, 8, 14, 21, 32, 38, 42, 48, 51, 56], 0);
    assert_eq!(with.successor(Key(42)), Some(NodeId(6)));
    assert_eq!(with.fingers(NodeId(1)).unwrap()[0], NodeId(2));
}

#[test]
fn lookup_hops_match_route_oracle() {
    for keys in [vec![3u64, 12, 25], vec![0, 1, 31], vec![7, 8, 9, 20, 28]] {
        let mut c = ring(5, &keys, 0);
        for k in 0..32 {
            for origin in 0..keys.len() {
                let (owner, hops) = route_oracle(&keys, 5, k, origin);
                let t = c.locate_key(Key(k), NodeId(origin as u32)).unwrap();
                assert_eq!(t.resolved_at, Some(NodeId(owner as u32)), "keys {keys:?} k={k} from {origin}");
                assert_eq!(t.hops, hops, "keys {keys:?} k={k} from {origin}");
            }
        }
    }
}

#[test]
fn lookup_at_the_owner_is_free() {
    let mut c = ring(5, &[3, 12, 25], 0);
    let t = c.locate_key(Key(12), NodeId(1)).unwrap();
    assert!(t.success);
    assert_eq!((t.hops, t.requests, t.links_used), (0, 0, 0));
}

#[test]
fn sixteen_nodes_stay_within_four_hops_on_average() {
    let mut c = Chord::new(net(TopologyKind::Chain, 16), Keyspace::new(16));
    let mut hops = 0;
    for i in 0..1000u64 {
        let k = Key(i.wrapping_mul(0x9e37_79b9) % (1 << 16));
        hops += c.locate_key(k, NodeId((i % 16) as u32)).unwrap().hops;
    }
    assert!(hops as f64 / 1000.0 <= 4.0, "mean hops {}", hops as f64 / 1000.0);
}

#[test]
fn hash_is_deterministic_and_uniform() {
    let space = Keyspace::new(8);
    assert_eq!(space.hash(b"same"), space.hash(b"same"));
    let mut buckets = [0u64; 256];
    for i in 0..10_000 {
        buckets[space.hash(format!("name-{i}").as_bytes()).0 as usize] += 1;
    }
    let expected = 10_000.0 / 256.0;
    let chi2: f64 = buckets.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 255 degrees of freedom, p = 0.01.
    assert!(chi2 < 310.5, "chi-square {chi2:.1}");
}

#[test]
fn join_into_an_empty_gap_moves_nothing() {
    let mut c = ring(16, &[100, 20_000, 40_000], 1);
    for i in 0..200 {
        c.store(PlacementRequest::new(data(&format!("d{i}")), None)).unwrap();
    }
    let taken: Vec<u64> = (0..200).map(|i| c.hash(&data(&format!("d{i}"))).0).collect();
    let gap = (101..20_000).find(|k| !taken.contains(k)).unwrap();
    assert!(!taken.iter().any(|&k| k > 100 && k <= gap));
    let t = c.ring_join(NodeId(3), Key(gap)).unwrap();
    assert_eq!(t.records_moved, 0);
    assert_eq!(c.fingers(NodeId(3)).unwrap().len(), 16);
}

#[test]
fn leave_and_rejoin_restores_placement() {
    let mut c = ring(16, &[100, 20_000, 40_000, 60_000], 0);
    for i in 0..300 {
        c.store(PlacementRequest::new(data(&format!("d{i}")), None)).unwrap();
    }
    let snapshot = |c: &Chord| -> BTreeMap<DataId, NodeId> {
        (0..300).map(|i| data(&format!("d{i}"))).map(|x| (x.clone(), c.holder(&x).unwrap())).collect()
    };
    let before = snapshot(&c);
    let left = c.ring_leave(NodeId(2)).unwrap();
    let owned = before.values().filter(|&&v| v == NodeId(2)).count() as u64;
    assert_eq!(left.records_moved, owned);
    assert!(snapshot(&c).values().all(|&v| v != NodeId(2)));
    let back = c.ring_join(NodeId(2), Key(40_000)).unwrap();
    assert_eq!(back.records_moved, owned);
    assert_eq!(snapshot(&c), before);
}

#[test]
fn chord_rejects_placement_requests() {
    let mut c = Chord::new(net(TopologyKind::Chain, 16), Keyspace::new(16));
    let x = data("obj");
    let owner = c.successor(c.hash(&x)).unwrap();
    let elsewhere = NodeId((owner.0 + 1) % 16);
    let out = c.store(PlacementRequest::new(x, Some(elsewhere))).unwrap();
    assert!(!out.placement_honored);
    assert_eq!(out.stored_at, owner);
    assert_eq!(out.name_after_move, NameAfterMove::Changes);
    let out = c.store(PlacementRequest::new(data("obj2"), Some(c.successor(c.hash(&data("obj2"))).unwrap()))).unwrap();
    assert!(out.placement_honored);
}

#[test]
fn name_trials_track_arc_size() {
    let c = ring(12, &[0, 400, 1000, 3000], 0);
    let (target, arc) = (NodeId(1), 400.0);
    let trials: u64 = (0..300).map(|i| c.name_for_node(&format!("b{i}"), target).unwrap().1).sum();
    let mean = trials as f64 / 300.0;
    let expected = 4096.0 / arc;
    assert!((mean - expected).abs() / expected < 0.25, "mean trials {mean:.2}, expected {expected:.2}");
    let (name, _) = c.name_for_node("x", target).unwrap();
    assert_eq!(c.successor(c.hash(&name)), Some(target));
}

#[test]
fn chord_relocation_renames() {
    let mut c = Chord::new(net(TopologyKind::Ring, 8), Keyspace::new(16));
    let x = data("file");
    c.store(PlacementRequest::new(x.clone(), None)).unwrap();
    let to = NodeId((c.holder(&x).unwrap().0 + 3) % 8);
    let renamed = c.relocate(&x, to).unwrap();
    assert_ne!(renamed, x);
    assert_eq!(c.holder(&renamed), Some(to));
    assert!(c.locate(&renamed, NodeId(0)).unwrap().success);
}

#[test]
fn consistent_hashing_lookup_is_one_request() {
    let mut ch = ConsistentHashing::new(net(TopologyKind::Chain, 12), Keyspace::new(16));
    assert!(ch.views_synchronized());
    for i in 0..50 {
        ch.store(PlacementRequest::new(data(&format!("o{i}")), None)).unwrap();
    }
    for i in 0..50 {
        let x = data(&format!("o{i}"));
        let owner = ch.owner(&x).unwrap();
        let origin = NodeId((owner.0 + 5) % 12);
        let t = ch.locate(&x, origin).unwrap();
        assert!(t.success);
        assert_eq!(t.requests, 1);
        assert_eq!(t.links_used, ch.network().topology().distance(origin, owner).unwrap() as u64);
    }
    assert_eq!(ch.tables().max_table_size, 12);
    assert_eq!(ch.tables().table_count, 12);
}

#[test]
fn consistent_hashing_changes_reach_every_view() {
    let mut ch = ConsistentHashing::new(net(TopologyKind::Ring, 10), Keyspace::new(16));
    let (notice, t) = ch.change(Change::Join { links: vec![NodeId(0), NodeId(5)] }).unwrap();
    assert!(!t.manual_intervention);
    assert!(t.tables_updated >= 10);
    assert!(ch.views_synchronized());
    assert!(ch.ring().key_of(notice.node()).is_some());
    let (_, t) = ch.change(Change::Leave(notice.node())).unwrap();
    assert!(!t.manual_intervention);
    assert_eq!(ch.ring().len(), 10);
}

#[test]
fn placement_rules_pin_data() {
    let mut ch = ConsistentHashing::new(net(TopologyKind::Chain, 8), Keyspace::new(16));
    let out = ch.store_with_rule(PlacementRequest::new(data("pinned"), Some(NodeId(6)))).unwrap();
    assert!(out.placement_honored);
    assert_eq!(out.name_after_move, NameAfterMove::Stable);
    assert_eq!(ch.holder(&data("pinned")), Some(NodeId(6)));
    assert_eq!(ch.relocate(&data("pinned"), NodeId(2)).unwrap(), data("pinned"));
    assert_eq!(ch.locate(&data("pinned"), NodeId(7)).unwrap().resolved_at, Some(NodeId(2)));

    ch.add_rule(PlacementRule { pattern: Pattern::Prefix("logs/".into()), target: NodeId(4) }, NodeId(0)).unwrap();
    let out = ch.store(PlacementRequest::new(data("logs/a"), None)).unwrap();
    assert_eq!(out.stored_at, NodeId(4));
    assert_eq!(ch.rules().len(), 2);
    assert_eq!(ch.tables().max_table_size, 10);
}
