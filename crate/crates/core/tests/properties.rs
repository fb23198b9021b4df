use std::collections::BTreeSet;

use dataloc::audit::{fit_scaling, Growth, ScalingSeries};
use dataloc::directory::{GossipDirectory, Prefix, RouteTable};
use dataloc::explore::Flooding;
use dataloc::hash::{Chord, Key, Keyspace};
use dataloc::net::{Address, Network, NodeId, Topology, TopologyKind};
use dataloc::proto::{DataId, PlacementRequest, Protocol};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = TopologyKind> {
    prop_oneof![
        Just(TopologyKind::Chain),
        Just(TopologyKind::Ring),
        Just(TopologyKind::Complete),
        Just(TopologyKind::Lollipop),
        (1u32..4).prop_map(|arity| TopologyKind::BalancedTree { arity }),
        (1u32..6).prop_map(|p| TopologyKind::RandomConnected { p: p as f64 / 10.0 }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flood_links_bounded_by_twice_the_edges(kind in kind(), n in 2usize..24, seed in 0u64..1000, o in 0u32..24, h in 0u32..24, ttl in 0u32..12) {
        let topo = Topology::build(kind, n, seed).unwrap();
        let (o, h) = (NodeId(o % n as u32), NodeId(h % n as u32));
        let bound = 2 * topo.edge_count() as u64;
        let dist = topo.distance(o, h).unwrap();
        let mut f = Flooding::new(Network::new(topo), Some(ttl));
        let x = DataId::new("x").unwrap();
        f.store(PlacementRequest::new(x.clone(), Some(h))).unwrap();
        let t = f.locate(&x, o).unwrap();
        prop_assert!(t.links_used <= bound);
        prop_assert_eq!(t.success, o == h || ttl >= dist);
    }

    #[test]
    fn aggregation_preserves_forwarding(routes in prop::collection::vec((0u128..256, 0u8..=8, 0u32..4), 0..40), default in prop::option::of(0u32..4)) {
        let mut table = RouteTable::new(8);
        table.default = default.map(NodeId);
        for (a, len, hop) in routes {
            table.insert(Prefix::of(Address(a), 8, len), NodeId(hop));
        }
        let agg = table.aggregate();
        prop_assert!(agg.len() <= table.len());
        for a in 0..256u128 {
            prop_assert_eq!(table.lookup(Address(a)), agg.lookup(Address(a)));
        }
    }

    #[test]
    fn successor_matches_sorted_scan(keys in prop::collection::btree_set(0u64..1024, 1..20), k in 0u64..1024) {
        let keys: Vec<u64> = keys.into_iter().collect();
        let nodes: Vec<(NodeId, Key)> = keys.iter().enumerate().map(|(i, &k)| (NodeId(i as u32), Key(k))).collect();
        let net = Network::new(Topology::build(TopologyKind::Ring, keys.len(), 0).unwrap());
        let mut c = Chord::with_keys(net, Keyspace::new(10), &nodes).unwrap();
        let want = keys.iter().position(|&nk| nk >= k).unwrap_or(0);
        prop_assert_eq!(c.successor(Key(k)), Some(NodeId(want as u32)));
        for origin in 0..keys.len() as u32 {
            let t = c.locate_key(Key(k), NodeId(origin)).unwrap();
            prop_assert!(t.success);
            prop_assert_eq!(t.resolved_at, Some(NodeId(want as u32)));
            prop_assert!(t.hops <= 10);
        }
        for &(v, _) in &nodes {
            prop_assert_eq!(c.fingers(v).unwrap().len(), 10);
        }
    }

    #[test]
    fn fit_survives_small_noise(class in 0usize..4, a in 1.0f64..10.0, b in 0.0f64..1.0, noise in prop::collection::vec(-0.01f64..0.01, 6)) {
        let xs = [16.0, 32.0, 64.0, 128.0, 256.0, 512.0];
        let (want, f): (Growth, fn(f64) -> f64) = match class {
            0 => (Growth::Constant, |_| 1.0),
            1 => (Growth::Logarithmic, f64::ln),
            2 => (Growth::Linear, |x| x),
            _ => (Growth::Quadratic, |x| x * x),
        };
        let pts = xs.iter().zip(&noise).map(|(&x, e)| (x, (a * f(x) + b * a) * (1.0 + e))).collect();
        let fit = fit_scaling(&ScalingSeries::new("p", "m", pts).unwrap()).unwrap();
        prop_assert_eq!(fit.class, want);
        prop_assert!(fit.fit_quality >= 0.99);
    }

    #[test]
    fn gossip_converges_within_diameter(kind in kind(), n in 2usize..32, seed in 0u64..500, placements in prop::collection::vec(0u32..32, 1..8)) {
        let topo = Topology::build(kind, n, seed).unwrap();
        let diameter = topo.diameter() as u64;
        let mut g = GossipDirectory::new(Network::new(topo));
        for (i, v) in placements.iter().enumerate() {
            g.store(PlacementRequest::new(DataId::new(format!("f{i}")).unwrap(), Some(NodeId(v % n as u32)))).unwrap();
        }
        let mut rounds = 0;
        let mut sizes: Vec<usize> = (0..n as u32).map(|v| g.table(NodeId(v)).unwrap().len()).collect();
        while !g.converged() {
            g.round().unwrap();
            rounds += 1;
            let now: Vec<usize> = (0..n as u32).map(|v| g.table(NodeId(v)).unwrap().len()).collect();
            prop_assert!(sizes.iter().zip(&now).all(|(a, b)| a <= b));
            sizes = now;
            prop_assert!(rounds <= diameter);
        }
        let names: BTreeSet<_> = g.table(NodeId(0)).unwrap().keys().cloned().collect();
        prop_assert_eq!(names.len(), placements.len());
    }
}
