use dataloc::explore::{Flooding, RandomWalk};
use dataloc::net::{Change, Network, NodeId, Topology, TopologyKind};
use dataloc::proto::{DataId, LookupTrace, NameAfterMove, PlacementRequest, Protocol};

fn net(kind: TopologyKind, n: usize) -> Network {
    Network::new(Topology::build(kind, n, 0).unwrap())
}

fn data(s: &str) -> DataId {
    DataId::new(s).unwrap()
}

#[test]
fn flood_finds_local_data_for_free() {
    let mut f = Flooding::new(net(TopologyKind::Ring, 6), None);
    f.store(PlacementRequest::new(data("x"), Some(NodeId(2)))).unwrap();
    let t = f.locate(&data("x"), NodeId(2)).unwrap();
    assert!(t.success);
    assert_eq!((t.requests, t.links_used), (0, 0));
}

#[test]
fn flood_ttl_below_distance_fails() {
    let mut f = Flooding::new(net(TopologyKind::Chain, 6), None);
    f.store(PlacementRequest::new(data("x"), Some(NodeId(5)))).unwrap();
    let short = f.query(data("x"), 4);
    let t = f.locate_query(&short, NodeId(0)).unwrap();
    assert!(!t.success);
    assert_eq!(t.links_used, 4);
    let enough = f.query(data("x"), 5);
    let t = f.locate_query(&enough, NodeId(0)).unwrap();
    assert!(t.success);
    assert_eq!((t.hops, t.links_used), (5, 5));
    assert_eq!(t.resolved_at, Some(NodeId(5)));
}

#[test]
fn flood_default_ttl_reaches_everything() {
    for kind in [TopologyKind::Chain, TopologyKind::Lollipop, TopologyKind::BalancedTree { arity: 2 }] {
        let mut f = Flooding::new(net(kind, 20), None);
        f.store(PlacementRequest::new(data("x"), Some(NodeId(19)))).unwrap();
        for o in 0..20 {
            assert!(f.locate(&data("x"), NodeId(o)).unwrap().success, "{kind} from {o}");
        }
    }
}

#[test]
fn walk_with_zero_ttl_goes_nowhere() {
    let mut w = RandomWalk::new(net(TopologyKind::Ring, 6), Some(0), 3, 1);
    w.store(PlacementRequest::new(data("x"), Some(NodeId(1)))).unwrap();
    let t = w.locate(&data("x"), NodeId(0)).unwrap();
    assert!(!t.success);
    assert_eq!((t.links_used, t.messages), (0, 0));
}

#[test]
fn walk_steps_sum_over_walkers() {
    let mut w = RandomWalk::new(net(TopologyKind::Ring, 10), Some(3), 2, 1);
    w.store(PlacementRequest::new(data("x"), Some(NodeId(5)))).unwrap();
    let t = w.locate(&data("x"), NodeId(0)).unwrap();
    assert!(!t.success);
    assert_eq!(t.links_used, 6);
    assert!(t.requests == 3 || t.requests == 6, "{t:?}");
}

#[test]
fn walk_is_reproducible_per_seed() {
    let run = |seed| -> Vec<LookupTrace> {
        let mut w = RandomWalk::new(net(TopologyKind::Lollipop, 16), Some(40), 1, seed);
        w.store(PlacementRequest::new(data("x"), Some(NodeId(15)))).unwrap();
        (0..50).map(|i| w.locate(&data("x"), NodeId(i % 8)).unwrap()).collect()
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn exploration_keeps_no_tables() {
    let mut f = Flooding::new(net(TopologyKind::Ring, 6), None);
    let mut w = RandomWalk::new(net(TopologyKind::Ring, 6), None, 1, 0);
    for p in [&mut f as &mut dyn Protocol, &mut w] {
        let out = p.store(PlacementRequest::new(data("x"), Some(NodeId(4)))).unwrap();
        assert!(out.name_accepted && out.placement_honored);
        assert_eq!(out.name_after_move, NameAfterMove::Stable);
        assert_eq!(p.tables().max_table_size, 0);
        assert_eq!(p.tables().table_count, 0);
        assert_eq!(p.relocate(&data("x"), NodeId(1)).unwrap(), data("x"));
        assert!(p.locate(&data("x"), NodeId(3)).unwrap().success);
        let (_, t) = p.change(Change::Join { links: vec![NodeId(0)] }).unwrap();
        assert!(!t.manual_intervention);
        assert_eq!(t.messages, 0);
    }
}
