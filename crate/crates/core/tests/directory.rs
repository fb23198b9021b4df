use dataloc::directory::{parse_embedded, CentralDirectory, Dns, DnsLayout, EmbeddedRouting, GossipDirectory, Prefix, RouteTable};
use dataloc::net::{Address, Change, Network, NodeId, Topology, TopologyKind};
use dataloc::proto::{DataId, NameAfterMove, PlacementRequest, Protocol};

fn net(kind: TopologyKind, n: usize) -> Network {
    Network::new(Topology::build(kind, n, 0).unwrap())
}

fn data(s: &str) -> DataId {
    DataId::new(s).unwrap()
}

fn put(p: &mut dyn Protocol, name: &str, at: u32) -> DataId {
    p.store(PlacementRequest::new(data(name), Some(NodeId(at)))).unwrap().name
}

#[test]
fn central_honors_names_and_placement() {
    let mut c = CentralDirectory::new(net(TopologyKind::Chain, 8));
    let out = c.store(PlacementRequest::new(data("obj"), Some(NodeId(3)))).unwrap();
    assert_eq!(out.stored_at, NodeId(3));
    assert!(out.name_accepted && out.placement_honored);
    assert_eq!(out.name_after_move, NameAfterMove::Stable);
    assert_eq!(out.name, data("obj"));
    assert!(c.store(PlacementRequest::new(data("obj"), Some(NodeId(1)))).is_err());
}

#[test]
fn central_table_holds_every_object() {
    let mut c = CentralDirectory::new(net(TopologyKind::Chain, 8));
    for i in 0..100 {
        put(&mut c, &format!("o{i}"), i % 8);
    }
    let t = c.tables();
    assert_eq!(t.max_table_size, 100);
    assert_eq!(t.table_count, 1);
}

#[test]
fn central_lookup_costs_path_to_server() {
    let topo = Topology::build(TopologyKind::Chain, 6, 0).unwrap();
    let mut c = CentralDirectory::with_server(Network::new(topo), NodeId(5));
    put(&mut c, "x", 2);
    let t = c.locate(&data("x"), NodeId(0)).unwrap();
    assert!(t.success);
    assert_eq!(t.resolved_at, Some(NodeId(2)));
    assert_eq!(t.requests, 1);
    assert_eq!(t.links_used, 5);

    let t = c.locate(&data("x"), NodeId(5)).unwrap();
    assert_eq!(t.links_used, 0);
    assert_eq!(t.resolved_at, Some(NodeId(2)));

    let t = c.locate(&data("x"), NodeId(2)).unwrap();
    assert!(t.success);
    assert_eq!(t.requests, 0);
}

#[test]
fn central_relocation_keeps_the_name() {
    let mut c = CentralDirectory::new(net(TopologyKind::Ring, 6));
    let x = put(&mut c, "x", 1);
    assert_eq!(c.relocate(&x, NodeId(4)).unwrap(), x);
    assert_eq!(c.holder(&x), Some(NodeId(4)));
    assert_eq!(c.locate(&x, NodeId(0)).unwrap().resolved_at, Some(NodeId(4)));
}

#[test]
fn gossip_path_spreads_one_hop_per_round() {
    let mut g = GossipDirectory::new(net(TopologyKind::Chain, 4));
    put(&mut g, "x", 0);
    let known = |g: &GossipDirectory| (0..4).filter(|&v| g.table(NodeId(v)).unwrap().contains_key(&data("x"))).count();
    assert_eq!(known(&g), 1);
    for round in 1..=3 {
        g.round().unwrap();
        assert_eq!(known(&g), 1 + round, "after round {round}");
    }
    assert!(g.converged());
    assert!(!g.round().unwrap());
}

#[test]
fn gossip_knowledge_is_monotone() {
    let mut g = GossipDirectory::new(net(TopologyKind::Ring, 10));
    for i in 0..6 {
        put(&mut g, &format!("f{i}"), i * 3 % 10);
    }
    let mut prev: Vec<usize> = (0..10).map(|v| g.table(NodeId(v)).unwrap().len()).collect();
    while !g.converged() {
        g.round().unwrap();
        let now: Vec<usize> = (0..10).map(|v| g.table(NodeId(v)).unwrap().len()).collect();
        assert!(prev.iter().zip(&now).all(|(a, b)| a <= b));
        prev = now;
    }
    for v in 0..10 {
        let t = g.locate(&data("f2"), NodeId(v)).unwrap();
        assert!(t.success && t.requests == 0 && t.links_used == 0);
    }
    assert_eq!(g.tables().max_table_size, 6);
    assert_eq!(g.tables().table_count, 10);
}

#[test]
fn gossip_settle_converges() {
    let mut g = GossipDirectory::new(net(TopologyKind::BalancedTree { arity: 2 }, 31));
    for i in 0..10 {
        put(&mut g, &format!("f{i}"), i);
    }
    assert!(g.settle().unwrap() > 0);
    assert!(g.converged());
    let (_, t) = g.change(Change::Join { links: vec![NodeId(3)] }).unwrap();
    assert!(!t.manual_intervention);
    g.settle().unwrap();
    assert!(g.converged());
}

const FIG2: &str = ". 0\ncom 1\nexample.com 2\n";

#[test]
fn dns_iterative_resolution() {
    let mut d = Dns::from_zone_file(net(TopologyKind::Chain, 5), FIG2).unwrap();
    let x = put(&mut d, "data.k1.example.com", 4);
    let z = d.zone_for(x.as_str());
    assert_eq!(d.zones()[z].suffix(), "example.com");
    assert_eq!(d.depth(z), 2);
    let t = d.locate(&x, NodeId(3)).unwrap();
    assert!(t.success);
    assert_eq!(t.requests, 3);
    assert_eq!(t.resolved_at, Some(NodeId(4)));
}

#[test]
fn dns_root_record_takes_one_request() {
    let mut d = Dns::from_zone_file(net(TopologyKind::Chain, 5), FIG2).unwrap();
    let x = put(&mut d, "top", 4);
    assert_eq!(d.depth(d.zone_for(x.as_str())), 0);
    assert_eq!(d.locate(&x, NodeId(3)).unwrap().requests, 1);
}

#[test]
fn dns_dead_zone_cuts_its_subtree() {
    let mut d = Dns::from_zone_file(net(TopologyKind::Chain, 5), FIG2).unwrap();
    let deep = put(&mut d, "x.example.com", 4);
    let shallow = put(&mut d, "y.com", 4);
    let root = put(&mut d, "z", 4);
    d.set_unreachable(NodeId(1));
    assert!(!d.locate(&deep, NodeId(3)).unwrap().success);
    assert!(!d.locate(&shallow, NodeId(3)).unwrap().success);
    assert!(d.locate(&root, NodeId(3)).unwrap().success);
    d.set_reachable(NodeId(1));
    assert!(d.locate(&deep, NodeId(3)).unwrap().success);
}

#[test]
fn dns_readdress_needs_manual_update() {
    let mut d = Dns::new(net(TopologyKind::BalancedTree { arity: 2 }, 15), DnsLayout::Balanced { arity: 2 }).unwrap();
    let name = d.conventional_name("obj", 0);
    let x = put(&mut d, &name, 9);
    let fresh = d.network().topology().fresh_address();
    let (_, t) = d.change(Change::Readdress(NodeId(9), fresh)).unwrap();
    assert!(t.manual_intervention);
    assert!(!d.locate(&x, NodeId(0)).unwrap().success);
    let fix = d.manual_update().unwrap();
    assert!(fix.manual_intervention && fix.tables_updated > 0);
    let t = d.locate(&x, NodeId(0)).unwrap();
    assert!(t.success);
    assert_eq!(t.resolved_at, Some(NodeId(9)));
}

#[test]
fn dns_zone_file_round_trips() {
    let d = Dns::from_zone_file(net(TopologyKind::Chain, 5), FIG2).unwrap();
    let again = Dns::from_zone_file(net(TopologyKind::Chain, 5), &d.zone_file()).unwrap();
    assert_eq!(d.zone_file(), again.zone_file());
    assert!(Dns::from_zone_file(net(TopologyKind::Chain, 2), "com 1\n").is_err());
}

#[test]
fn embedded_lookup_follows_the_path() {
    let mut ip = EmbeddedRouting::new(net(TopologyKind::Chain, 8));
    let x = put(&mut ip, "file", 7);
    let width = ip.network().topology().address_width();
    let (addr, local) = parse_embedded(x.as_str(), width).unwrap();
    assert_eq!(local, "file");
    assert_eq!(ip.network().topology().node_at(addr), Some(NodeId(7)));
    let t = ip.locate(&x, NodeId(0)).unwrap();
    assert!(t.success);
    assert_eq!(t.links_used, 7);
    assert_eq!(t.requests, 1);
    let t = ip.locate(&x, NodeId(7)).unwrap();
    assert!(t.success && t.links_used == 0);
}

#[test]
fn embedded_names_change_on_move() {
    let mut ip = EmbeddedRouting::new(net(TopologyKind::Ring, 8));
    let out = ip.store(PlacementRequest::new(data("f"), Some(NodeId(2)))).unwrap();
    assert!(!out.name_accepted);
    assert_eq!(out.name_after_move, NameAfterMove::Changes);
    let moved = ip.relocate(&out.name, NodeId(5)).unwrap();
    assert_ne!(moved, out.name);
    assert!(ip.locate(&moved, NodeId(0)).unwrap().success);
}

#[test]
fn embedded_readdress_is_manual() {
    let mut ip = EmbeddedRouting::new(net(TopologyKind::Chain, 6));
    let fresh = ip.network().topology().fresh_address();
    let (_, t) = ip.change(Change::Readdress(NodeId(4), fresh)).unwrap();
    assert!(t.manual_intervention);
}

#[test]
fn more_specific_route_wins() {
    let mut t = RouteTable::new(8);
    t.insert(Prefix::parse_bits("10/2").unwrap(), NodeId(1));
    t.insert(Prefix::parse_bits("1011/4").unwrap(), NodeId(2));
    assert_eq!(t.lookup(Address(0b1011_0001)), Some(NodeId(2)));
    assert_eq!(t.lookup(Address(0b1000_0001)), Some(NodeId(1)));
    assert_eq!(t.lookup(Address(0b0000_0001)), None);
    t.default = Some(NodeId(9));
    assert_eq!(t.lookup(Address(0b0000_0001)), Some(NodeId(9)));
}

#[test]
fn siblings_merge_into_parent() {
    let mut t = RouteTable::new(8);
    t.insert(Prefix::parse_bits("10/2").unwrap(), NodeId(1));
    t.insert(Prefix::parse_bits("11/2").unwrap(), NodeId(1));
    let a = t.aggregate();
    assert_eq!(a.len(), 1);
    assert_eq!(a.get(&Prefix::parse_bits("1/1").unwrap()), Some(NodeId(1)));
}

#[test]
fn v6_pair_aggregates_to_shorter_prefix() {
    let mut t = RouteTable::new(128);
    t.insert(Prefix::parse_v6("2001:db8:abcd:1200::/64").unwrap(), NodeId(1));
    t.insert(Prefix::parse_v6("2001:db8:abcd:1201::/64").unwrap(), NodeId(1));
    let a = t.aggregate();
    let routes: Vec<_> = a.routes().collect();
    assert_eq!(routes.len(), 1);
    assert_eq!(routes[0].0.to_v6(), "2001:db8:abcd:1200::/63");
}

#[test]
fn different_next_hops_do_not_merge() {
    let mut t = RouteTable::new(8);
    t.insert(Prefix::parse_bits("10/2").unwrap(), NodeId(1));
    t.insert(Prefix::parse_bits("11/2").unwrap(), NodeId(2));
    assert_eq!(t.aggregate().len(), 2);
}
