use dataloc::measure::{build_protocol, measure, Placement, ProtocolParams, Workload};
use dataloc::net::{Network, NodeId, Topology, TopologyKind};
use dataloc::proto::{DataId, PlacementRequest, ProtocolKind};
use dataloc::scenario::{metrics_csv, point_seed, run_suite, svg_plot, write_outputs, Suite, SuiteError, METRICS_HEADER};

const TWO: &str = r#"
seed = 11

[[scenario]]
name = "a"
protocol = "central"
topology = "ring"
n = [8, 16]
d = 20

[[scenario]]
name = "b"
protocol = "gossip"
topology = "chain"
n = 8
d = [10, 20]
"#;

#[test]
fn empty_suite_writes_header_only() {
    let suite: Suite = "seed = 4\n".parse().unwrap();
    assert!(suite.scenarios.is_empty());
    let out = run_suite(&suite);
    let csv = metrics_csv(&out.points).unwrap();
    assert_eq!(csv, format!("{}\n", METRICS_HEADER.join(",")));
    assert!(out.table.rows.is_empty());
    assert!(!out.passed());
}

#[test]
fn default_suite_covers_every_protocol() {
    let suite = Suite::default_suite();
    for kind in ProtocolKind::ALL {
        let scenarios = suite.scenarios.iter().filter(|s| s.protocol == kind).count();
        assert!(scenarios >= 2, "{kind}");
    }
    assert_eq!(suite.clone().filter(ProtocolKind::Dns).scenarios.len(), 4);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let cases = [
        ("seed = 1\n[[scenario]]\nprotocol = \"nope\"\ntopology = \"chain\"\n", 2),
        ("seed = 1\n\n[[scenario]]\nprotocol = \"central\"\ntopology = \"chain\"\ncolour = 3\n", 6),
        ("seed = 1\n[[scenario]]\nprotocol = \"central\"\ntopology = \"chain\"\nn = [32, 16]\n", 2),
        ("seed = \"x\"\n", 1),
        ("seed = 1\n[[scenario]\n", 2),
    ];
    for (text, line) in cases {
        match text.parse::<Suite>() {
            Err(SuiteError::Parse { line: got, .. }) | Err(SuiteError::Invalid { line: got, .. }) => {
                assert_eq!(got, line, "{text:?}")
            }
            other => panic!("{text:?} gave {other:?}"),
        }
    }
    let err = "seed = 1\n[[scenario]]\nprotocol = \"central\"\ntopology = \"chain\"\nkey_bits = 40\n".parse::<Suite>();
    assert!(err.unwrap_err().to_string().starts_with("line 2: "));
    let dup = format!("{TWO}\n[[scenario]]\nname = \"a\"\nprotocol = \"dht\"\ntopology = \"chain\"\n");
    assert!(matches!(dup.parse::<Suite>(), Err(SuiteError::Invalid { line: 18, .. })));
}

#[test]
fn scalar_and_list_sweeps_parse() {
    let suite: Suite = TWO.parse().unwrap();
    assert_eq!(suite.seed, 11);
    assert_eq!(suite.scenarios[0].points(), vec![(8, 20), (16, 20)]);
    assert_eq!(suite.scenarios[1].points(), vec![(8, 10), (8, 20)]);
    assert_eq!(suite.scenarios[0].line, 4);
    assert_eq!(suite.scenarios[1].topology, TopologyKind::Chain);
}

#[test]
fn missing_suite_file_is_an_io_error() {
    let err = Suite::load("/nonexistent/suite.toml").unwrap_err();
    assert!(matches!(err, SuiteError::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/suite.toml"));
}

#[test]
fn seeds_do_not_depend_on_order_or_filter() {
    let suite: Suite = TWO.parse().unwrap();
    let mut reversed = suite.clone();
    reversed.scenarios.reverse();
    let a = run_suite(&suite);
    let b = run_suite(&reversed);
    let seeds = |o: &dataloc::scenario::SuiteOutcome| {
        let mut v: Vec<(String, usize, usize, u64)> = o
            .points
            .iter()
            .map(|p| (p.scenario.clone(), p.measurement.record.n, p.measurement.record.d, p.seed))
            .collect();
        v.sort();
        v
    };
    assert_eq!(seeds(&a), seeds(&b));
    let gossip_only = run_suite(&suite.clone().filter(ProtocolKind::Gossip));
    let kept: Vec<_> = seeds(&a).into_iter().filter(|s| s.0 == "b").collect();
    assert_eq!(seeds(&gossip_only), kept);
    let s = &suite.scenarios[0];
    assert_ne!(point_seed(11, s, 8, 20), point_seed(12, s, 8, 20));
    assert_ne!(point_seed(11, s, 8, 20), point_seed(11, s, 16, 20));
}

#[test]
fn outputs_land_in_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_suite(&TWO.parse().unwrap());
    write_outputs(&out, dir.path()).unwrap();
    for f in ["metrics.csv", "evidence.csv", "table1.txt", "table1.csv", "conjecture.txt", "failures.txt"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 5);
    let mut reader = csv::Reader::from_reader(metrics.as_bytes());
    for row in reader.deserialize::<dataloc::measure::MetricsRecord>() {
        let row = row.unwrap();
        assert!(row.protocol == "central" || row.protocol == "gossip");
    }
    let conjecture = std::fs::read_to_string(dir.path().join("conjecture.txt")).unwrap();
    assert!(conjecture.starts_with("conjecture check failed: no best d-sweep for central"));
    let plots = std::fs::read_dir(dir.path().join("plots")).unwrap().count();
    assert!(plots > 0);
}

#[test]
fn svg_plot_is_well_formed() {
    let svg = svg_plot("t", "n", "links", &[(16.0, 1.0), (32.0, 2.0), (64.0, 0.0), (128.0, 8.0)]);
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), 3);
    let empty = svg_plot("t", "n", "y", &[]);
    assert!(empty.starts_with("<svg"));
}

#[test]
fn local_lookups_cost_nothing() {
    for kind in ProtocolKind::ALL {
        let net = Network::new(Topology::build(TopologyKind::Ring, 12, 0).unwrap());
        let mut p = build_protocol(kind, net, &ProtocolParams::default()).unwrap();
        let base = p.conventional_name("obj", 0);
        let out = p.store(PlacementRequest::new(DataId::new(base).unwrap(), Some(NodeId(3)))).unwrap();
        p.settle().unwrap();
        let t = p.locate(&out.name, out.stored_at).unwrap();
        assert!(t.success, "{kind}");
        assert_eq!((t.requests, t.links_used), (0, 0), "{kind}");
    }
}

#[test]
fn measurements_are_truthful() {
    for kind in ProtocolKind::ALL {
        let net = Network::new(Topology::build(TopologyKind::BalancedTree { arity: 2 }, 31, 2).unwrap());
        let mut p = build_protocol(kind, net, &ProtocolParams { seed: 2, ..ProtocolParams::default() }).unwrap();
        let mut w = Workload::new(30, 2);
        w.lookups = 60;
        w.placement = Placement::Random;
        let m = measure(p.as_mut(), &w).unwrap();
        assert_eq!(m.untruthful, 0, "{kind}");
        assert_eq!(m.lookups, 60, "{kind}");
        assert_eq!(m.changes, 8, "{kind}");
        assert!(m.success_rate > 0.0, "{kind}");
        assert!(m.max_request_share <= 1.0, "{kind}");
        assert_eq!(m.record.manual_intervention, m.reconfig.manual_intervention, "{kind}");
        assert_eq!(m.record.protocol, kind.label());
    }
}
