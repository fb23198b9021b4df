//! Python bindings for the data location lab.

use std::path::PathBuf;
use std::str::FromStr;

use dataloc_core::audit::{fit_scaling, Case, ScalingSeries};
use dataloc_core::measure::{build_protocol, measure, BoxedProtocol, Placement, ProtocolParams, Workload};
use dataloc_core::net::{Change, ChangeNotice, Network, NodeId, Topology, TopologyKind};
use dataloc_core::proto::{DataId, NameAfterMove, PlacementRequest, ProtocolKind};
use dataloc_core::scenario::{metrics_csv, run_suite as run_suite_core, write_outputs, PointResult, Suite};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn protocol_kind(label: &str) -> PyResult<ProtocolKind> {
    ProtocolKind::from_str(label).map_err(value_err)
}

#[pyclass(get_all, frozen, module = "dataloc")]
pub struct Placed {
    name: String,
    stored_at: u32,
    name_accepted: bool,
    placement_honored: bool,
    stable_name: bool,
}

#[pymethods]
impl Placed {
    fn __repr__(&self) -> String {
        format!("Placed(name={:?}, stored_at={})", self.name, self.stored_at)
    }
}

#[pyclass(get_all, frozen, module = "dataloc")]
pub struct Lookup {
    requests: u64,
    links_used: u64,
    hops: u64,
    messages: u64,
    success: bool,
    resolved_at: Option<u32>,
}

#[pymethods]
impl Lookup {
    fn __repr__(&self) -> String {
        format!(
            "Lookup(success={}, requests={}, links_used={}, hops={})",
            self.success, self.requests, self.links_used, self.hops
        )
    }
}

#[pyclass(get_all, frozen, module = "dataloc")]
pub struct Reconfig {
    node: u32,
    messages: u64,
    links_used: u64,
    tables_updated: u64,
    records_moved: u64,
    manual_intervention: bool,
}

#[pymethods]
impl Reconfig {
    fn __repr__(&self) -> String {
        format!(
            "Reconfig(node={}, messages={}, manual_intervention={})",
            self.node, self.messages, self.manual_intervention
        )
    }
}

/// One protocol instance on its own simulated network.
#[pyclass(unsendable, module = "dataloc")]
pub struct Simulation {
    inner: BoxedProtocol,
}

#[pymethods]
impl Simulation {
    #[new]
    #[pyo3(signature = (protocol, topology, n, seed = 0, key_bits = None, ttl = None, walkers = 1, dns_arity = Some(2)))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        protocol: &str,
        topology: &str,
        n: usize,
        seed: u64,
        key_bits: Option<u8>,
        ttl: Option<u32>,
        walkers: u32,
        dns_arity: Option<usize>,
    ) -> PyResult<Self> {
        let kind = protocol_kind(protocol)?;
        let topo = Topology::build(TopologyKind::from_str(topology).map_err(value_err)?, n, seed).map_err(value_err)?;
        let mut params = ProtocolParams { ttl, walkers, dns_arity, seed, ..ProtocolParams::default() };
        if let Some(bits) = key_bits {
            params.key_bits = bits;
        }
        let inner = build_protocol(kind, Network::new(topo), &params).map_err(value_err)?;
        Ok(Simulation { inner })
    }

    #[getter]
    fn protocol(&self) -> &'static str {
        self.inner.kind().label()
    }

    fn nodes(&self) -> Vec<u32> {
        self.inner.network().topology().node_ids().into_iter().map(|v| v.0).collect()
    }

    fn conventional_name(&self, base: &str, index: usize) -> String {
        self.inner.conventional_name(base, index)
    }

    #[pyo3(signature = (name, preferred = None))]
    fn store(&mut self, name: &str, preferred: Option<u32>) -> PyResult<Placed> {
        let data = DataId::new(name).map_err(value_err)?;
        let out = self.inner.store(PlacementRequest::new(data, preferred.map(NodeId))).map_err(value_err)?;
        Ok(Placed {
            name: out.name.as_str().to_string(),
            stored_at: out.stored_at.0,
            name_accepted: out.name_accepted,
            placement_honored: out.placement_honored,
            stable_name: out.name_after_move == NameAfterMove::Stable,
        })
    }

    fn settle(&mut self) -> PyResult<u64> {
        self.inner.settle().map_err(runtime_err)
    }

    fn locate(&mut self, name: &str, origin: u32) -> PyResult<Lookup> {
        let data = DataId::new(name).map_err(value_err)?;
        let t = self.inner.locate(&data, NodeId(origin)).map_err(value_err)?;
        Ok(Lookup {
            requests: t.requests,
            links_used: t.links_used,
            hops: t.hops,
            messages: t.messages,
            success: t.success,
            resolved_at: t.resolved_at.map(|v| v.0),
        })
    }

    fn holder(&self, name: &str) -> PyResult<Option<u32>> {
        let data = DataId::new(name).map_err(value_err)?;
        Ok(self.inner.holder(&data).map(|v| v.0))
    }

    fn relocate(&mut self, name: &str, to: u32) -> PyResult<String> {
        let data = DataId::new(name).map_err(value_err)?;
        Ok(self.inner.relocate(&data, NodeId(to)).map_err(value_err)?.as_str().to_string())
    }

    fn join(&mut self, links: Vec<u32>) -> PyResult<Reconfig> {
        self.apply(Change::Join { links: links.into_iter().map(NodeId).collect() })
    }

    fn leave(&mut self, node: u32) -> PyResult<Reconfig> {
        self.apply(Change::Leave(NodeId(node)))
    }

    /// Moves `node` to a fresh, unused address.
    fn readdress(&mut self, node: u32) -> PyResult<Reconfig> {
        let fresh = self.inner.network().topology().fresh_address();
        self.apply(Change::Readdress(NodeId(node), fresh))
    }

    fn manual_update(&mut self) -> PyResult<u64> {
        Ok(self.inner.manual_update().map_err(runtime_err)?.messages)
    }

    /// `(max_table_size, table_count)`.
    fn tables(&self) -> (usize, usize) {
        let t = self.inner.tables();
        (t.max_table_size, t.table_count)
    }
}

impl Simulation {
    fn apply(&mut self, change: Change) -> PyResult<Reconfig> {
        let (notice, t) = self.inner.change(change).map_err(value_err)?;
        let node = match notice {
            ChangeNotice::Joined { node, .. } | ChangeNotice::Left { node, .. } | ChangeNotice::Readdressed { node, .. } => {
                node
            }
        };
        Ok(Reconfig {
            node: node.0,
            messages: t.messages,
            links_used: t.links_used,
            tables_updated: t.tables_updated,
            records_moved: t.records_moved,
            manual_intervention: t.manual_intervention,
        })
    }
}

#[pyfunction]
fn list_protocols() -> Vec<&'static str> {
    ProtocolKind::ALL.iter().map(|k| k.label()).collect()
}

/// Fits `(x, y)` points; returns `(class, r2)`.
#[pyfunction]
fn fit(points: Vec<(f64, f64)>) -> PyResult<(String, f64)> {
    let s = ScalingSeries::new("py", "y", points).map_err(value_err)?;
    let c = fit_scaling(&s).map_err(value_err)?;
    Ok((c.class.to_string(), c.fit_quality))
}

/// Runs one grid point and returns its metrics CSV (header plus one row).
#[pyfunction]
#[pyo3(signature = (protocol, topology, n, d, seed = 0, lookups = None, changes = 8, farthest = false))]
#[allow(clippy::too_many_arguments)]
fn measure_point(
    protocol: &str,
    topology: &str,
    n: usize,
    d: usize,
    seed: u64,
    lookups: Option<usize>,
    changes: usize,
    farthest: bool,
) -> PyResult<String> {
    let kind = protocol_kind(protocol)?;
    let topo = Topology::build(TopologyKind::from_str(topology).map_err(value_err)?, n, seed).map_err(value_err)?;
    let params = ProtocolParams { seed, ..ProtocolParams::default() };
    let mut p = build_protocol(kind, Network::new(topo), &params).map_err(value_err)?;
    let mut w = Workload::new(d, seed);
    w.lookups = lookups.unwrap_or(w.lookups);
    w.changes = changes;
    if farthest {
        w.placement = Placement::Farthest;
    }
    let measurement = measure(p.as_mut(), &w).map_err(runtime_err)?;
    let point = PointResult { scenario: "python".into(), protocol: kind, case: Case::Best, seed, measurement };
    metrics_csv(&[point]).map_err(runtime_err)
}

/// Runs a suite (TOML text, or "default") and returns `(passed, table_text, metrics_csv)`.
/// With `out`, also writes the full result directory.
#[pyfunction]
#[pyo3(signature = (suite = "default", out = None, seed = None))]
fn run_suite(py: Python<'_>, suite: &str, out: Option<PathBuf>, seed: Option<u64>) -> PyResult<(bool, String, String)> {
    let mut suite: Suite = if suite == "default" { Suite::default_suite() } else { suite.parse().map_err(value_err)? };
    if let Some(s) = seed {
        suite.seed = s;
    }
    let outcome = py.detach(|| run_suite_core(&suite));
    if let Some(dir) = out {
        write_outputs(&outcome, &dir).map_err(runtime_err)?;
    }
    let csv = metrics_csv(&outcome.points).map_err(runtime_err)?;
    Ok((outcome.passed(), outcome.table.to_text(), csv))
}

#[pymodule]
pub fn dataloc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Simulation>()?;
    m.add_class::<Placed>()?;
    m.add_class::<Lookup>()?;
    m.add_class::<Reconfig>()?;
    m.add_function(wrap_pyfunction!(list_protocols, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(measure_point, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
