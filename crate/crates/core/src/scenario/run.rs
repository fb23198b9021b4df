use rayon::prelude::*;

use super::{Scenario, Suite, SuiteError};
use crate::audit::{conjecture_check, reproduce_table, AuditError, Axis, Case, ConjectureReport, SweepSet, Table1Report};
use crate::hash::keyspace::{fmix64, fnv1a};
use crate::measure::{build_protocol, measure, Measurement, Workload};
use crate::net::{Network, Topology};
use crate::proto::ProtocolKind;

#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub scenario: String,
    pub protocol: ProtocolKind,
    pub case: Case,
    pub seed: u64,
    pub measurement: Measurement,
}

/// Seed of one grid point, independent of which other scenarios run.
pub fn point_seed(suite_seed: u64, scenario: &Scenario, n: usize, d: usize) -> u64 {
    let base = scenario.seed.unwrap_or_else(|| fmix64(suite_seed ^ fnv1a(scenario.name.as_bytes())));
    fmix64(base ^ fmix64((n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ d as u64))
}

fn run_point(s: &Scenario, n: usize, d: usize, suite_seed: u64) -> Result<PointResult, SuiteError> {
    let seed = point_seed(suite_seed, s, n, d);
    let fail = |source| SuiteError::Point { scenario: s.name.clone(), n, d, source };
    let topo = Topology::build_with_width(s.topology, n, seed, s.address_width).map_err(|e| fail(e.into()))?;
    let mut params = s.params.clone();
    params.seed = seed;
    let mut proto = build_protocol(s.protocol, Network::new(topo), &params).map_err(fail)?;
    let workload = Workload {
        d,
        lookups: s.lookups.unwrap_or(10 * d),
        changes: s.changes,
        relocations: s.relocations,
        placement: s.placement,
        seed: fmix64(seed ^ 0x5eed),
    };
    let measurement = measure(proto.as_mut(), &workload).map_err(fail)?;
    Ok(PointResult { scenario: s.name.clone(), protocol: s.protocol, case: s.case, seed, measurement })
}

/// One result per grid point, in grid order.
pub fn run_scenario(s: &Scenario, suite_seed: u64) -> Vec<Result<PointResult, SuiteError>> {
    s.points().into_par_iter().map(|(n, d)| run_point(s, n, d, suite_seed)).collect()
}

#[derive(Debug)]
pub struct SuiteOutcome {
    pub seed: u64,
    pub points: Vec<PointResult>,
    pub failures: Vec<SuiteError>,
    pub sweeps: SweepSet,
    pub table: Table1Report,
    pub conjecture: Result<ConjectureReport, AuditError>,
}

impl SuiteOutcome {
    /// Whether the run should exit with success.
    pub fn passed(&self) -> bool {
        self.conjecture.is_ok() && self.table.all_match()
    }
}

fn collect_sweeps(suite: &Suite, points: &[PointResult]) -> SweepSet {
    let mut set = SweepSet::default();
    for s in &suite.scenarios {
        let mine = points.iter().filter(|p| p.scenario == s.name);
        for p in mine {
            let r = &p.measurement.record;
            let entry = set.entry(s.protocol, s.case);
            if s.n.len() > 1 && r.d == s.d[0] {
                entry.by_n.push(p.measurement.clone());
            }
            if s.d.len() > 1 && r.n == s.n[0] {
                entry.by_d.push(p.measurement.clone());
            }
        }
    }
    for sw in &mut set.sweeps {
        sw.by_n.sort_by_key(|m| m.record.n);
        sw.by_n.dedup_by_key(|m| m.record.n);
        sw.by_d.sort_by_key(|m| m.record.d);
        sw.by_d.dedup_by_key(|m| m.record.d);
    }
    set.sweeps.retain(|sw| !sw.by_n.is_empty() || !sw.by_d.is_empty());
    set
}

/// Runs every grid point of every scenario in parallel, then audits the results.
pub fn run_suite(suite: &Suite) -> SuiteOutcome {
    let jobs: Vec<(&Scenario, usize, usize)> =
        suite.scenarios.iter().flat_map(|s| s.points().into_iter().map(move |(n, d)| (s, n, d))).collect();
    let results: Vec<Result<PointResult, SuiteError>> =
        jobs.into_par_iter().map(|(s, n, d)| run_point(s, n, d, suite.seed)).collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) => failures.push(e),
        }
    }
    let sweeps = collect_sweeps(suite, &points);
    let table = reproduce_table(&sweeps);
    let conjecture = sweeps.verdicts().and_then(|v| conjecture_check(&v));
    SuiteOutcome { seed: suite.seed, points, failures, sweeps, table, conjecture }
}

impl SweepSet {
    pub fn axes(&self, protocol: ProtocolKind, case: Case) -> Vec<Axis> {
        let Some(s) = self.get(protocol, case) else { return Vec::new() };
        [Axis::N, Axis::D].into_iter().filter(|&a| !s.axis(a).is_empty()).collect()
    }
}
