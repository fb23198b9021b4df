//! Scaling classification, the reproduced complexity table and the S/To/N check.

use std::fmt;

use thiserror::Error;

use crate::measure::Measurement;
use crate::proto::ProtocolKind;

mod fit;
mod table;
mod verdict;

pub use fit::{fit_scaling, FitError, Growth, ScalingClass, ScalingSeries, CONSTANT_CV, MIN_POINTS, MIN_R2};
pub use table::{claims, reproduce_table, Cell, CellSpec, Check, CheckOutcome, Column, Row, Table1Report};
pub use verdict::{classify, BOTTLENECK_SHARE, conjecture_check, expected_failures, ConjectureReport, Property, TradeoffVerdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("{protocol} {metric}: {source}")]
    Fit { protocol: String, metric: String, source: FitError },
    #[error("no {case} {axis}-sweep for {protocol}")]
    MissingSweep { protocol: ProtocolKind, case: Case, axis: Axis },
    #[error("no verdict for: {0}")]
    MissingProtocols(String),
    #[error("{0} satisfies S, To and N at once")]
    Counterexample(ProtocolKind),
}

/// Which scenario of a protocol a sweep belongs to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    #[default]
    Best,
    Worst,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::Best => "best",
            Case::Worst => "worst",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axis {
    N,
    D,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::N => "n",
            Axis::D => "d",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Metric {
    MaxTableSize,
    TableCount,
    LookupRequests,
    LinksUsed,
    LinksPerRequest,
    ReconfigMessages,
    TablesUpdated,
    RecordsMoved,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::MaxTableSize => "max_table_size",
            Metric::TableCount => "table_count",
            Metric::LookupRequests => "mean_lookup_requests",
            Metric::LinksUsed => "mean_links_used",
            Metric::LinksPerRequest => "links_per_request",
            Metric::ReconfigMessages => "reconfig_messages_per_change",
            Metric::TablesUpdated => "tables_updated_per_change",
            Metric::RecordsMoved => "records_moved_per_change",
        }
    }

    pub fn value(self, m: &Measurement) -> f64 {
        match self {
            Metric::MaxTableSize => m.record.max_table_size as f64,
            Metric::TableCount => m.record.table_count as f64,
            Metric::LookupRequests => m.record.mean_lookup_requests,
            Metric::LinksUsed => m.record.mean_links_used,
            Metric::LinksPerRequest => m.links_per_request(),
            Metric::ReconfigMessages => m.mean_reconfig_messages(),
            Metric::TablesUpdated => m.mean_tables_updated(),
            Metric::RecordsMoved => m.mean_records_moved(),
        }
    }
}

/// Measurements of one protocol case along the node and data axes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSweeps {
    pub protocol: ProtocolKind,
    pub case: Case,
    /// Increasing `n`, fixed `d`.
    pub by_n: Vec<Measurement>,
    /// Increasing `d`, fixed `n`.
    pub by_d: Vec<Measurement>,
}

impl ProtocolSweeps {
    pub fn new(protocol: ProtocolKind, case: Case) -> Self {
        ProtocolSweeps { protocol, case, by_n: Vec::new(), by_d: Vec::new() }
    }

    pub fn axis(&self, axis: Axis) -> &[Measurement] {
        match axis {
            Axis::N => &self.by_n,
            Axis::D => &self.by_d,
        }
    }

    pub fn series(&self, axis: Axis, metric: Metric) -> Result<ScalingSeries, AuditError> {
        let points = self
            .axis(axis)
            .iter()
            .map(|m| {
                let x = match axis {
                    Axis::N => m.record.n,
                    Axis::D => m.record.d,
                };
                (x as f64, metric.value(m))
            })
            .collect();
        ScalingSeries::new(self.protocol.label(), metric.label(), points).map_err(|source| AuditError::Fit {
            protocol: self.protocol.label().to_string(),
            metric: format!("{axis}:{}", metric.label()),
            source,
        })
    }

    pub fn fit(&self, axis: Axis, metric: Metric) -> Result<ScalingClass, AuditError> {
        let s = self.series(axis, metric)?;
        fit_scaling(&s).map_err(|source| AuditError::Fit {
            protocol: self.protocol.label().to_string(),
            metric: format!("{axis}:{}", metric.label()),
            source,
        })
    }

    pub fn all(&self) -> impl Iterator<Item = &Measurement> {
        self.by_n.iter().chain(&self.by_d)
    }
}

/// All sweeps of a suite run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepSet {
    pub sweeps: Vec<ProtocolSweeps>,
}

impl SweepSet {
    pub fn get(&self, protocol: ProtocolKind, case: Case) -> Option<&ProtocolSweeps> {
        self.sweeps.iter().find(|s| s.protocol == protocol && s.case == case)
    }

    pub fn entry(&mut self, protocol: ProtocolKind, case: Case) -> &mut ProtocolSweeps {
        match self.sweeps.iter().position(|s| s.protocol == protocol && s.case == case) {
            Some(i) => &mut self.sweeps[i],
            None => {
                self.sweeps.push(ProtocolSweeps::new(protocol, case));
                self.sweeps.last_mut().expect("just pushed")
            }
        }
    }
}
