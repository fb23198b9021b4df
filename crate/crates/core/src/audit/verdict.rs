use std::fmt;
use std::fmt::Write as _;

use super::{AuditError, Axis, Case, Growth, Metric, ProtocolSweeps, SweepSet};
use crate::proto::ProtocolKind;

/// Request share above which one node counts as a bottleneck.
pub const BOTTLENECK_SHARE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    /// Scalability.
    S,
    /// Topology-change transparency.
    To,
    /// Naming and placement freedom.
    N,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::S => "S",
            Property::To => "To",
            Property::N => "N",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TradeoffVerdict {
    pub protocol: ProtocolKind,
    pub scalable: bool,
    pub transparent: bool,
    pub naming: bool,
    /// One line per violated condition.
    pub reasons: Vec<String>,
}

impl TradeoffVerdict {
    pub fn failing(&self) -> Vec<Property> {
        let mut out = Vec::new();
        if !self.scalable {
            out.push(Property::S);
        }
        if !self.transparent {
            out.push(Property::To);
        }
        if !self.naming {
            out.push(Property::N);
        }
        out
    }

    pub fn all_hold(&self) -> bool {
        self.scalable && self.transparent && self.naming
    }
}

/// The properties each protocol is expected to give up.
pub fn expected_failures(kind: ProtocolKind) -> Vec<Property> {
    match kind {
        ProtocolKind::Central | ProtocolKind::Gossip | ProtocolKind::Flooding | ProtocolKind::RandomWalk => {
            vec![Property::S]
        }
        ProtocolKind::Dns => vec![Property::To],
        ProtocolKind::IpRouting => vec![Property::To, Property::N],
        ProtocolKind::Dht | ProtocolKind::ConsistentHashing => vec![Property::N],
    }
}

/// Decides S, To and N from the best-case sweeps of one protocol.
pub fn classify(sweeps: &ProtocolSweeps) -> Result<TradeoffVerdict, AuditError> {
    let kind = sweeps.protocol;
    if sweeps.by_n.is_empty() {
        return Err(AuditError::MissingSweep { protocol: kind, case: sweeps.case, axis: Axis::N });
    }
    if sweeps.by_d.is_empty() {
        return Err(AuditError::MissingSweep { protocol: kind, case: sweeps.case, axis: Axis::D });
    }
    let mut reasons = Vec::new();

    let table_d = sweeps.fit(Axis::D, Metric::MaxTableSize)?.class;
    let table_n = sweeps.fit(Axis::N, Metric::MaxTableSize)?.class;
    if table_d >= Growth::Linear && table_n != Growth::Inverse {
        reasons.push(format!("table size grows {table_d} in d and {table_n} in n"));
    }
    let requests = sweeps.fit(Axis::N, Metric::LookupRequests)?.class;
    if requests >= Growth::Linear {
        reasons.push(format!("requests grow {requests} in n"));
    }
    let links = sweeps.fit(Axis::N, Metric::LinksUsed)?.class;
    if links >= Growth::Quadratic {
        reasons.push(format!("links grow {links} in n"));
    }
    let largest = sweeps.by_n.iter().max_by_key(|m| m.record.n).expect("non-empty");
    if largest.max_request_share > BOTTLENECK_SHARE {
        reasons.push(format!(
            "one node receives {:.2} of all requests at n={}",
            largest.max_request_share, largest.record.n
        ));
    }
    let scalable = reasons.is_empty();

    let transparent = !sweeps.all().any(|m| m.record.manual_intervention);
    if !transparent {
        reasons.push("topology changes need manual intervention".into());
    }
    let accepted = sweeps.all().all(|m| m.name_accepted);
    let honored = sweeps.all().all(|m| m.placement_honored);
    let stable = sweeps.all().all(|m| m.name_stable);
    if !accepted {
        reasons.push("names are imposed by the protocol".into());
    }
    if !honored {
        reasons.push("placement is imposed by the protocol".into());
    }
    if !stable {
        reasons.push("names change when data moves".into());
    }
    Ok(TradeoffVerdict { protocol: kind, scalable, transparent, naming: accepted && honored && stable, reasons })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConjectureReport {
    pub verdicts: Vec<TradeoffVerdict>,
}

impl ConjectureReport {
    /// Protocols whose failing set differs from [`expected_failures`].
    pub fn unexpected(&self) -> Vec<ProtocolKind> {
        self.verdicts.iter().filter(|v| v.failing() != expected_failures(v.protocol)).map(|v| v.protocol).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let mark = |b: bool| if b { "yes" } else { "no" };
            let failing: Vec<String> = v.failing().iter().map(|p| p.to_string()).collect();
            let expected: Vec<String> = expected_failures(v.protocol).iter().map(|p| p.to_string()).collect();
            let _ = writeln!(
                out,
                "{:<20} S={:<3} To={:<3} N={:<3} fails {{{}}} expected {{{}}}",
                v.protocol.label(),
                mark(v.scalable),
                mark(v.transparent),
                mark(v.naming),
                failing.join(","),
                expected.join(",")
            );
            for r in &v.reasons {
                let _ = writeln!(out, "    {r}");
            }
        }
        let _ = writeln!(out, "no protocol satisfies S, To and N together");
        out
    }
}

/// Fails if any verdict satisfies all three properties or a protocol is missing.
pub fn conjecture_check(verdicts: &[TradeoffVerdict]) -> Result<ConjectureReport, AuditError> {
    if let Some(v) = verdicts.iter().find(|v| v.all_hold()) {
        return Err(AuditError::Counterexample(v.protocol));
    }
    let missing: Vec<&str> = ProtocolKind::ALL
        .iter()
        .filter(|k| !verdicts.iter().any(|v| v.protocol == **k))
        .map(|k| k.label())
        .collect();
    if !missing.is_empty() {
        return Err(AuditError::MissingProtocols(missing.join(", ")));
    }
    let mut verdicts = verdicts.to_vec();
    verdicts.sort_by_key(|v| ProtocolKind::ALL.iter().position(|k| *k == v.protocol));
    Ok(ConjectureReport { verdicts })
}

impl SweepSet {
    /// Verdicts for every protocol with a best-case sweep.
    pub fn verdicts(&self) -> Result<Vec<TradeoffVerdict>, AuditError> {
        ProtocolKind::ALL
            .iter()
            .filter_map(|&k| self.get(k, Case::Best))
            .map(classify)
            .collect()
    }
}
