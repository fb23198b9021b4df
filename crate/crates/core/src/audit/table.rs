use std::fmt::Write as _;

use super::{Axis, Case, Growth, Metric, ProtocolSweeps, SweepSet};
use crate::proto::ProtocolKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Column {
    TableSize,
    TableCount,
    Requests,
    Links,
    Reconfig,
    Naming,
    NameChanges,
}

impl Column {
    pub const ALL: [Column; 7] = [
        Column::TableSize,
        Column::TableCount,
        Column::Requests,
        Column::Links,
        Column::Reconfig,
        Column::Naming,
        Column::NameChanges,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Column::TableSize => "table size",
            Column::TableCount => "table count",
            Column::Requests => "requests",
            Column::Links => "links",
            Column::Reconfig => "reconfiguration",
            Column::Naming => "naming",
            Column::NameChanges => "name changes on move",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Check {
    /// Scaling class of one metric along one axis.
    Growth { case: Case, axis: Axis, metric: Metric, claimed: Growth },
    /// Requests times links per request, each factor fitted on its own.
    Product { case: Case, axis: Axis, claimed: (Growth, Growth) },
    Manual(bool),
    NameAccepted(bool),
    PlacementHonored(bool),
    NameStable(bool),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellSpec {
    pub column: Column,
    /// The complexity as the paper writes it.
    pub paper: &'static str,
    pub checks: Vec<Check>,
}

fn growth(axis: Axis, metric: Metric, claimed: Growth) -> Check {
    Check::Growth { case: Case::Best, axis, metric, claimed }
}

fn worst(axis: Axis, metric: Metric, claimed: Growth) -> Check {
    Check::Growth { case: Case::Worst, axis, metric, claimed }
}

fn naming(accepted: bool, honored: bool, paper: &'static str) -> CellSpec {
    CellSpec {
        column: Column::Naming,
        paper,
        checks: vec![Check::NameAccepted(accepted), Check::PlacementHonored(honored)],
    }
}

fn name_changes(changes: bool) -> CellSpec {
    CellSpec {
        column: Column::NameChanges,
        paper: if changes { "yes" } else { "no" },
        checks: vec![Check::NameStable(!changes)],
    }
}

fn cell(column: Column, paper: &'static str, checks: Vec<Check>) -> CellSpec {
    CellSpec { column, paper, checks }
}

/// The claimed row of the complexity table for one protocol.
pub fn claims(kind: ProtocolKind) -> Vec<CellSpec> {
    use Axis::{D, N};
    use Growth::*;
    use Metric::*;
    match kind {
        ProtocolKind::Central => vec![
            cell(Column::TableSize, "O(d)", vec![growth(D, MaxTableSize, Linear), growth(N, MaxTableSize, Constant)]),
            cell(Column::TableCount, "O(1)", vec![growth(N, TableCount, Constant)]),
            cell(Column::Requests, "O(1)", vec![growth(N, LookupRequests, Constant)]),
            cell(Column::Links, "O(diameter(n)) = O(n)", vec![growth(N, LinksUsed, Linear)]),
            cell(Column::Reconfig, "O(1)", vec![growth(N, ReconfigMessages, Constant), Check::Manual(false)]),
            naming(true, true, "\"obj\""),
            name_changes(false),
        ],
        ProtocolKind::Gossip => vec![
            cell(Column::TableSize, "O(d)", vec![growth(D, MaxTableSize, Linear), growth(N, MaxTableSize, Constant)]),
            cell(Column::TableCount, "O(n)", vec![growth(N, TableCount, Linear)]),
            cell(Column::Requests, "O(1)", vec![growth(N, LookupRequests, Constant)]),
            cell(Column::Links, "O(0)", vec![growth(N, LinksUsed, Zero)]),
            cell(Column::Reconfig, "O(0)", vec![growth(N, ReconfigMessages, Zero), Check::Manual(false)]),
            naming(true, true, "\"obj\""),
            name_changes(false),
        ],
        ProtocolKind::Dns => vec![
            cell(
                Column::TableSize,
                "[O(d/n); O(d)]",
                vec![
                    growth(D, MaxTableSize, Linear),
                    growth(N, MaxTableSize, Inverse),
                    worst(D, MaxTableSize, Linear),
                    worst(N, MaxTableSize, Constant),
                ],
            ),
            cell(Column::TableCount, "O(n)", vec![growth(N, TableCount, Linear)]),
            cell(Column::Requests, "O(diameter(n))", vec![growth(N, LookupRequests, Logarithmic)]),
            cell(
                Column::Links,
                "O(2 x diameter(n)^2)",
                vec![Check::Product { case: Case::Best, axis: N, claimed: (Logarithmic, Logarithmic) }],
            ),
            cell(Column::Reconfig, "does not support dynamicity", vec![Check::Manual(true)]),
            naming(true, true, "\"obj.suffix\""),
            name_changes(false),
        ],
        ProtocolKind::IpRouting => vec![
            cell(Column::TableSize, "O(n)", vec![growth(N, MaxTableSize, Linear), growth(D, MaxTableSize, Constant)]),
            cell(Column::TableCount, "O(n)", vec![growth(N, TableCount, Linear)]),
            cell(Column::Requests, "O(1)", vec![growth(N, LookupRequests, Constant)]),
            cell(Column::Links, "O(diameter(n))", vec![growth(N, LinksUsed, Linear)]),
            cell(Column::Reconfig, "an additional protocol is required", vec![Check::Manual(true)]),
            naming(false, true, "\"destination/obj\""),
            name_changes(true),
        ],
        ProtocolKind::Dht => vec![
            cell(Column::TableSize, "O(d/n)", vec![growth(D, MaxTableSize, Linear), growth(N, MaxTableSize, Inverse)]),
            cell(Column::TableCount, "O(n)", vec![growth(N, TableCount, Linear)]),
            cell(Column::Requests, "O(log(n))", vec![growth(N, LookupRequests, Logarithmic)]),
            cell(
                Column::Links,
                "O(log(n) x diameter(n)) = O(n x log(n))",
                vec![Check::Product { case: Case::Best, axis: N, claimed: (Logarithmic, Linear) }],
            ),
            cell(
                Column::Reconfig,
                "O(log(n) + d/n)",
                vec![growth(N, TablesUpdated, Logarithmic), growth(D, RecordsMoved, Linear), Check::Manual(false)],
            ),
            naming(true, false, "hash^-1(obj)"),
            name_changes(true),
        ],
        ProtocolKind::ConsistentHashing => vec![
            cell(Column::TableSize, "O(n)", vec![growth(N, MaxTableSize, Linear), growth(D, MaxTableSize, Constant)]),
            cell(Column::TableCount, "O(n)", vec![growth(N, TableCount, Linear)]),
            cell(Column::Requests, "O(1)", vec![growth(N, LookupRequests, Constant)]),
            cell(Column::Links, "O(diameter(n)) = O(n)", vec![growth(N, LinksUsed, Linear)]),
            cell(
                Column::Reconfig,
                "O(n + d/n)",
                vec![growth(N, ReconfigMessages, Linear), growth(D, RecordsMoved, Linear), Check::Manual(false)],
            ),
            naming(true, false, "hash^-1(obj)"),
            name_changes(true),
        ],
        ProtocolKind::Flooding | ProtocolKind::RandomWalk => vec![
            cell(Column::TableSize, "O(0)", vec![growth(N, MaxTableSize, Zero), growth(D, MaxTableSize, Zero)]),
            cell(Column::TableCount, "O(0)", vec![growth(N, TableCount, Zero)]),
            cell(Column::Requests, "O(n)", vec![growth(N, LookupRequests, Linear)]),
            cell(Column::Links, "O(n x n) = O(n^2)", vec![growth(N, LinksUsed, Quadratic)]),
            cell(Column::Reconfig, "O(0)", vec![growth(N, ReconfigMessages, Zero), Check::Manual(false)]),
            naming(true, true, "\"obj\""),
            name_changes(false),
        ],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub check: Check,
    pub measured: String,
    pub claimed: String,
    pub r2: Option<f64>,
    pub ok: bool,
}

impl CheckOutcome {
    fn prefix(&self) -> String {
        match &self.check {
            Check::Growth { case, axis, .. } | Check::Product { case, axis, .. } => match case {
                Case::Best => format!("{axis}:"),
                Case::Worst => format!("worst {axis}:"),
            },
            Check::Manual(_) => "manual:".into(),
            Check::NameAccepted(_) => "name kept:".into(),
            Check::PlacementHonored(_) => "placement:".into(),
            Check::NameStable(_) => "stable:".into(),
        }
    }

    /// `measured(claimed)✓` or `measured(claimed)✗`.
    pub fn render(&self) -> String {
        format!("{}{}({}){}", self.prefix(), self.measured, self.claimed, if self.ok { "✓" } else { "✗" })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub column: Column,
    pub paper: &'static str,
    pub outcomes: Vec<CheckOutcome>,
}

impl Cell {
    pub fn ok(&self) -> bool {
        !self.outcomes.is_empty() && self.outcomes.iter().all(|o| o.ok)
    }

    pub fn render(&self) -> String {
        self.outcomes.iter().map(|o| o.render()).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub protocol: ProtocolKind,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table1Report {
    pub rows: Vec<Row>,
}

fn yes_no(b: bool) -> String {
    if b { "yes" } else { "no" }.to_string()
}

fn evaluate(check: &Check, set: &SweepSet, kind: ProtocolKind) -> CheckOutcome {
    let missing = |claimed: String| CheckOutcome {
        check: check.clone(),
        measured: "missing".into(),
        claimed,
        r2: None,
        ok: false,
    };
    let best = set.get(kind, Case::Best);
    let flag = |claimed: bool, get: &dyn Fn(&ProtocolSweeps) -> bool| match best {
        Some(s) if s.all().next().is_some() => {
            let measured = get(s);
            CheckOutcome { check: check.clone(), measured: yes_no(measured), claimed: yes_no(claimed), r2: None, ok: measured == claimed }
        }
        _ => missing(yes_no(claimed)),
    };
    match check {
        Check::Growth { case, axis, metric, claimed } => {
            let Some(s) = set.get(kind, *case) else { return missing(claimed.to_string()) };
            match s.fit(*axis, *metric) {
                Ok(c) => CheckOutcome {
                    check: check.clone(),
                    measured: c.class.to_string(),
                    claimed: claimed.to_string(),
                    r2: Some(c.fit_quality),
                    ok: c.class.meets(*claimed),
                },
                Err(_) => CheckOutcome {
                    check: check.clone(),
                    measured: "inconclusive".into(),
                    claimed: claimed.to_string(),
                    r2: None,
                    ok: false,
                },
            }
        }
        Check::Product { case, axis, claimed } => {
            let claimed_s = format!("{}*{}", claimed.0, claimed.1);
            let Some(s) = set.get(kind, *case) else { return missing(claimed_s) };
            let a = s.fit(*axis, Metric::LookupRequests);
            let b = s.fit(*axis, Metric::LinksPerRequest);
            match (a, b) {
                (Ok(a), Ok(b)) => CheckOutcome {
                    check: check.clone(),
                    measured: format!("{}*{}", a.class, b.class),
                    claimed: claimed_s,
                    r2: Some(a.fit_quality.min(b.fit_quality)),
                    ok: a.class.meets(claimed.0) && b.class.meets(claimed.1),
                },
                _ => CheckOutcome {
                    check: check.clone(),
                    measured: "inconclusive".into(),
                    claimed: claimed_s,
                    r2: None,
                    ok: false,
                },
            }
        }
        Check::Manual(c) => flag(*c, &|s| s.all().any(|m| m.record.manual_intervention)),
        Check::NameAccepted(c) => flag(*c, &|s| s.all().all(|m| m.name_accepted)),
        Check::PlacementHonored(c) => flag(*c, &|s| s.all().all(|m| m.placement_honored)),
        Check::NameStable(c) => flag(*c, &|s| s.all().all(|m| m.name_stable)),
    }
}

/// Measured classes next to the claimed ones, for every protocol present in `set`.
pub fn reproduce_table(set: &SweepSet) -> Table1Report {
    let mut rows = Vec::new();
    for kind in ProtocolKind::ALL {
        if set.get(kind, Case::Best).is_none() && set.get(kind, Case::Worst).is_none() {
            continue;
        }
        let cells = claims(kind)
            .into_iter()
            .map(|spec| Cell {
                column: spec.column,
                paper: spec.paper,
                outcomes: spec.checks.iter().map(|c| evaluate(c, set, kind)).collect(),
            })
            .collect();
        rows.push(Row { protocol: kind, cells });
    }
    Table1Report { rows }
}

impl Table1Report {
    pub fn all_match(&self) -> bool {
        self.rows.iter().all(|r| r.cells.iter().all(Cell::ok))
    }

    pub fn mismatches(&self) -> Vec<(ProtocolKind, Column)> {
        self.rows
            .iter()
            .flat_map(|r| r.cells.iter().filter(|c| !c.ok()).map(move |c| (r.protocol, c.column)))
            .collect()
    }

    pub fn row(&self, kind: ProtocolKind) -> Option<&Row> {
        self.rows.iter().find(|r| r.protocol == kind)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.protocol.title());
            for c in &row.cells {
                let _ = writeln!(out, "  {:<22} {:<42} {}", c.column.label(), c.paper, c.render());
            }
        }
        let _ = writeln!(out, "mismatched cells: {}", self.mismatches().len());
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["protocol".to_string()];
        header.extend(Column::ALL.iter().map(|c| c.label().to_string()));
        let _ = w.write_record(&header);
        for row in &self.rows {
            let mut rec = vec![row.protocol.label().to_string()];
            for col in Column::ALL {
                rec.push(row.cells.iter().find(|c| c.column == col).map(Cell::render).unwrap_or_default());
            }
            let _ = w.write_record(&rec);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }
}
