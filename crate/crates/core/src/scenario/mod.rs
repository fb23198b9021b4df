//! Suite files, sweep orchestration and report emission.

use std::ops::Range;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::audit::Case;
use crate::error::ProtocolError;
use crate::measure::{Placement, ProtocolParams};
use crate::net::{TopologyKind, DEFAULT_ADDRESS_WIDTH};
use crate::proto::ProtocolKind;

mod output;
mod run;

pub use output::{evidence_csv, metrics_csv, svg_plot, write_outputs, METRICS_HEADER};
pub use run::{point_seed, run_scenario, run_suite, PointResult, SuiteOutcome};

/// The eight-protocol suite that reproduces the complexity table.
pub const DEFAULT_SUITE: &str = include_str!("../../../../suites/table1.toml");

pub const DEFAULT_N: [usize; 6] = [16, 32, 64, 128, 256, 512];
pub const DEFAULT_D: [usize; 5] = [100, 200, 400, 800, 1600];

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: scenario `{scenario}`: {message}")]
    Invalid { line: usize, scenario: String, message: String },
    #[error("scenario `{scenario}` at n={n}, d={d}: {source}")]
    Point { scenario: String, n: usize, d: usize, source: ProtocolError },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub protocol: ProtocolKind,
    pub topology: TopologyKind,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    /// `None` means `10 * d`.
    pub lookups: Option<usize>,
    pub changes: usize,
    pub relocations: usize,
    pub placement: Placement,
    pub case: Case,
    pub params: ProtocolParams,
    pub address_width: u8,
    pub seed: Option<u64>,
    /// Line of the `[[scenario]]` header, 1-based.
    pub line: usize,
}

impl Scenario {
    pub fn new(name: impl Into<String>, protocol: ProtocolKind, topology: TopologyKind) -> Self {
        Scenario {
            name: name.into(),
            protocol,
            topology,
            n: DEFAULT_N.to_vec(),
            d: DEFAULT_D.to_vec(),
            lookups: None,
            changes: 8,
            relocations: 4,
            placement: Placement::Random,
            case: Case::Best,
            params: ProtocolParams::default(),
            address_width: DEFAULT_ADDRESS_WIDTH,
            seed: None,
            line: 0,
        }
    }

    /// Grid points in run order.
    pub fn points(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &d in &self.d {
                out.push((n, d));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Suite {
    pub seed: u64,
    pub scenarios: Vec<Scenario>,
}

impl Suite {
    pub fn default_suite() -> Self {
        DEFAULT_SUITE.parse().expect("default suite parses")
    }

    pub fn load(path: impl Into<PathBuf>) -> Result<Self, SuiteError> {
        let path = path.into();
        let text = std::fs::read_to_string(&path).map_err(|source| SuiteError::Io { path, source })?;
        text.parse()
    }

    /// Keeps the scenarios of one protocol.
    pub fn filter(mut self, protocol: ProtocolKind) -> Self {
        self.scenarios.retain(|s| s.protocol == protocol);
        self
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(usize),
    Many(Vec<usize>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<usize> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Arity {
    Fanout(usize),
    Named(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    scenario: Vec<toml::Spanned<RawScenario>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    protocol: String,
    topology: String,
    n: Option<OneOrMany>,
    d: Option<OneOrMany>,
    lookups: Option<usize>,
    changes: Option<usize>,
    relocations: Option<usize>,
    placement: Option<Placement>,
    case: Option<String>,
    key_bits: Option<u8>,
    ttl: Option<u32>,
    walkers: Option<u32>,
    dns_arity: Option<Arity>,
    aggregate: Option<bool>,
    address_width: Option<u8>,
    seed: Option<u64>,
}

fn line_of(text: &str, span: Option<Range<usize>>) -> usize {
    let at = span.map_or(0, |s| s.start.min(text.len()));
    text[..at].matches('\n').count() + 1
}

fn check_sweep(v: &[usize], what: &str) -> Result<(), String> {
    if v.is_empty() {
        return Err(format!("`{what}` is empty"));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(format!("`{what}` must be strictly increasing"));
    }
    Ok(())
}

impl RawScenario {
    fn resolve(self, index: usize, line: usize) -> Result<Scenario, SuiteError> {
        let name = self.name.clone().unwrap_or_else(|| format!("{}-{index}", self.protocol));
        let invalid = |message: String| SuiteError::Invalid { line, scenario: name.clone(), message };
        let protocol = ProtocolKind::from_str(&self.protocol).map_err(invalid)?;
        let topology = TopologyKind::from_str(&self.topology).map_err(|e| invalid(e.to_string()))?;
        let mut s = Scenario::new(name.clone(), protocol, topology);
        s.line = line;
        if let Some(n) = self.n {
            s.n = n.into_vec();
        }
        if let Some(d) = self.d {
            s.d = d.into_vec();
        }
        check_sweep(&s.n, "n").map_err(invalid)?;
        check_sweep(&s.d, "d").map_err(invalid)?;
        if s.n[0] == 0 {
            return Err(invalid("`n` must be positive".into()));
        }
        s.lookups = self.lookups;
        s.changes = self.changes.unwrap_or(s.changes);
        s.relocations = self.relocations.unwrap_or(s.relocations);
        s.placement = self.placement.unwrap_or_default();
        s.case = match self.case.as_deref() {
            None | Some("best") => Case::Best,
            Some("worst") => Case::Worst,
            Some(other) => return Err(invalid(format!("unknown case `{other}` (best or worst)"))),
        };
        if let Some(bits) = self.key_bits {
            if !(1..=32).contains(&bits) {
                return Err(invalid("`key_bits` must be in 1..=32".into()));
            }
            s.params.key_bits = bits;
        }
        s.params.ttl = self.ttl;
        s.params.walkers = self.walkers.unwrap_or(1);
        s.params.dns_arity = match self.dns_arity {
            None => Some(2),
            Some(Arity::Fanout(0)) => return Err(invalid("`dns_arity` must be positive".into())),
            Some(Arity::Fanout(a)) => Some(a),
            Some(Arity::Named(f)) if f == "flat" => None,
            Some(Arity::Named(f)) => return Err(invalid(format!("`dns_arity` is a fan-out or \"flat\", got `{f}`"))),
        };
        s.params.aggregate = self.aggregate.unwrap_or(false);
        s.address_width = self.address_width.unwrap_or(DEFAULT_ADDRESS_WIDTH);
        s.seed = self.seed;
        Ok(s)
    }
}

impl FromStr for Suite {
    type Err = SuiteError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let raw: RawSuite = toml::from_str(text)
            .map_err(|e| SuiteError::Parse { line: line_of(text, e.span()), message: e.message().trim().to_string() })?;
        let mut scenarios = Vec::with_capacity(raw.scenario.len());
        for (i, spanned) in raw.scenario.into_iter().enumerate() {
            let line = line_of(text, Some(spanned.span()));
            let s = spanned.into_inner().resolve(i, line)?;
            if scenarios.iter().any(|o: &Scenario| o.name == s.name) {
                return Err(SuiteError::Invalid { line, scenario: s.name, message: "duplicate scenario name".into() });
            }
            scenarios.push(s);
        }
        Ok(Suite { seed: raw.seed, scenarios })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lists_and_scalars() {
        let s: Suite = "seed = 3\n[[scenario]]\nprotocol = \"dht\"\ntopology = \"chain\"\nn = [16, 32]\nd = 100\n"
            .parse()
            .unwrap();
        assert_eq!(s.seed, 3);
        assert_eq!(s.scenarios[0].points(), vec![(16, 100), (32, 100)]);
        assert_eq!(s.scenarios[0].line, 2);
    }

    #[test]
    fn errors_carry_lines() {
        let err = "seed = 1\n\n[[scenario]]\nprotocol = \"nope\"\ntopology = \"chain\"\n".parse::<Suite>().unwrap_err();
        assert!(matches!(err, SuiteError::Invalid { line: 3, .. }), "{err}");
        let err = "seed = 1\nbogus = = 2\n".parse::<Suite>().unwrap_err();
        assert!(matches!(err, SuiteError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn default_suite_covers_all_protocols() {
        let s = Suite::default_suite();
        for k in ProtocolKind::ALL {
            assert!(s.scenarios.iter().any(|sc| sc.protocol == k), "{k:?}");
        }
    }
}
