//! Game instances: the directed network, its priced edges and the players'
//! commodities, plus scenario-file parsing, validation and path enumeration.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pricing::PriceSpec;

/// Largest allowed deviation of `c1 + c2` from one.
pub const MIXING_TOLERANCE: f64 = 1e-9;

/// Default bound on simple paths per commodity.
pub const DEFAULT_PATH_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("scenario is not valid JSON for the schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
    #[error("commodity `{commodity}` has more than {cap} simple paths")]
    TooManyPaths { commodity: String, cap: usize },
    #[error("commodity `{0}` has no source-sink path")]
    NoPath(String),
    #[error("no commodity at index {0}")]
    NoSuchCommodity(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A directed edge. A player `i` pays, per unit of flow,
/// `c1 * (a * load + b) + c2 * u(r_i)` to cross it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub from: NodeId,
    pub to: NodeId,
    /// Congestion slope.
    pub a: f64,
    /// Congestion intercept.
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    pub price: PriceSpec,
}

impl EdgeSpec {
    /// Affine congestion `a * load + b`, before mixing.
    pub fn congestion(&self, load: f64) -> f64 {
        self.a * load + self.b
    }
}

/// One player's routing demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Commodity {
    pub id: String,
    pub source: NodeId,
    pub sink: NodeId,
    pub demand: f64,
}

/// The on-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeSpec>,
    pub commodities: Vec<Commodity>,
}

/// Marks instances produced by the network builders, so experiments can
/// attach the closed-form prediction. Never read from scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Construction {
    Classic {
        players: usize,
        shortcut: bool,
    },
    Priced {
        players: usize,
        shortcut: bool,
        price: PriceSpec,
        c1: f64,
        c2: f64,
    },
}

/// A simple path, as indices into [`GameInstance::edges`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path(pub Vec<usize>);

impl Path {
    pub fn edges(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.0.contains(&edge)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameInstance {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeSpec>,
    pub commodities: Vec<Commodity>,
    /// Per-commodity strategy sets; empty until [`GameInstance::with_paths`].
    pub paths: Vec<Vec<Path>>,
    pub construction: Option<Construction>,
}

impl GameInstance {
    pub fn from_scenario(scenario: Scenario) -> Self {
        GameInstance {
            nodes: scenario.nodes,
            edges: scenario.edges,
            commodities: scenario.commodities,
            paths: Vec::new(),
            construction: None,
        }
    }

    pub fn to_scenario(&self) -> Scenario {
        Scenario {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            commodities: self.commodities.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(&self.to_scenario()).expect("scenario serialization is infallible");
        text.push('\n');
        text
    }

    /// Fills in every commodity's strategy set.
    pub fn with_paths(mut self, cap: usize) -> Result<Self, ModelError> {
        let paths = (0..self.commodities.len())
            .map(|i| enumerate_paths(&self, i, cap))
            .collect::<Result<Vec<_>, _>>()?;
        self.paths = paths;
        Ok(self)
    }

    pub fn has_paths(&self) -> bool {
        self.paths.len() == self.commodities.len()
    }

    pub fn edge_index(&self, id: &str) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn path_edge_ids(&self, path: &Path) -> Vec<&str> {
        path.edges().iter().map(|&e| self.edges[e].id.as_str()).collect()
    }

    pub fn path_label(&self, path: &Path) -> String {
        self.path_edge_ids(path).join(">")
    }
}

/// Parses and validates a scenario document. Paths are not enumerated.
pub fn parse_scenario(text: &str) -> Result<GameInstance, ModelError> {
    let instance = parse_scenario_unchecked(text)?;
    let report = validate_instance(&instance);
    if report.is_valid() {
        Ok(instance)
    } else {
        Err(ModelError::Invalid(report))
    }
}

/// Schema-level parse only; semantic problems are left for
/// [`validate_instance`] to report.
pub fn parse_scenario_unchecked(text: &str) -> Result<GameInstance, ModelError> {
    let scenario: Scenario = serde_json::from_str(text)?;
    Ok(GameInstance::from_scenario(scenario))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyId,
    DuplicateId,
    UnknownNode,
    SelfLoop,
    NegativeSlope,
    NegativeIntercept,
    NonFinite,
    MixingOutOfRange,
    MixingNotNormalized,
    BadPriceParams,
    NonPositiveDemand,
    SourceIsSink,
    DemandOutsidePriceDomain,
    NoPath,
}

impl ViolationKind {
    pub fn describe(self) -> &'static str {
        match self {
            ViolationKind::EmptyId => "empty id",
            ViolationKind::DuplicateId => "duplicate id",
            ViolationKind::UnknownNode => "unknown node reference",
            ViolationKind::SelfLoop => "self-loop",
            ViolationKind::NegativeSlope => "negative congestion slope",
            ViolationKind::NegativeIntercept => "negative congestion intercept",
            ViolationKind::NonFinite => "non-finite number",
            ViolationKind::MixingOutOfRange => "mixing coefficient outside [0, 1]",
            ViolationKind::MixingNotNormalized => "mixing coefficients not normalized",
            ViolationKind::BadPriceParams => "invalid price parameters",
            ViolationKind::NonPositiveDemand => "non-positive demand",
            ViolationKind::SourceIsSink => "source equals sink",
            ViolationKind::DemandOutsidePriceDomain => "demand outside price domain",
            ViolationKind::NoPath => "no s-t path",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// `node:<id>`, `edge:<id>` or `commodity:<id>`.
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): {}", self.kind.describe(), self.subject, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, subject: String, detail: impl Into<String>) {
        self.violations.push(Violation {
            kind,
            subject,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Lists every violated instance invariant. An empty report means valid.
pub fn validate_instance(instance: &GameInstance) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen = HashSet::new();
    for node in &instance.nodes {
        let subject = format!("node:{node}");
        if node.0.is_empty() {
            report.push(ViolationKind::EmptyId, subject, "node labels must be nonempty");
        } else if !seen.insert(node.as_str()) {
            report.push(ViolationKind::DuplicateId, subject, "node listed twice");
        }
    }
    let known = |n: &NodeId| seen.contains(n.as_str());

    let mut edge_ids = HashSet::new();
    for edge in &instance.edges {
        let subject = format!("edge:{}", edge.id);
        if edge.id.is_empty() {
            report.push(
                ViolationKind::EmptyId,
                subject.clone(),
                "edge ids must be nonempty",
            );
        } else if !edge_ids.insert(edge.id.as_str()) {
            report.push(ViolationKind::DuplicateId, subject.clone(), "edge id used twice");
        }
        for end in [&edge.from, &edge.to] {
            if !known(end) {
                report.push(
                    ViolationKind::UnknownNode,
                    subject.clone(),
                    format!("`{end}` is not a node"),
                );
            }
        }
        if edge.from == edge.to {
            report.push(
                ViolationKind::SelfLoop,
                subject.clone(),
                format!("{} -> {}", edge.from, edge.to),
            );
        }
        let numbers = [edge.a, edge.b, edge.c1, edge.c2];
        if numbers.iter().any(|x| !x.is_finite()) {
            report.push(
                ViolationKind::NonFinite,
                subject.clone(),
                "a, b, c1 and c2 must be finite",
            );
            continue;
        }
        if edge.a < 0.0 {
            report.push(
                ViolationKind::NegativeSlope,
                subject.clone(),
                format!("a = {}", edge.a),
            );
        }
        if edge.b < 0.0 {
            report.push(
                ViolationKind::NegativeIntercept,
                subject.clone(),
                format!("b = {}", edge.b),
            );
        }
        if !(0.0..=1.0).contains(&edge.c1) || !(0.0..=1.0).contains(&edge.c2) {
            report.push(
                ViolationKind::MixingOutOfRange,
                subject.clone(),
                format!("c1 = {}, c2 = {}", edge.c1, edge.c2),
            );
        }
        if (edge.c1 + edge.c2 - 1.0).abs() > MIXING_TOLERANCE {
            report.push(
                ViolationKind::MixingNotNormalized,
                subject.clone(),
                format!("c1 + c2 = {}", edge.c1 + edge.c2),
            );
        }
        if let Err(err) = edge.price.check_params() {
            report.push(ViolationKind::BadPriceParams, subject, err.to_string());
        }
    }

    let mut commodity_ids = HashSet::new();
    for (index, commodity) in instance.commodities.iter().enumerate() {
        let subject = format!("commodity:{}", commodity.id);
        if commodity.id.is_empty() {
            report.push(
                ViolationKind::EmptyId,
                subject.clone(),
                "commodity ids must be nonempty",
            );
        } else if !commodity_ids.insert(commodity.id.as_str()) {
            report.push(
                ViolationKind::DuplicateId,
                subject.clone(),
                "commodity id used twice",
            );
        }
        let mut endpoints_known = true;
        for end in [&commodity.source, &commodity.sink] {
            if !known(end) {
                endpoints_known = false;
                report.push(
                    ViolationKind::UnknownNode,
                    subject.clone(),
                    format!("`{end}` is not a node"),
                );
            }
        }
        if !commodity.demand.is_finite() {
            report.push(ViolationKind::NonFinite, subject.clone(), "demand must be finite");
        } else if commodity.demand <= 0.0 {
            report.push(
                ViolationKind::NonPositiveDemand,
                subject.clone(),
                format!("demand = {}", commodity.demand),
            );
        } else if let Some(edge) = instance
            .edges
            .iter()
            .find(|e| !e.price.in_domain(commodity.demand))
        {
            report.push(
                ViolationKind::DemandOutsidePriceDomain,
                subject.clone(),
                format!(
                    "demand {} exceeds the {} domain of edge `{}`",
                    commodity.demand, edge.price, edge.id
                ),
            );
        }
        if commodity.source == commodity.sink {
            report.push(
                ViolationKind::SourceIsSink,
                subject,
                format!("both are `{}`", commodity.source),
            );
        } else if endpoints_known && !reachable(instance, index) {
            report.push(
                ViolationKind::NoPath,
                subject,
                format!("`{}` cannot reach `{}`", commodity.source, commodity.sink),
            );
        }
    }

    report
}

fn adjacency(instance: &GameInstance) -> HashMap<&str, Vec<usize>> {
    let mut out: HashMap<&str, Vec<usize>> = HashMap::new();
    for (index, edge) in instance.edges.iter().enumerate() {
        if edge.from != edge.to {
            out.entry(edge.from.as_str()).or_default().push(index);
        }
    }
    out
}

fn reachable(instance: &GameInstance, commodity: usize) -> bool {
    let commodity = &instance.commodities[commodity];
    let adjacency = adjacency(instance);
    let mut visited = BTreeSet::from([commodity.source.as_str()]);
    let mut stack = vec![commodity.source.as_str()];
    while let Some(node) = stack.pop() {
        if node == commodity.sink.as_str() {
            return true;
        }
        for &e in adjacency.get(node).into_iter().flatten() {
            let next = instance.edges[e].to.as_str();
            if visited.insert(next) {
                stack.push(next);
            }
        }
    }
    false
}

/// All simple source-to-sink paths of one commodity, sorted by edge-id sequence.
///
/// Fails instead of truncating when there are more than `cap` paths.
pub fn enumerate_paths(
    instance: &GameInstance,
    commodity: usize,
    cap: usize,
) -> Result<Vec<Path>, ModelError> {
    let target = instance
        .commodities
        .get(commodity)
        .ok_or(ModelError::NoSuchCommodity(commodity))?;
    let adjacency = adjacency(instance);

    struct Search<'a> {
        instance: &'a GameInstance,
        adjacency: &'a HashMap<&'a str, Vec<usize>>,
        sink: &'a str,
        on_path: HashSet<&'a str>,
        edges: Vec<usize>,
        found: Vec<Path>,
        cap: usize,
    }

    impl<'a> Search<'a> {
        // Returns false once the cap is exceeded.
        fn visit(&mut self, node: &'a str) -> bool {
            if node == self.sink {
                self.found.push(Path(self.edges.clone()));
                return self.found.len() <= self.cap;
            }
            let Some(out) = self.adjacency.get(node) else {
                return true;
            };
            for &e in out {
                let next = self.instance.edges[e].to.as_str();
                if self.on_path.contains(next) {
                    continue;
                }
                self.on_path.insert(next);
                self.edges.push(e);
                let keep_going = self.visit(next);
                self.edges.pop();
                self.on_path.remove(next);
                if !keep_going {
                    return false;
                }
            }
            true
        }
    }

    let mut search = Search {
        instance,
        adjacency: &adjacency,
        sink: target.sink.as_str(),
        on_path: HashSet::from([target.source.as_str()]),
        edges: Vec::new(),
        found: Vec::new(),
        cap,
    };
    if target.source != target.sink && !search.visit(target.source.as_str()) {
        return Err(ModelError::TooManyPaths {
            commodity: target.id.clone(),
            cap,
        });
    }
    let mut paths = search.found;
    if paths.is_empty() {
        return Err(ModelError::NoPath(target.id.clone()));
    }
    paths.sort_by(|p, q| instance.path_edge_ids(p).cmp(&instance.path_edge_ids(q)));
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(id: &str, from: &str, to: &str) -> EdgeSpec {
        EdgeSpec {
            id: id.into(),
            from: NodeId::new(from),
            to: NodeId::new(to),
            a: 1.0,
            b: 0.0,
            c1: 1.0,
            c2: 0.0,
            price: PriceSpec::Zero,
        }
    }

    fn commodity(id: &str, source: &str, sink: &str) -> Commodity {
        Commodity {
            id: id.into(),
            source: NodeId::new(source),
            sink: NodeId::new(sink),
            demand: 1.0,
        }
    }

    fn braess(with_shortcut: bool) -> GameInstance {
        let mut edges = vec![
            edge("sv", "s", "v"),
            edge("vt", "v", "t"),
            edge("sw", "s", "w"),
            edge("wt", "w", "t"),
        ];
        if with_shortcut {
            edges.push(edge("vw", "v", "w"));
        }
        GameInstance::from_scenario(Scenario {
            nodes: ["s", "v", "w", "t"].map(NodeId::new).to_vec(),
            edges,
            commodities: vec![commodity("p1", "s", "t")],
        })
    }

    const MINIMAL: &str = r#"{
        "nodes": ["s", "t"],
        "edges": [{"id": "e", "from": "s", "to": "t", "a": 1, "b": 0, "c1": 1, "c2": 0,
                   "price": {"fn": "zero", "params": {}}}],
        "commodities": [{"id": "p", "source": "s", "sink": "t", "demand": 1}]
    }"#;

    #[test]
    fn minimal_document_parses() {
        let instance = parse_scenario(MINIMAL).unwrap();
        assert_eq!(instance.nodes.len(), 2);
        assert_eq!(instance.edges.len(), 1);
        assert_eq!(instance.commodities.len(), 1);
        assert!(instance.paths.is_empty());
        let instance = instance.with_paths(DEFAULT_PATH_CAP).unwrap();
        assert_eq!(instance.paths, vec![vec![Path(vec![0])]]);
    }

    #[test]
    fn unnormalized_mixing_is_an_error() {
        let text = MINIMAL.replace(r#""c1": 1, "c2": 0"#, r#""c1": 0.6, "c2": 0.5"#);
        let err = parse_scenario(&text).unwrap_err();
        assert!(
            err.to_string().contains("mixing coefficients not normalized"),
            "{err}"
        );
    }

    #[test]
    fn schema_errors() {
        let unknown_field = MINIMAL.replace(r#""demand": 1"#, r#""demand": 1, "weight": 2"#);
        assert!(matches!(
            parse_scenario(&unknown_field),
            Err(ModelError::Schema(_))
        ));
        let missing = MINIMAL.replace(r#""a": 1, "#, "");
        assert!(matches!(parse_scenario(&missing), Err(ModelError::Schema(_))));
        let wrong_type = MINIMAL.replace(r#""a": 1"#, r#""a": "one""#);
        assert!(matches!(parse_scenario(&wrong_type), Err(ModelError::Schema(_))));
    }

    #[test]
    fn reference_and_demand_errors() {
        let unknown = MINIMAL.replace(r#""sink": "t""#, r#""sink": "x""#);
        let Err(ModelError::Invalid(report)) = parse_scenario(&unknown) else {
            panic!()
        };
        assert!(report.has(ViolationKind::UnknownNode));

        let zero = MINIMAL.replace(r#""demand": 1"#, r#""demand": 0"#);
        let Err(ModelError::Invalid(report)) = parse_scenario(&zero) else {
            panic!()
        };
        assert!(report.has(ViolationKind::NonPositiveDemand));

        let dup = MINIMAL.replace(r#""nodes": ["s", "t"]"#, r#""nodes": ["s", "t", "s"]"#);
        let Err(ModelError::Invalid(report)) = parse_scenario(&dup) else {
            panic!()
        };
        assert!(report.has(ViolationKind::DuplicateId));
    }

    #[test]
    fn braess_paths() {
        let without = braess(false);
        let paths = enumerate_paths(&without, 0, 10).unwrap();
        let labels: Vec<_> = paths.iter().map(|p| without.path_label(p)).collect();
        assert_eq!(labels, ["sv>vt", "sw>wt"]);

        let with = braess(true);
        let paths = enumerate_paths(&with, 0, 10).unwrap();
        let labels: Vec<_> = paths.iter().map(|p| with.path_label(p)).collect();
        assert_eq!(labels, ["sv>vt", "sv>vw>wt", "sw>wt"]);
    }

    #[test]
    fn path_cap_errors_instead_of_truncating() {
        let with = braess(true);
        assert!(matches!(
            enumerate_paths(&with, 0, 2),
            Err(ModelError::TooManyPaths { cap: 2, .. })
        ));
        assert_eq!(enumerate_paths(&with, 0, 3).unwrap().len(), 3);
    }

    #[test]
    fn parallel_edges_are_distinct_strategies() {
        let mut instance = parse_scenario(MINIMAL).unwrap();
        let mut twin = instance.edges[0].clone();
        twin.id = "d".into();
        instance.edges.push(twin);
        let paths = enumerate_paths(&instance, 0, 10).unwrap();
        assert_eq!(paths, vec![Path(vec![1]), Path(vec![0])]);
    }

    #[test]
    fn validation_reports_violations() {
        assert!(validate_instance(&braess(true)).is_valid());

        let mut negative = braess(true);
        negative.edges[0].a = -1.0;
        let report = validate_instance(&negative);
        assert!(report.has(ViolationKind::NegativeSlope));
        assert!(report.to_string().contains("negative congestion slope"));

        let mut cut = braess(false);
        cut.edges.retain(|e| e.to.as_str() != "t");
        let before = cut.clone();
        let report = validate_instance(&cut);
        assert!(report.has(ViolationKind::NoPath));
        assert!(report.to_string().contains("no s-t path"));
        assert_eq!(cut, before);
        assert!(matches!(enumerate_paths(&cut, 0, 10), Err(ModelError::NoPath(_))));

        let mut looped = braess(false);
        looped.edges.push(edge("ss", "s", "s"));
        assert!(validate_instance(&looped).has(ViolationKind::SelfLoop));

        let mut sin_heavy = braess(false);
        sin_heavy.edges[0].price = PriceSpec::Sin;
        sin_heavy.commodities[0].demand = 2.0;
        assert!(validate_instance(&sin_heavy).has(ViolationKind::DemandOutsidePriceDomain));
    }
}
