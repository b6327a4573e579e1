//! The typed evidence/mechanism/governance/indicator graph.
//!
//! Nodes are Foundations, Requirements, Risks, Harms, Controls, and Metrics;
//! edges are constrained by type: `supports`/`constrains` run Foundation to
//! Requirement, `mitigates` Control to Risk, `measures` Metric to Control,
//! and `leads_to` Risk to Harm. A built-in skeleton ships the three
//! foundations, the ten requirements, and their seven support edges.
//!
//! Risk nodes associate with a requirement through shared unit provenance:
//! a risk extracted from a unit tagged `R3-...` belongs to R3's
//! neighborhood for coverage purposes.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Cursor;

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, BytesText, Event};
use quick_xml::{Reader, Writer};
use serde::{Deserialize, Serialize};

use crate::requirement::RequirementId;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("node {0:?} already exists")]
    DuplicateNode(String),
    #[error("edge endpoint {0:?} does not exist")]
    MissingEndpoint(String),
    #[error("edge type {edge_type} requires {expected_source} -> {expected_target}, got {got_source} -> {got_target}")]
    TypeViolation {
        edge_type: EdgeType,
        expected_source: NodeType,
        expected_target: NodeType,
        got_source: NodeType,
        got_target: NodeType,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("graphml error: {0}")]
    GraphMl(String),
    #[error("unknown {kind}: {value:?}")]
    UnknownName { kind: &'static str, value: String },
}

/// Node categories of the governance graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    Foundation,
    Requirement,
    Risk,
    Harm,
    Control,
    Metric,
}

impl NodeType {
    pub const ALL: [NodeType; 6] = [
        NodeType::Foundation,
        NodeType::Requirement,
        NodeType::Risk,
        NodeType::Harm,
        NodeType::Control,
        NodeType::Metric,
    ];
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            NodeType::Foundation => "Foundation",
            NodeType::Requirement => "Requirement",
            NodeType::Risk => "Risk",
            NodeType::Harm => "Harm",
            NodeType::Control => "Control",
            NodeType::Metric => "Metric",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for NodeType {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeType::ALL
            .into_iter()
            .find(|t| t.to_string() == s)
            .ok_or_else(|| GraphError::UnknownName {
                kind: "node type",
                value: s.to_string(),
            })
    }
}

/// Typed relations between nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeType {
    Supports,
    Constrains,
    Mitigates,
    Measures,
    LeadsTo,
}

impl EdgeType {
    pub const ALL: [EdgeType; 5] = [
        EdgeType::Supports,
        EdgeType::Constrains,
        EdgeType::Mitigates,
        EdgeType::Measures,
        EdgeType::LeadsTo,
    ];
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EdgeType::Supports => "supports",
            EdgeType::Constrains => "constrains",
            EdgeType::Mitigates => "mitigates",
            EdgeType::Measures => "measures",
            EdgeType::LeadsTo => "leads_to",
        };
        f.write_str(name)
    }
}

/// Required `(source, target)` node types for each edge type. The table is
/// total: every combination is decidably valid or invalid.
pub fn edge_constraint(edge_type: EdgeType) -> (NodeType, NodeType) {
    match edge_type {
        EdgeType::Supports | EdgeType::Constrains => (NodeType::Foundation, NodeType::Requirement),
        EdgeType::Mitigates => (NodeType::Control, NodeType::Risk),
        EdgeType::Measures => (NodeType::Metric, NodeType::Control),
        EdgeType::LeadsTo => (NodeType::Risk, NodeType::Harm),
    }
}

/// One node with its evidence anchors (unit ids).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub node_type: NodeType,
    pub label: String,
    #[serde(default)]
    pub anchors: Vec<String>,
}

/// One typed edge with its mapping-rule text and unit provenance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: String,
    pub edge_type: EdgeType,
    pub target: String,
    /// Mapping-rule / evidence text; exported as the `evidence_anchor`
    /// column of the edges CSV.
    #[serde(default)]
    pub mapping_rule: String,
    #[serde(default)]
    pub unit_id: Option<String>,
}

/// Outcome of [`GapGraph::add_edge`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddEdgeOutcome {
    Added,
    /// The `(source, type, target)` triple already exists; the add was an
    /// idempotent no-op.
    Duplicate,
}

/// A structural problem found by [`GapGraph::validate`]. Violations are
/// data, not failures: imported graphs may carry them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    TypeViolation {
        source: String,
        edge_type: EdgeType,
        target: String,
        got_source: NodeType,
        got_target: NodeType,
    },
    DanglingEndpoint {
        edge_index: usize,
        endpoint: String,
    },
    DuplicateEdge {
        source: String,
        edge_type: EdgeType,
        target: String,
    },
    DuplicateNodeId {
        id: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TypeViolation {
                source,
                edge_type,
                target,
                got_source,
                got_target,
            } => {
                let (want_src, want_dst) = edge_constraint(*edge_type);
                write!(
                    f,
                    "edge {source} -{edge_type}-> {target}: requires {want_src} -> {want_dst}, got {got_source} -> {got_target}"
                )
            }
            Violation::DanglingEndpoint {
                edge_index,
                endpoint,
            } => write!(f, "edge #{edge_index}: endpoint {endpoint:?} does not exist"),
            Violation::DuplicateEdge {
                source,
                edge_type,
                target,
            } => write!(f, "duplicate edge {source} -{edge_type}-> {target}"),
            Violation::DuplicateNodeId { id } => write!(f, "duplicate node id {id:?}"),
        }
    }
}

/// Per-requirement structural coverage flags: the graph signatures of the
/// mechanism, governance, and indicator gap dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RequirementCoverage {
    pub requirement_node: String,
    pub requirement_id: Option<RequirementId>,
    /// A Foundation supports or constrains the requirement.
    pub has_supporting_foundation: bool,
    /// An associated Risk leads to some Harm.
    pub has_risk_harm_chain: bool,
    /// A Control mitigates an associated Risk.
    pub has_mitigating_control: bool,
    /// A Metric measures such a Control.
    pub has_measured_control: bool,
}

/// The typed governance graph.
#[derive(Debug, Clone, Default)]
pub struct GapGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    index: HashMap<String, usize>,
}

impl PartialEq for GapGraph {
    /// Equality on node and edge multisets, ignoring insertion order.
    fn eq(&self, other: &Self) -> bool {
        let sorted = |g: &GapGraph| {
            let mut nodes = g.nodes.clone();
            nodes.sort();
            let mut edges = g.edges.clone();
            edges.sort();
            (nodes, edges)
        };
        sorted(self) == sorted(other)
    }
}

impl GapGraph {
    pub fn new() -> Self {
        GapGraph::default()
    }

    /// Builds a graph from raw parts without validation; use
    /// [`GapGraph::validate`] to enumerate any violations afterwards.
    pub fn from_parts(nodes: Vec<GraphNode>, edges: Vec<GraphEdge>) -> Self {
        let mut index = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            index.entry(node.id.clone()).or_insert(i);
        }
        GapGraph {
            nodes,
            edges,
            index,
        }
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.index.get(id).map(|i| &self.nodes[*i])
    }

    pub fn add_node(&mut self, node: GraphNode) -> Result<(), GraphError> {
        if self.index.contains_key(&node.id) {
            return Err(GraphError::DuplicateNode(node.id));
        }
        self.index.insert(node.id.clone(), self.nodes.len());
        self.nodes.push(node);
        Ok(())
    }

    /// Adds an edge iff both endpoints exist and the type constraint holds.
    /// An existing `(source, type, target)` triple is an idempotent no-op.
    pub fn add_edge(
        &mut self,
        source: &str,
        edge_type: EdgeType,
        target: &str,
        mapping_rule: &str,
        unit_id: Option<&str>,
    ) -> Result<AddEdgeOutcome, GraphError> {
        let src = self
            .node(source)
            .ok_or_else(|| GraphError::MissingEndpoint(source.to_string()))?;
        let dst = self
            .node(target)
            .ok_or_else(|| GraphError::MissingEndpoint(target.to_string()))?;
        let (want_src, want_dst) = edge_constraint(edge_type);
        if src.node_type != want_src || dst.node_type != want_dst {
            return Err(GraphError::TypeViolation {
                edge_type,
                expected_source: want_src,
                expected_target: want_dst,
                got_source: src.node_type,
                got_target: dst.node_type,
            });
        }
        if self
            .edges
            .iter()
            .any(|e| e.source == source && e.edge_type == edge_type && e.target == target)
        {
            return Ok(AddEdgeOutcome::Duplicate);
        }
        self.edges.push(GraphEdge {
            source: source.to_string(),
            edge_type,
            target: target.to_string(),
            mapping_rule: mapping_rule.to_string(),
            unit_id: unit_id.map(str::to_string),
        });
        Ok(AddEdgeOutcome::Added)
    }

    /// Enumerates every type violation, dangling endpoint, duplicate edge,
    /// and duplicate node id.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();

        let mut seen_nodes = BTreeSet::new();
        for node in &self.nodes {
            if !seen_nodes.insert(node.id.as_str()) {
                violations.push(Violation::DuplicateNodeId {
                    id: node.id.clone(),
                });
            }
        }

        let mut seen_edges = BTreeSet::new();
        for (i, edge) in self.edges.iter().enumerate() {
            let src = self.node(&edge.source);
            let dst = self.node(&edge.target);
            if src.is_none() {
                violations.push(Violation::DanglingEndpoint {
                    edge_index: i,
                    endpoint: edge.source.clone(),
                });
            }
            if dst.is_none() {
                violations.push(Violation::DanglingEndpoint {
                    edge_index: i,
                    endpoint: edge.target.clone(),
                });
            }
            if let (Some(src), Some(dst)) = (src, dst) {
                let (want_src, want_dst) = edge_constraint(edge.edge_type);
                if src.node_type != want_src || dst.node_type != want_dst {
                    violations.push(Violation::TypeViolation {
                        source: edge.source.clone(),
                        edge_type: edge.edge_type,
                        target: edge.target.clone(),
                        got_source: src.node_type,
                        got_target: dst.node_type,
                    });
                }
            }
            if !seen_edges.insert((edge.source.as_str(), edge.edge_type, edge.target.as_str())) {
                violations.push(Violation::DuplicateEdge {
                    source: edge.source.clone(),
                    edge_type: edge.edge_type,
                    target: edge.target.clone(),
                });
            }
        }
        violations
    }

    /// Requirements a node is associated with through unit provenance: any
    /// anchor or incident-edge unit id whose requirement prefix parses.
    fn associated_requirements(&self, node_id: &str) -> BTreeSet<RequirementId> {
        let mut result = BTreeSet::new();
        if let Some(node) = self.node(node_id) {
            for anchor in &node.anchors {
                if let Some(r) = requirement_of_unit(anchor) {
                    result.insert(r);
                }
            }
        }
        for edge in &self.edges {
            if edge.source == node_id || edge.target == node_id {
                if let Some(unit) = &edge.unit_id {
                    if let Some(r) = requirement_of_unit(unit) {
                        result.insert(r);
                    }
                }
            }
        }
        result
    }

    /// Structural coverage flags per Requirement node.
    pub fn coverage_report(&self) -> Vec<RequirementCoverage> {
        self.nodes
            .iter()
            .filter(|n| n.node_type == NodeType::Requirement)
            .map(|req_node| {
                let requirement_id = requirement_of_node(req_node);

                let has_supporting_foundation = self.edges.iter().any(|e| {
                    matches!(e.edge_type, EdgeType::Supports | EdgeType::Constrains)
                        && e.target == req_node.id
                        && self
                            .node(&e.source)
                            .is_some_and(|n| n.node_type == NodeType::Foundation)
                });

                // Risks in this requirement's neighborhood via provenance.
                let risks: Vec<&GraphNode> = self
                    .nodes
                    .iter()
                    .filter(|n| n.node_type == NodeType::Risk)
                    .filter(|n| {
                        requirement_id
                            .is_some_and(|r| self.associated_requirements(&n.id).contains(&r))
                    })
                    .collect();

                let has_risk_harm_chain = risks.iter().any(|risk| {
                    self.edges.iter().any(|e| {
                        e.edge_type == EdgeType::LeadsTo
                            && e.source == risk.id
                            && self
                                .node(&e.target)
                                .is_some_and(|n| n.node_type == NodeType::Harm)
                    })
                });

                let mitigating_controls: Vec<&str> = self
                    .edges
                    .iter()
                    .filter(|e| {
                        e.edge_type == EdgeType::Mitigates
                            && risks.iter().any(|risk| risk.id == e.target)
                            && self
                                .node(&e.source)
                                .is_some_and(|n| n.node_type == NodeType::Control)
                    })
                    .map(|e| e.source.as_str())
                    .collect();

                let has_measured_control = self.edges.iter().any(|e| {
                    e.edge_type == EdgeType::Measures
                        && mitigating_controls.contains(&e.target.as_str())
                        && self
                            .node(&e.source)
                            .is_some_and(|n| n.node_type == NodeType::Metric)
                });

                RequirementCoverage {
                    requirement_node: req_node.id.clone(),
                    requirement_id,
                    has_supporting_foundation,
                    has_risk_harm_chain,
                    has_mitigating_control: !mitigating_controls.is_empty(),
                    has_measured_control,
                }
            })
            .collect()
    }
}

/// Requirement prefix of a unit id like `R3-p27-u00117`.
fn requirement_of_unit(unit_id: &str) -> Option<RequirementId> {
    let prefix = unit_id.split('-').next()?;
    prefix
        .parse()
        .ok()
        .filter(|r| *r != RequirementId::Unmapped)
}

/// Requirement of a Requirement node, parsed from its id (`R:R2` or `R2`).
fn requirement_of_node(node: &GraphNode) -> Option<RequirementId> {
    let tail = node.id.rsplit(':').next()?;
    tail.parse().ok()
}

/// The built-in minimal skeleton: three foundations, ten requirements, and
/// seven support edges.
pub fn load_skeleton() -> GapGraph {
    const FOUNDATIONS: [(&str, &str); 3] = [
        ("F:Protection", "Protection={do no harm}"),
        ("F:Provision", "Provision={do good}"),
        ("F:Participation", "Participation={include all children}"),
    ];
    const REQUIREMENTS: [(&str, &str); 10] = [
        ("R:R1", "Regulation, Supervision and Compliance"),
        ("R:R2", "Child Safety"),
        ("R:R3", "Data and Privacy"),
        ("R:R4", "Non-discrimination and Fairness"),
        ("R:R5", "Transparency, accountability and explainability"),
        ("R:R6", "Responsible AI Practices and Respect for Rights"),
        ("R:R7", "Best interests, development and wellbeing"),
        ("R:R8", "Inclusiveness (of and for children)"),
        ("R:R9", "Empowerment and Skills Readiness"),
        ("R:R10", "Fostering a favourable ecological environment"),
    ];
    const SUPPORT_EDGES: [(&str, &str, &str); 7] = [
        (
            "F:Protection",
            "R:R2",
            "Safety directly corresponds to do no harm",
        ),
        ("F:Protection", "R:R3", "Privacy protection minimises harm"),
        (
            "F:Protection",
            "R:R4",
            "Prevent discrimination and avoid harm",
        ),
        (
            "F:Provision",
            "R:R7",
            "Welfare and Development Correspondence do good",
        ),
        (
            "F:Provision",
            "R:R9",
            "Empowerment and Skills Support Development",
        ),
        (
            "F:Participation",
            "R:R8",
            "Inclusion and participation mutually reinforce one another",
        ),
        (
            "F:Participation",
            "R:R9",
            "Empowering through education to enhance participation capacity",
        ),
    ];

    let mut graph = GapGraph::new();
    for (id, label) in FOUNDATIONS {
        graph
            .add_node(GraphNode {
                id: id.to_string(),
                node_type: NodeType::Foundation,
                label: label.to_string(),
                anchors: Vec::new(),
            })
            .expect("unique skeleton node");
    }
    for (id, label) in REQUIREMENTS {
        graph
            .add_node(GraphNode {
                id: id.to_string(),
                node_type: NodeType::Requirement,
                label: label.to_string(),
                anchors: Vec::new(),
            })
            .expect("unique skeleton node");
    }
    for (source, target, rule) in SUPPORT_EDGES {
        graph
            .add_edge(source, EdgeType::Supports, target, rule, None)
            .expect("valid skeleton edge");
    }
    graph
}

// ---------------------------------------------------------------------------
// Serialization

const ANCHOR_SEPARATOR: &str = ";";

/// Edges CSV with columns `src, rel, dst, unit_id, evidence_anchor`.
pub fn to_edges_csv(graph: &GapGraph) -> Result<String, GraphError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["src", "rel", "dst", "unit_id", "evidence_anchor"])?;
    for edge in graph.edges() {
        w.write_record([
            edge.source.as_str(),
            &edge.edge_type.to_string(),
            edge.target.as_str(),
            edge.unit_id.as_deref().unwrap_or(""),
            edge.mapping_rule.as_str(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("utf8"))
}

/// Nodes CSV with columns `node_id, node_type, label, anchors`.
pub fn to_nodes_csv(graph: &GapGraph) -> Result<String, GraphError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node_id", "node_type", "label", "anchors"])?;
    for node in graph.nodes() {
        w.write_record([
            node.id.as_str(),
            &node.node_type.to_string(),
            node.label.as_str(),
            &node.anchors.join(ANCHOR_SEPARATOR),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().expect("vec writer")).expect("utf8"))
}

pub fn from_csv(nodes_csv: &str, edges_csv: &str) -> Result<GapGraph, GraphError> {
    let mut nodes = Vec::new();
    let mut reader = csv::Reader::from_reader(nodes_csv.as_bytes());
    for record in reader.records() {
        let record = record?;
        nodes.push(GraphNode {
            id: record.get(0).unwrap_or_default().to_string(),
            node_type: record.get(1).unwrap_or_default().parse()?,
            label: record.get(2).unwrap_or_default().to_string(),
            anchors: match record.get(3).unwrap_or_default() {
                "" => Vec::new(),
                joined => joined.split(ANCHOR_SEPARATOR).map(str::to_string).collect(),
            },
        });
    }
    let mut edges = Vec::new();
    let mut reader = csv::Reader::from_reader(edges_csv.as_bytes());
    for record in reader.records() {
        let record = record?;
        let rel = record.get(1).unwrap_or_default();
        let edge_type = EdgeType::ALL
            .into_iter()
            .find(|t| t.to_string() == rel)
            .ok_or_else(|| GraphError::UnknownName {
                kind: "edge type",
                value: rel.to_string(),
            })?;
        let unit_id = match record.get(3).unwrap_or_default() {
            "" => None,
            id => Some(id.to_string()),
        };
        edges.push(GraphEdge {
            source: record.get(0).unwrap_or_default().to_string(),
            edge_type,
            target: record.get(2).unwrap_or_default().to_string(),
            mapping_rule: record.get(4).unwrap_or_default().to_string(),
            unit_id,
        });
    }
    Ok(GapGraph::from_parts(nodes, edges))
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    schema: serde_json::Value,
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
}

/// The graph schema as JSON: node types, edge types, and the constraint
/// table.
pub fn schema_json() -> serde_json::Value {
    serde_json::json!({
        "node_types": NodeType::ALL.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "edge_types": EdgeType::ALL.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
        "constraints": EdgeType::ALL.iter().map(|t| {
            let (src, dst) = edge_constraint(*t);
            serde_json::json!({
                "edge_type": t.to_string(),
                "source": src.to_string(),
                "target": dst.to_string(),
            })
        }).collect::<Vec<_>>(),
    })
}

pub fn to_json(graph: &GapGraph) -> Result<String, GraphError> {
    let doc = GraphJson {
        schema: schema_json(),
        nodes: graph.nodes().to_vec(),
        edges: graph.edges().to_vec(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn from_json(json: &str) -> Result<GapGraph, GraphError> {
    let doc: GraphJson = serde_json::from_str(json)?;
    Ok(GapGraph::from_parts(doc.nodes, doc.edges))
}

fn xml_io(e: std::io::Error) -> GraphError {
    GraphError::GraphMl(e.to_string())
}

fn write_data_element(
    writer: &mut Writer<Cursor<Vec<u8>>>,
    key: &str,
    value: &str,
) -> Result<(), GraphError> {
    let mut data = BytesStart::new("data");
    data.push_attribute(("key", key));
    writer.write_event(Event::Start(data)).map_err(xml_io)?;
    writer
        .write_event(Event::Text(BytesText::new(value)))
        .map_err(xml_io)?;
    writer
        .write_event(Event::End(BytesEnd::new("data")))
        .map_err(xml_io)?;
    Ok(())
}

/// GraphML export with node/edge attributes carried as `<data>` elements.
pub fn to_graphml(graph: &GapGraph) -> Result<String, GraphError> {
    let mut writer = Writer::new_with_indent(Cursor::new(Vec::new()), b' ', 2);

    writer
        .write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))
        .map_err(xml_io)?;
    let mut root = BytesStart::new("graphml");
    root.push_attribute(("xmlns", "http://graphml.graphdrawing.org/xmlns"));
    writer.write_event(Event::Start(root)).map_err(xml_io)?;

    for (id, target) in [
        ("node_type", "node"),
        ("label", "node"),
        ("anchors", "node"),
        ("rel", "edge"),
        ("unit_id", "edge"),
        ("evidence_anchor", "edge"),
    ] {
        let mut key = BytesStart::new("key");
        key.push_attribute(("id", id));
        key.push_attribute(("for", target));
        key.push_attribute(("attr.name", id));
        key.push_attribute(("attr.type", "string"));
        writer.write_event(Event::Empty(key)).map_err(xml_io)?;
    }

    let mut g = BytesStart::new("graph");
    g.push_attribute(("id", "G"));
    g.push_attribute(("edgedefault", "directed"));
    writer.write_event(Event::Start(g)).map_err(xml_io)?;

    for node in graph.nodes() {
        let mut start = BytesStart::new("node");
        start.push_attribute(("id", node.id.as_str()));
        writer.write_event(Event::Start(start)).map_err(xml_io)?;
        write_data_element(&mut writer, "node_type", &node.node_type.to_string())?;
        write_data_element(&mut writer, "label", &node.label)?;
        if !node.anchors.is_empty() {
            write_data_element(&mut writer, "anchors", &node.anchors.join(ANCHOR_SEPARATOR))?;
        }
        writer
            .write_event(Event::End(BytesEnd::new("node")))
            .map_err(xml_io)?;
    }
    for edge in graph.edges() {
        let mut start = BytesStart::new("edge");
        start.push_attribute(("source", edge.source.as_str()));
        start.push_attribute(("target", edge.target.as_str()));
        writer.write_event(Event::Start(start)).map_err(xml_io)?;
        write_data_element(&mut writer, "rel", &edge.edge_type.to_string())?;
        if let Some(unit_id) = &edge.unit_id {
            write_data_element(&mut writer, "unit_id", unit_id)?;
        }
        write_data_element(&mut writer, "evidence_anchor", &edge.mapping_rule)?;
        writer
            .write_event(Event::End(BytesEnd::new("edge")))
            .map_err(xml_io)?;
    }

    writer
        .write_event(Event::End(BytesEnd::new("graph")))
        .map_err(xml_io)?;
    writer
        .write_event(Event::End(BytesEnd::new("graphml")))
        .map_err(xml_io)?;
    Ok(String::from_utf8(writer.into_inner().into_inner()).expect("utf8"))
}

pub fn from_graphml(xml: &str) -> Result<GapGraph, GraphError> {
    // No global text trimming: whitespace inside <data> values is
    // significant, and indentation arrives only outside of them.
    let mut reader = Reader::from_str(xml);
    let err = |e: quick_xml::Error| GraphError::GraphMl(e.to_string());

    #[derive(Default)]
    struct PendingNode {
        id: String,
        node_type: Option<NodeType>,
        label: String,
        anchors: Vec<String>,
    }
    #[derive(Default)]
    struct PendingEdge {
        source: String,
        target: String,
        rel: Option<EdgeType>,
        unit_id: Option<String>,
        mapping_rule: String,
    }

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut node: Option<PendingNode> = None;
    let mut edge: Option<PendingEdge> = None;
    let mut data_key: Option<String> = None;
    let mut data_value = String::new();

    loop {
        match reader.read_event().map_err(err)? {
            Event::Start(start) | Event::Empty(start) => {
                let name = String::from_utf8_lossy(start.name().as_ref()).to_string();
                let attr = |key: &str| -> Option<String> {
                    start.attributes().flatten().find_map(|a| {
                        (String::from_utf8_lossy(a.key.as_ref()) == key)
                            .then(|| String::from_utf8_lossy(&a.value).to_string())
                    })
                };
                match name.as_str() {
                    "node" => {
                        node = Some(PendingNode {
                            id: attr("id").unwrap_or_default(),
                            ..Default::default()
                        });
                    }
                    "edge" => {
                        edge = Some(PendingEdge {
                            source: attr("source").unwrap_or_default(),
                            target: attr("target").unwrap_or_default(),
                            ..Default::default()
                        });
                    }
                    "data" => {
                        data_key = attr("key");
                        data_value.clear();
                    }
                    _ => {}
                }
            }
            Event::Text(text) => {
                if data_key.is_some() {
                    data_value.push_str(
                        &text
                            .decode()
                            .map_err(|e| GraphError::GraphMl(e.to_string()))?,
                    );
                }
            }
            // Escaped characters arrive as standalone entity references.
            Event::GeneralRef(entity) => {
                if data_key.is_some() {
                    let name = String::from_utf8_lossy(entity.as_ref()).to_string();
                    match name.as_str() {
                        "amp" => data_value.push('&'),
                        "lt" => data_value.push('<'),
                        "gt" => data_value.push('>'),
                        "quot" => data_value.push('"'),
                        "apos" => data_value.push('\''),
                        _ => {
                            let resolved = entity
                                .resolve_char_ref()
                                .map_err(|e| GraphError::GraphMl(e.to_string()))?
                                .ok_or_else(|| {
                                    GraphError::GraphMl(format!("unknown entity &{name};"))
                                })?;
                            data_value.push(resolved);
                        }
                    }
                }
            }
            Event::End(end) => {
                let name = String::from_utf8_lossy(end.name().as_ref()).to_string();
                match name.as_str() {
                    "data" => {
                        let key = data_key.take().unwrap_or_default();
                        let value = std::mem::take(&mut data_value);
                        if let Some(n) = node.as_mut() {
                            match key.as_str() {
                                "node_type" => n.node_type = Some(value.parse()?),
                                "label" => n.label = value,
                                "anchors" => {
                                    n.anchors = value
                                        .split(ANCHOR_SEPARATOR)
                                        .filter(|s| !s.is_empty())
                                        .map(str::to_string)
                                        .collect()
                                }
                                _ => {}
                            }
                        } else if let Some(e) = edge.as_mut() {
                            match key.as_str() {
                                "rel" => {
                                    e.rel = Some(
                                        EdgeType::ALL
                                            .into_iter()
                                            .find(|t| t.to_string() == value)
                                            .ok_or_else(|| GraphError::UnknownName {
                                                kind: "edge type",
                                                value: value.clone(),
                                            })?,
                                    )
                                }
                                "unit_id" => e.unit_id = Some(value),
                                "evidence_anchor" => e.mapping_rule = value,
                                _ => {}
                            }
                        }
                    }
                    "node" => {
                        if let Some(n) = node.take() {
                            nodes.push(GraphNode {
                                id: n.id,
                                node_type: n.node_type.ok_or_else(|| {
                                    GraphError::GraphMl("node without node_type".to_string())
                                })?,
                                label: n.label,
                                anchors: n.anchors,
                            });
                        }
                    }
                    "edge" => {
                        if let Some(e) = edge.take() {
                            edges.push(GraphEdge {
                                source: e.source,
                                edge_type: e.rel.ok_or_else(|| {
                                    GraphError::GraphMl("edge without rel".to_string())
                                })?,
                                target: e.target,
                                mapping_rule: e.mapping_rule,
                                unit_id: e.unit_id,
                            });
                        }
                    }
                    _ => {}
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(GapGraph::from_parts(nodes, edges))
}
