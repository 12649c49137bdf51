//! Design-State Graph data model: parsing, canonical serialization,
//! validation diagnostics, and sub-tree mutation.
//!
//! A [`DesignState`] is a typed directed multigraph. Nodes live in a sorted
//! map keyed by their id; connectivity lives in one flat edge list and
//! nowhere else. All values are immutable after construction and every
//! operation here is a pure function, so states can be shared freely across
//! threads.

mod codec;
mod diagnostics;
mod dot;
mod patch;

pub(crate) use codec::design_state_from_value;
pub use codec::{parse_design_state, serialize_design_state};
pub use diagnostics::validate_graph;
pub use dot::to_dot;
pub use patch::{mutate_subtree, NodePatch};

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DsgError {
    /// The document is not even valid JSON.
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    /// Valid JSON, but the shape or the values violate the schema.
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("node {node_id:?} has no physics model at index {index}")]
    UnknownModelIndex { node_id: String, index: usize },
}

/// Life-cycle flag shared by embodiments and physics models.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatusFlag {
    #[default]
    Draft,
    Reviewed,
    Validated,
}

/// An analytical or empirical model attached to a node. `code` holds the
/// Python source of the node's numerical script (possibly empty).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhysicsModel {
    #[serde(default)]
    pub equation: String,
    #[serde(default)]
    pub code: String,
    #[serde(default)]
    pub assumptions: Vec<String>,
    #[serde(default)]
    pub status: StatusFlag,
}

/// One named design parameter. Accepts either `{"value": 2.5, "unit": "m"}`
/// or a bare number on input; always serializes in the full form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamValue {
    pub value: f64,
    pub unit: String,
}

impl<'de> Deserialize<'de> for ParamValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Full {
                value: f64,
                #[serde(default)]
                unit: String,
            },
            Bare(f64),
        }
        Ok(match Repr::deserialize(deserializer)? {
            Repr::Full { value, unit } => ParamValue { value, unit },
            Repr::Bare(value) => ParamValue {
                value,
                unit: String::new(),
            },
        })
    }
}

/// The current physical realization of a node. `principle` must be present
/// in the document, though it may be an empty string (metrics treat an
/// empty principle with an empty description as "no embodiment").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embodiment {
    pub principle: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub design_parameters: BTreeMap<String, ParamValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_estimate: Option<f64>,
    #[serde(default)]
    pub status: StatusFlag,
}

/// The atomic element of the graph: one sub-function with at most one
/// embodiment and any number of physics models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignNode {
    pub node_id: String,
    #[serde(default)]
    pub node_kind: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embodiment: Option<Embodiment>,
    #[serde(default)]
    pub physics_models: Vec<PhysicsModel>,
    #[serde(default)]
    pub linked_reqs: Vec<String>,
    #[serde(default)]
    pub verification_plan: String,
    #[serde(default)]
    pub maturity: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// A directed flow of mass, energy, or information between two nodes.
/// Serialized as a two-element `[source, target]` array; an object with
/// `source`/`target` keys is also accepted on input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub source: String,
    pub target: String,
}

impl Edge {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Edge {
            source: source.into(),
            target: target.into(),
        }
    }
}

impl Serialize for Edge {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (&self.source, &self.target).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Pair(String, String),
            Object { source: String, target: String },
        }
        Ok(match Repr::deserialize(deserializer)? {
            Repr::Pair(source, target) | Repr::Object { source, target } => Edge { source, target },
        })
    }
}

/// A snapshot of the entire design graph. The edge list is the single
/// source of truth for connectivity; duplicate edges are legal and
/// preserved in order (multigraph semantics).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignState {
    pub nodes: BTreeMap<String, DesignNode>,
    pub edges: Vec<Edge>,
}

/// Advisory findings from [`validate_graph`]. A state with cycles or
/// orphans is still valid data: the generator prompt's acyclicity and
/// connectivity rules are soft constraints.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GraphDiagnostics {
    pub orphan_nodes: Vec<String>,
    pub cycles: Vec<Vec<String>>,
    pub duplicate_edges: Vec<Edge>,
}

/// Number of nodes in the snapshot.
pub fn graph_size(state: &DesignState) -> usize {
    state.nodes.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_value_accepts_bare_numbers() {
        let full: ParamValue = serde_json::from_str(r#"{"value": 2.5, "unit": "m"}"#).unwrap();
        let bare: ParamValue = serde_json::from_str("2.5").unwrap();
        assert_eq!(full.value, bare.value);
        assert_eq!(bare.unit, "");
    }

    #[test]
    fn edge_accepts_pair_and_object_forms() {
        let pair: Edge = serde_json::from_str(r#"["a", "b"]"#).unwrap();
        let object: Edge = serde_json::from_str(r#"{"source": "a", "target": "b"}"#).unwrap();
        assert_eq!(pair, object);
        assert_eq!(serde_json::to_string(&pair).unwrap(), r#"["a","b"]"#);
    }

    #[test]
    fn unknown_status_flag_is_rejected() {
        assert!(serde_json::from_str::<StatusFlag>(r#""draft""#).is_ok());
        assert!(serde_json::from_str::<StatusFlag>(r#""shipped""#).is_err());
    }

    #[test]
    fn graph_size_counts_nodes() {
        assert_eq!(graph_size(&DesignState::default()), 0);
    }
}
