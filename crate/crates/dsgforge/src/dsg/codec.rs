//! Parsing and canonical serialization of the DSG interchange format.
//!
//! Parsing is two-phase so the two failure classes stay distinct: text that
//! is not valid JSON at all is a [`DsgError::MalformedDocument`], while
//! valid JSON with the wrong shape or illegal values is a
//! [`DsgError::SchemaViolation`]. Parsing is tolerant where tolerance is
//! cheap (unknown fields dropped, optional fields defaulted, `node_id`
//! inferred from the map key) and strict where the invariants demand it
//! (UUID node ids, known status flags, resolvable edge endpoints, no
//! self-loops).

use serde_json::Value;
use uuid::Uuid;

use super::{DesignNode, DesignState, DsgError, Edge};

fn schema(message: impl Into<String>) -> DsgError {
    DsgError::SchemaViolation(message.into())
}

pub fn parse_design_state(text: &str) -> Result<DesignState, DsgError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| DsgError::MalformedDocument(e.to_string()))?;
    design_state_from_value(value)
}

/// Interprets an already-decoded JSON value as a [`DesignState`]. Shared by
/// [`parse_design_state`] and the agent layer, which fishes candidate
/// objects out of free-form model replies.
pub(crate) fn design_state_from_value(value: Value) -> Result<DesignState, DsgError> {
    let Value::Object(mut root) = value else {
        return Err(schema("top level must be a JSON object"));
    };
    let nodes_value = root
        .remove("nodes")
        .ok_or_else(|| schema("missing required field `nodes`"))?;
    let edges_value = root
        .remove("edges")
        .ok_or_else(|| schema("missing required field `edges`"))?;

    let Value::Object(raw_nodes) = nodes_value else {
        return Err(schema("`nodes` must be an object keyed by node id"));
    };
    let mut state = DesignState::default();
    for (key, mut raw_node) in raw_nodes {
        if let Value::Object(fields) = &mut raw_node {
            fields
                .entry("node_id")
                .or_insert_with(|| Value::String(key.clone()));
        }
        let node: DesignNode =
            serde_json::from_value(raw_node).map_err(|e| schema(format!("node {key:?}: {e}")))?;
        if node.node_id != key {
            return Err(schema(format!(
                "node {key:?} declares a different node_id {:?}",
                node.node_id
            )));
        }
        if Uuid::parse_str(&node.node_id).is_err() {
            return Err(schema(format!("node {key:?}: node_id is not a UUID")));
        }
        state.nodes.insert(key, node);
    }

    let Value::Array(raw_edges) = edges_value else {
        return Err(schema("`edges` must be a list"));
    };
    for (index, raw_edge) in raw_edges.into_iter().enumerate() {
        let edge: Edge = serde_json::from_value(raw_edge)
            .map_err(|_| schema(format!("edge {index}: expected a [source, target] pair")))?;
        if edge.source == edge.target {
            return Err(schema(format!(
                "edge {index}: self-loop on {:?}",
                edge.source
            )));
        }
        for endpoint in [&edge.source, &edge.target] {
            if !state.nodes.contains_key(endpoint) {
                return Err(schema(format!(
                    "edge {index}: endpoint {endpoint:?} is not in the node map"
                )));
            }
        }
        state.edges.push(edge);
    }
    Ok(state)
}

/// Emits the canonical form: pretty-printed JSON with node keys sorted,
/// edges in stored order, a fixed field order per type, and a trailing
/// newline. This is the on-disk snapshot format and the byte format all
/// determinism checks compare.
pub fn serialize_design_state(state: &DesignState) -> String {
    let mut text = serde_json::to_string_pretty(state).expect("design states always serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    const N1: &str = "00000000-0000-0000-0000-000000000001";
    const N2: &str = "00000000-0000-0000-0000-000000000002";

    fn doc(body: &str) -> String {
        body.replace("N1", N1).replace("N2", N2)
    }

    #[test]
    fn minimal_single_node_document() {
        let text = doc(r#"{"nodes": {"N1": {"name": "Pump"}}, "edges": []}"#);
        let state = parse_design_state(&text).unwrap();
        assert_eq!(state.nodes.len(), 1);
        assert!(state.edges.is_empty());
        assert_eq!(state.nodes[N1].node_id, N1);
        assert!(state.nodes[N1].embodiment.is_none());
    }

    #[test]
    fn truncated_document_is_malformed() {
        let text = doc(r#"{"nodes": {"N1": {"name": "Pump"}}, "edges": ["#);
        assert!(matches!(
            parse_design_state(&text),
            Err(DsgError::MalformedDocument(_))
        ));
    }

    #[test]
    fn dangling_edge_is_a_schema_violation() {
        let text = doc(r#"{"nodes": {"N1": {}}, "edges": [["N1", "N2"]]}"#);
        let err = parse_design_state(&text).unwrap_err();
        assert!(matches!(err, DsgError::SchemaViolation(_)), "{err}");
    }

    #[test]
    fn self_loop_is_rejected() {
        let text = doc(r#"{"nodes": {"N1": {}}, "edges": [["N1", "N1"]]}"#);
        let err = parse_design_state(&text).unwrap_err();
        assert!(err.to_string().contains("self-loop"), "{err}");
    }

    #[test]
    fn non_uuid_node_id_is_rejected() {
        let text = r#"{"nodes": {"pump": {}}, "edges": []}"#;
        let err = parse_design_state(text).unwrap_err();
        assert!(err.to_string().contains("not a UUID"), "{err}");
    }

    #[test]
    fn node_id_mismatch_is_rejected() {
        let text = doc(r#"{"nodes": {"N1": {"node_id": "N2"}}, "edges": []}"#);
        let err = parse_design_state(&text).unwrap_err();
        assert!(err.to_string().contains("different node_id"), "{err}");
    }

    #[test]
    fn missing_edges_field_is_rejected() {
        let text = doc(r#"{"nodes": {"N1": {}}}"#);
        let err = parse_design_state(&text).unwrap_err();
        assert!(err.to_string().contains("`edges`"), "{err}");
    }

    #[test]
    fn unknown_top_level_fields_are_dropped() {
        let text = doc(r#"{"nodes": {"N1": {}}, "edges": [], "comment": "hi"}"#);
        let state = parse_design_state(&text).unwrap();
        assert!(!serialize_design_state(&state).contains("comment"));
    }

    #[test]
    fn duplicate_edges_survive_round_trip() {
        let text = doc(r#"{"nodes": {"N1": {}, "N2": {}}, "edges": [["N1","N2"], ["N1","N2"]]}"#);
        let state = parse_design_state(&text).unwrap();
        assert_eq!(state.edges.len(), 2);
        let reparsed = parse_design_state(&serialize_design_state(&state)).unwrap();
        assert_eq!(reparsed.edges.len(), 2);
        assert_eq!(reparsed, state);
    }

    #[test]
    fn three_nodes_two_edges_round_trip_counts() {
        let n3 = "00000000-0000-0000-0000-000000000003";
        let text = doc(format!(
            r#"{{"nodes": {{"N1": {{}}, "N2": {{}}, "{n3}": {{}}}},
                "edges": [["N1","N2"], ["N2","{n3}"]]}}"#
        )
        .as_str());
        let state = parse_design_state(&text).unwrap();
        let reparsed = parse_design_state(&serialize_design_state(&state)).unwrap();
        assert_eq!(reparsed.nodes.len(), 3);
        assert_eq!(reparsed.edges.len(), 2);
    }
}
