//! Shared fixtures for the integration suites: seeded random design
//! states, document corruptions, and canned reply tables for full
//! scripted runs.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use uuid::Uuid;

use dsgforge::dsg::{
    DesignNode, DesignState, Edge, Embodiment, ParamValue, PhysicsModel, StatusFlag,
};
use dsgforge::llm::ScriptTable;

pub const CDC: &str = "Design a solar water filter.\n\nFINALIZED\n";
pub const P0: &str = "11111111-1111-4111-8111-111111111111";
pub const P1: &str = "22222222-2222-4222-8222-222222222222";
pub const P2: &str = "33333333-3333-4333-8333-333333333333";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uid(rng: &mut ChaCha8Rng) -> String {
    Uuid::from_u128(rng.random()).to_string()
}

const KINDS: &[&str] = &["component", "function", "interface"];
const WORDS: &[&str] = &[
    "pump",
    "filter",
    "membrane",
    "collector",
    "basin",
    "valve",
    "sensor",
    "tank",
];
const PRINCIPLES: &[&str] = &[
    "reverse osmosis",
    "uv sterilization",
    "thermal distillation",
    "adsorption",
    "",
];
const UNITS: &[&str] = &["m", "kg", "W"];

fn pick<'a>(rng: &mut ChaCha8Rng, options: &[&'a str]) -> &'a str {
    options[rng.random_range(0..options.len())]
}

fn random_status(rng: &mut ChaCha8Rng) -> StatusFlag {
    match rng.random_range(0..3) {
        0 => StatusFlag::Draft,
        1 => StatusFlag::Reviewed,
        _ => StatusFlag::Validated,
    }
}

fn random_embodiment(rng: &mut ChaCha8Rng) -> Embodiment {
    let mut design_parameters = BTreeMap::new();
    for i in 0..rng.random_range(0..=2) {
        design_parameters.insert(
            format!("p{i}"),
            ParamValue {
                value: rng.random_range(0..10_000) as f64 / 10.0,
                unit: pick(rng, UNITS).to_string(),
            },
        );
    }
    Embodiment {
        principle: pick(rng, PRINCIPLES).to_string(),
        description: pick(rng, WORDS).to_string(),
        design_parameters,
        cost_estimate: rng
            .random_bool(0.5)
            .then(|| rng.random_range(1..500) as f64),
        mass_estimate: rng
            .random_bool(0.5)
            .then(|| rng.random_range(1..100) as f64),
        status: random_status(rng),
    }
}

fn random_model(rng: &mut ChaCha8Rng) -> PhysicsModel {
    PhysicsModel {
        equation: format!("q = {} * a", rng.random_range(1..9)),
        code: if rng.random_bool(0.5) {
            "print('ok')\n".to_string()
        } else {
            String::new()
        },
        assumptions: vec![format!("{} is ideal", pick(rng, WORDS))],
        status: random_status(rng),
    }
}

/// A structurally valid state: UUID node ids, resolvable edge endpoints,
/// no self-loops. Everything else is randomized, including duplicate
/// edges (legal multigraph data).
pub fn random_state(rng: &mut ChaCha8Rng) -> DesignState {
    let ids: Vec<String> = (0..rng.random_range(1..=8)).map(|_| uid(rng)).collect();
    let mut state = DesignState::default();
    for id in &ids {
        let node = DesignNode {
            node_id: id.clone(),
            node_kind: pick(rng, KINDS).to_string(),
            name: pick(rng, WORDS).to_string(),
            description: format!("{} stage", pick(rng, WORDS)),
            embodiment: rng.random_bool(0.7).then(|| random_embodiment(rng)),
            physics_models: (0..rng.random_range(0..=2))
                .map(|_| random_model(rng))
                .collect(),
            linked_reqs: (0..rng.random_range(0..=3))
                .map(|_| format!("SR-{:02}", rng.random_range(1..=10)))
                .collect(),
            verification_plan: pick(rng, WORDS).to_string(),
            maturity: pick(rng, &["concept", "detailed", "verified"]).to_string(),
            tags: vec![pick(rng, WORDS).to_string()],
        };
        state.nodes.insert(id.clone(), node);
    }
    if ids.len() >= 2 {
        for _ in 0..rng.random_range(0..=2 * ids.len()) {
            let a = rng.random_range(0..ids.len());
            let mut b = rng.random_range(0..ids.len());
            if a == b {
                b = (b + 1) % ids.len();
            }
            state.edges.push(Edge::new(ids[a].clone(), ids[b].clone()));
        }
    }
    state
}

fn as_value(text: &str) -> Value {
    serde_json::from_str(text).expect("corruptions start from valid documents")
}

fn first_node_key(value: &Value) -> String {
    value["nodes"]
        .as_object()
        .expect("nodes object")
        .keys()
        .next()
        .expect("at least one node")
        .clone()
}

/// Cuts the document in half; the remainder is no longer JSON.
pub fn corrupt_truncated(text: &str) -> String {
    text[..text.len() / 2].to_string()
}

/// Adds an edge to a node id that is not in the map.
pub fn corrupt_dangling_edge(text: &str, rng: &mut ChaCha8Rng) -> String {
    let mut value = as_value(text);
    let ghost = uid(rng);
    let anchor = first_node_key(&value);
    value["edges"]
        .as_array_mut()
        .expect("edges array")
        .push(json!([anchor, ghost]));
    value.to_string()
}

/// Renames one node (key and node_id together) to a non-UUID string.
pub fn corrupt_bad_uuid(text: &str) -> String {
    let mut value = as_value(text);
    let key = first_node_key(&value);
    let nodes = value["nodes"].as_object_mut().expect("nodes object");
    let mut node = nodes.remove(&key).expect("key exists");
    node["node_id"] = json!("pump-one");
    nodes.insert("pump-one".to_string(), node);
    value.to_string()
}

/// Adds an edge from a node to itself.
pub fn corrupt_self_loop(text: &str) -> String {
    let mut value = as_value(text);
    let anchor = first_node_key(&value);
    value["edges"]
        .as_array_mut()
        .expect("edges array")
        .push(json!([anchor.clone(), anchor]));
    value.to_string()
}

/// Sets an embodiment status outside the draft/reviewed/validated set.
pub fn corrupt_status_flag(text: &str) -> String {
    let mut value = as_value(text);
    let key = first_node_key(&value);
    value["nodes"][&key]["embodiment"] = json!({"principle": "x", "status": "golden"});
    value.to_string()
}

pub fn proposal_doc(id: &str, name: &str) -> String {
    format!(
        r#"```json
{{"nodes": {{"{id}": {{"name": "{name}", "node_kind": "component"}}}}, "edges": []}}
```"#
    )
}

pub fn three_proposals() -> String {
    format!(
        "{}\n{}\n{}",
        proposal_doc(P0, "membrane"),
        proposal_doc(P1, "uv"),
        proposal_doc(P2, "thermal")
    )
}

pub fn critiques_for_three() -> &'static str {
    r#"{"critiques": [
        {"proposal_index": 0, "text": "weak flux"},
        {"proposal_index": 1, "text": "solid"},
        {"proposal_index": 2, "text": "heavy"}]}"#
}

pub fn scores_for_three() -> &'static str {
    r#"{"scores": [
        {"proposal_index": 0, "score": 7, "justification": "ok"},
        {"proposal_index": 1, "score": 9, "justification": "best"},
        {"proposal_index": 2, "score": 4, "justification": "bulky"}]}"#
}

pub fn meta_select_one() -> &'static str {
    r#"{"selected_proposal_index": 1, "detailed_summary_for_graph": "add storage",
        "decisions": [
        {"proposal_index": 0, "final_status": "rejected", "reason": "flux"},
        {"proposal_index": 1, "final_status": "selected", "reason": "best"},
        {"proposal_index": 2, "final_status": "needs_iteration", "reason": "mass"}]}"#
}

/// One MAS-plus-2AS table good for any seed: the supervisor stops on its
/// second call, the 2AS reflector terminates on its second call.
pub fn dual_workflow_table() -> ScriptTable {
    let mut table = ScriptTable::new();
    table.insert(
        "supervisor",
        Some(0),
        None,
        r#"{"instructions": "explore the space", "stop": false}"#,
    );
    table.insert(
        "supervisor",
        Some(1),
        None,
        r#"{"instructions": "", "stop": true}"#,
    );
    table.wildcard("generator", three_proposals());
    table.wildcard("reflector", critiques_for_three());
    table.wildcard("ranker", scores_for_three());
    table.wildcard("meta_reviewer", meta_select_one());
    table.wildcard("generator_2as", proposal_doc(P0, "membrane"));
    table.insert(
        "reflector_2as",
        Some(0),
        None,
        r#"{"selected_index": 0, "terminate": false, "reason": "expand",
            "critiques": [{"proposal_index": 0, "text": "thin"}],
            "statuses": [{"proposal_index": 0, "final_status": "selected", "reason": "only"}]}"#,
    );
    table.insert(
        "reflector_2as",
        Some(1),
        None,
        r#"{"selected_index": 0, "terminate": true, "reason": "complete",
            "statuses": [{"proposal_index": 0, "final_status": "selected", "reason": "done"}]}"#,
    );
    table
}
