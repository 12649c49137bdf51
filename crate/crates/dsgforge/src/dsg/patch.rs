//! Localized node mutation. A patch touches exactly one node and never the
//! edge list, so every other node's serialized form is byte-identical in
//! the result.

use super::{DesignNode, DesignState, DsgError, Embodiment, PhysicsModel};

/// Partial update for a single [`DesignNode`]. `None` leaves a field
/// untouched; `embodiment` is doubly optional so a patch can also clear it.
/// `model_code` replaces the `code` of individual physics models by index
/// and is applied after any whole-list `physics_models` replacement.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodePatch {
    pub node_kind: Option<String>,
    pub name: Option<String>,
    pub description: Option<String>,
    pub embodiment: Option<Option<Embodiment>>,
    pub physics_models: Option<Vec<PhysicsModel>>,
    pub linked_reqs: Option<Vec<String>>,
    pub verification_plan: Option<String>,
    pub maturity: Option<String>,
    pub tags: Option<Vec<String>>,
    pub model_code: Vec<(usize, String)>,
}

impl NodePatch {
    /// Shorthand for the coder stage's one common patch: replace the code
    /// of physics model `index`.
    pub fn replace_code(index: usize, code: impl Into<String>) -> Self {
        NodePatch {
            model_code: vec![(index, code.into())],
            ..NodePatch::default()
        }
    }
}

/// Returns a new state in which only `node_id` differs. The node's id
/// itself is not patchable: it is the map key and edge endpoints refer to
/// it.
pub fn mutate_subtree(
    state: &DesignState,
    node_id: &str,
    patch: &NodePatch,
) -> Result<DesignState, DsgError> {
    let mut next = state.clone();
    let node = next
        .nodes
        .get_mut(node_id)
        .ok_or_else(|| DsgError::UnknownNode(node_id.to_string()))?;
    apply(node, patch)?;
    Ok(next)
}

fn apply(node: &mut DesignNode, patch: &NodePatch) -> Result<(), DsgError> {
    if let Some(v) = &patch.node_kind {
        node.node_kind = v.clone();
    }
    if let Some(v) = &patch.name {
        node.name = v.clone();
    }
    if let Some(v) = &patch.description {
        node.description = v.clone();
    }
    if let Some(v) = &patch.embodiment {
        node.embodiment = v.clone();
    }
    if let Some(v) = &patch.physics_models {
        node.physics_models = v.clone();
    }
    if let Some(v) = &patch.linked_reqs {
        node.linked_reqs = v.clone();
    }
    if let Some(v) = &patch.verification_plan {
        node.verification_plan = v.clone();
    }
    if let Some(v) = &patch.maturity {
        node.maturity = v.clone();
    }
    if let Some(v) = &patch.tags {
        node.tags = v.clone();
    }
    for (index, code) in &patch.model_code {
        let model =
            node.physics_models
                .get_mut(*index)
                .ok_or_else(|| DsgError::UnknownModelIndex {
                    node_id: node.node_id.clone(),
                    index: *index,
                })?;
        model.code = code.clone();
    }
    Ok(())
}
