//! DOT export for visualization: one line per node, one per edge.

use std::fmt::Write;

use super::DesignState;

/// Renders the graph in DOT. Node lines come out in key order, edge lines
/// in stored order, so equal states produce equal text.
pub fn to_dot(state: &DesignState) -> String {
    let mut out = String::from("digraph dsg {\n");
    for (id, node) in &state.nodes {
        let label = if node.name.is_empty() { id } else { &node.name };
        writeln!(out, "  {} [label={}];", quote(id), quote(label)).unwrap();
    }
    for edge in &state.edges {
        writeln!(out, "  {} -> {};", quote(&edge.source), quote(&edge.target)).unwrap();
    }
    out.push_str("}\n");
    out
}

/// DOT double-quoted string: only `"` and `\` need escaping.
fn quote(text: &str) -> String {
    let mut quoted = String::with_capacity(text.len() + 2);
    quoted.push('"');
    for c in text.chars() {
        if c == '"' || c == '\\' {
            quoted.push('\\');
        }
        quoted.push(c);
    }
    quoted.push('"');
    quoted
}
