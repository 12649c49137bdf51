//! Advisory graph diagnostics: orphans, directed cycles, duplicate edges.

use std::collections::BTreeMap;

use super::{DesignState, GraphDiagnostics};

/// Inspects a state without mutating it. Orphans are nodes with total
/// degree zero. Cycles are the strongly connected components with more
/// than one member (self-loops cannot occur; parsing rejects them), each
/// reported with its members sorted. Duplicate edges list each repeated
/// (source, target) pair once, in first-occurrence order.
pub fn validate_graph(state: &DesignState) -> GraphDiagnostics {
    let ids: Vec<&String> = state.nodes.keys().collect();
    let index_of: BTreeMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let mut adjacency = vec![Vec::new(); ids.len()];
    let mut degree = vec![0usize; ids.len()];
    for edge in &state.edges {
        // Endpoints always resolve: referential integrity holds for any
        // state built through parsing or mutation.
        let s = index_of[edge.source.as_str()];
        let t = index_of[edge.target.as_str()];
        adjacency[s].push(t);
        degree[s] += 1;
        degree[t] += 1;
    }

    let orphan_nodes = ids
        .iter()
        .enumerate()
        .filter(|(i, _)| degree[*i] == 0)
        .map(|(_, id)| (*id).clone())
        .collect();

    let mut cycles = Vec::new();
    for component in strongly_connected_components(&adjacency) {
        if component.len() > 1 {
            let mut members: Vec<String> = component.iter().map(|&i| ids[i].clone()).collect();
            members.sort();
            cycles.push(members);
        }
    }
    cycles.sort();

    let mut seen: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut duplicate_edges = Vec::new();
    for edge in &state.edges {
        let count = seen
            .entry((edge.source.as_str(), edge.target.as_str()))
            .or_insert(0);
        *count += 1;
        if *count == 2 {
            duplicate_edges.push(edge.clone());
        }
    }

    GraphDiagnostics {
        orphan_nodes,
        cycles,
        duplicate_edges,
    }
}

/// Iterative Tarjan over an index-based adjacency list, so deep chains
/// cannot overflow the call stack.
fn strongly_connected_components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adjacency.len();
    let mut index = vec![UNVISITED; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut components = Vec::new();

    // Explicit DFS frames: (node, next child position to explore).
    let mut frames: Vec<(usize, usize)> = Vec::new();
    for start in 0..n {
        if index[start] != UNVISITED {
            continue;
        }
        frames.push((start, 0));
        while let Some(&mut (v, ref mut child_pos)) = frames.last_mut() {
            if *child_pos == 0 {
                index[v] = next_index;
                lowlink[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adjacency[v].get(*child_pos) {
                *child_pos += 1;
                if index[w] == UNVISITED {
                    frames.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                lowlink[parent] = lowlink[parent].min(lowlink[v]);
            }
            if lowlink[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack holds the component");
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                components.push(component);
            }
        }
    }
    components
}
