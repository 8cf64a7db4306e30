use std::collections::HashMap;

use super::CallGraph;
use crate::frontend::CallableId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scc {
    /// Sorted ascending.
    pub members: Vec<CallableId>,
    pub is_nontrivial: bool,
}

/// Strongly connected components in order of their lowest member.
///
/// Iterative Tarjan, so deep call chains do not exhaust the native stack.
pub fn sccs(graph: &CallGraph) -> Vec<Scc> {
    let index_of: HashMap<CallableId, usize> = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, i))
        .collect();
    let n = graph.nodes.len();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut self_loop = vec![false; n];
    for e in &graph.edges {
        let (Some(&a), Some(&b)) = (index_of.get(&e.from), index_of.get(&e.to)) else {
            continue;
        };
        succ[a].push(b);
        if a == b {
            self_loop[a] = true;
        }
    }

    const UNVISITED: usize = usize::MAX;
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut out = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        // (node, position in its successor list)
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = work.last_mut() {
            if let Some(&w) = succ[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut members = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    members.push(w);
                    if w == v {
                        break;
                    }
                }
                let is_nontrivial = members.len() > 1 || self_loop[v];
                let mut members: Vec<CallableId> =
                    members.into_iter().map(|i| graph.nodes[i]).collect();
                members.sort();
                out.push(Scc {
                    members,
                    is_nontrivial,
                });
            }
        }
    }
    out.sort_by_key(|s| s.members[0]);
    out
}
