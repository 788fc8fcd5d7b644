use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use super::NierGraph;
use crate::error::{Error, Result};

/// Kahn's algorithm over node indices; among ready nodes the one with the
/// smallest original index goes first, so the order is deterministic.
///
/// Also checks single assignment: every tensor is produced once, and every
/// node input names a graph input, an initializer or a node output.
pub fn topo_order(graph: &NierGraph) -> Result<Vec<usize>> {
    let mut produced_by: HashMap<&str, usize> = HashMap::new();
    let mut sources: HashSet<&str> = graph.inputs.iter().map(|v| v.name.as_str()).collect();
    for name in graph.tensors.keys() {
        if !sources.insert(name) {
            return Err(Error::DuplicateTensor(name.clone()));
        }
    }
    for (i, node) in graph.nodes.iter().enumerate() {
        if sources.contains(node.output.as_str())
            || produced_by.insert(&node.output, i).is_some()
        {
            return Err(Error::DuplicateTensor(node.output.clone()));
        }
    }

    let n = graph.nodes.len();
    let mut indegree = vec![0usize; n];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, node) in graph.nodes.iter().enumerate() {
        for input in &node.inputs {
            if let Some(&p) = produced_by.get(input.as_str()) {
                indegree[i] += 1;
                consumers[p].push(i);
            } else if !sources.contains(input.as_str()) {
                return Err(Error::UnknownTensor(input.clone()));
            }
        }
    }

    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &c in &consumers[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&i| indegree[i] > 0).expect("a node is left");
        return Err(Error::CycleDetected(graph.nodes[stuck].name.clone()));
    }
    Ok(order)
}

/// Returns a copy of the graph with its nodes in [`topo_order`].
pub fn topo_sort(graph: &NierGraph) -> Result<NierGraph> {
    let order = topo_order(graph)?;
    let mut sorted = graph.clone();
    sorted.nodes = order.into_iter().map(|i| graph.nodes[i].clone()).collect();
    Ok(sorted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nier::{NierNode, Op, ValueInfo};

    fn graph(nodes: Vec<NierNode>) -> NierGraph {
        NierGraph {
            nodes,
            inputs: vec![ValueInfo::new("x", &[1, 2])],
            ..Default::default()
        }
    }

    #[test]
    fn chain_keeps_order() {
        let g = graph(vec![
            NierNode::new("a", Op::Relu, &["x"], "ya"),
            NierNode::new("b", Op::Relu, &["ya"], "yb"),
            NierNode::new("c", Op::Relu, &["yb"], "yc"),
        ]);
        assert_eq!(topo_order(&g).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn chain_listed_backwards_is_sorted() {
        let g = graph(vec![
            NierNode::new("c", Op::Relu, &["yb"], "yc"),
            NierNode::new("b", Op::Relu, &["ya"], "yb"),
            NierNode::new("a", Op::Relu, &["x"], "ya"),
        ]);
        assert_eq!(topo_order(&g).unwrap(), vec![2, 1, 0]);
    }

    #[test]
    fn diamond_tie_break_by_index() {
        let g = graph(vec![
            NierNode::new("join", Op::Add, &["l", "r"], "j"),
            NierNode::new("right", Op::Relu, &["p"], "r"),
            NierNode::new("prod", Op::Relu, &["x"], "p"),
            NierNode::new("left", Op::Identity, &["p"], "l"),
        ]);
        let order = topo_order(&g).unwrap();
        assert_eq!(order, vec![2, 1, 3, 0]);
        assert_eq!(topo_order(&g).unwrap(), order);
    }

    #[test]
    fn back_edge_is_a_cycle() {
        let g = graph(vec![
            NierNode::new("a", Op::Add, &["x", "yb"], "ya"),
            NierNode::new("b", Op::Relu, &["ya"], "yb"),
        ]);
        assert!(matches!(topo_order(&g), Err(Error::CycleDetected(_))));
    }

    #[test]
    fn dangling_and_duplicate_names() {
        let g = graph(vec![NierNode::new("a", Op::Relu, &["nope"], "y")]);
        assert!(matches!(topo_order(&g), Err(Error::UnknownTensor(_))));
        let g = graph(vec![
            NierNode::new("a", Op::Relu, &["x"], "y"),
            NierNode::new("b", Op::Relu, &["x"], "y"),
        ]);
        assert!(matches!(topo_order(&g), Err(Error::DuplicateTensor(_))));
    }
}
