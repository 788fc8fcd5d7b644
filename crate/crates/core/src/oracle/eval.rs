use std::collections::BTreeMap;

use super::kernels::eval_node;
use crate::error::{Error, Result};
use crate::nier::{topo_order, NierGraph, RationalTensor};

/// Every tensor value of one forward pass: inputs, initializers and node
/// outputs, keyed by tensor name.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExactActivationTrace {
    pub values: BTreeMap<String, RationalTensor>,
}

impl ExactActivationTrace {
    pub fn get(&self, name: &str) -> Option<&RationalTensor> {
        self.values.get(name)
    }
}

/// Runs the graph on one input with exact rational arithmetic. Returns the
/// graph outputs in declaration order and the full trace.
pub fn eval_exact(
    graph: &NierGraph,
    input: &RationalTensor,
) -> Result<(Vec<RationalTensor>, ExactActivationTrace)> {
    eval_exact_many(graph, std::slice::from_ref(input))
}

/// Multi-input form of [`eval_exact`]; `inputs` follow `graph.inputs`.
pub fn eval_exact_many(
    graph: &NierGraph,
    inputs: &[RationalTensor],
) -> Result<(Vec<RationalTensor>, ExactActivationTrace)> {
    if inputs.len() != graph.inputs.len() {
        return Err(Error::ShapeMismatch {
            node: "<graph inputs>".into(),
            expected: format!("{} inputs", graph.inputs.len()),
            actual: format!("{} inputs", inputs.len()),
        });
    }
    let mut values: BTreeMap<String, RationalTensor> = BTreeMap::new();
    for (decl, value) in graph.inputs.iter().zip(inputs) {
        if value.shape() != &decl.shape {
            return Err(Error::ShapeMismatch {
                node: decl.name.clone(),
                expected: decl.shape.to_string(),
                actual: value.shape().to_string(),
            });
        }
        values.insert(decl.name.clone(), value.clone());
    }
    for (name, t) in &graph.tensors {
        values.insert(name.clone(), t.clone());
    }
    for i in topo_order(graph)? {
        let node = &graph.nodes[i];
        let args: Vec<&RationalTensor> = node
            .inputs
            .iter()
            .map(|n| values.get(n).ok_or_else(|| Error::UnknownTensor(n.clone())))
            .collect::<Result<_>>()?;
        let out = eval_node(node, &args)?;
        values.insert(node.output.clone(), out);
    }
    let outputs = graph
        .outputs
        .iter()
        .map(|o| values.get(&o.name).cloned().ok_or_else(|| Error::UnknownTensor(o.name.clone())))
        .collect::<Result<_>>()?;
    Ok((outputs, ExactActivationTrace { values }))
}
