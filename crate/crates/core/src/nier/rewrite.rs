use std::collections::HashSet;

use super::shape::flatten_axis;
use super::{infer_shapes, NierGraph, NierNode, Op, RationalTensor, TensorShape};
use crate::error::Result;
use crate::oracle::kernels::eval_node;

/// Which rewriting rules to apply. All are semantics-preserving under exact
/// evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RewriteRules {
    /// Replace nodes whose inputs are all constant by a `Constant` node.
    pub fold_constants: bool,
    /// Route consumers of `Identity` outputs to the identity's input.
    pub eliminate_identity: bool,
    /// Merge `Flatten(Flatten(x))` into a single `Flatten`.
    pub fuse_flatten: bool,
    /// Split `Gemm` with `alpha = beta = 1` into `MatMul` + `Add`.
    pub normalize_gemm: bool,
}

impl Default for RewriteRules {
    fn default() -> Self {
        Self {
            fold_constants: true,
            eliminate_identity: true,
            fuse_flatten: true,
            normalize_gemm: true,
        }
    }
}

impl RewriteRules {
    pub fn none() -> Self {
        Self {
            fold_constants: false,
            eliminate_identity: false,
            fuse_flatten: false,
            normalize_gemm: false,
        }
    }
}

/// Applies `rules` to a fixpoint. A graph no rule applies to comes back
/// unchanged.
pub fn rewrite(graph: &NierGraph, rules: &RewriteRules) -> Result<NierGraph> {
    let mut g = infer_shapes(graph)?;
    let mut changed_any = false;
    loop {
        let changed = (rules.fold_constants && fold_constants(&mut g)?)
            || (rules.eliminate_identity && eliminate_identity(&mut g))
            || (rules.fuse_flatten && fuse_flatten(&mut g))
            || (rules.normalize_gemm && normalize_gemm(&mut g));
        if !changed {
            break;
        }
        changed_any = true;
        g = infer_shapes(&g)?;
    }
    if changed_any {
        drop_dead_tensors(&mut g);
        g = infer_shapes(&g)?;
    }
    Ok(g)
}

fn constant_value<'a>(g: &'a NierGraph, name: &str) -> Option<&'a RationalTensor> {
    if let Some(t) = g.tensors.get(name) {
        return Some(t);
    }
    g.nodes.iter().find(|n| n.output == name).and_then(|n| match &n.op {
        Op::Constant(t) => Some(t),
        _ => None,
    })
}

fn fold_constants(g: &mut NierGraph) -> Result<bool> {
    for i in 0..g.nodes.len() {
        let node = &g.nodes[i];
        if matches!(node.op, Op::Constant(_)) || node.inputs.is_empty() {
            continue;
        }
        let args: Option<Vec<&RationalTensor>> =
            node.inputs.iter().map(|n| constant_value(g, n)).collect();
        let Some(args) = args else { continue };
        let value = eval_node(node, &args)?;
        let node = &mut g.nodes[i];
        node.op = Op::Constant(value);
        node.inputs.clear();
        return Ok(true);
    }
    Ok(false)
}

fn rename_uses(g: &mut NierGraph, from: &str, to: &str) {
    for node in &mut g.nodes {
        for input in &mut node.inputs {
            if input == from {
                *input = to.to_string();
            }
        }
    }
}

fn eliminate_identity(g: &mut NierGraph) -> bool {
    for i in 0..g.nodes.len() {
        if g.nodes[i].op != Op::Identity {
            continue;
        }
        let src = g.nodes[i].inputs[0].clone();
        let dst = g.nodes[i].output.clone();
        if !g.is_graph_output(&dst) {
            g.nodes.remove(i);
            rename_uses(g, &dst, &src);
            return true;
        }
        // The identity defines a graph output: keep the output name by
        // renaming the producer instead, when the source is a plain
        // intermediate.
        if g.is_graph_output(&src) {
            continue;
        }
        if let Some(p) = g.producer(&src) {
            g.nodes.remove(i);
            let p = if p > i { p - 1 } else { p };
            g.nodes[p].output = dst.clone();
            rename_uses(g, &src, &dst);
            return true;
        }
    }
    false
}

fn fuse_flatten(g: &mut NierGraph) -> bool {
    for outer in 0..g.nodes.len() {
        let Op::Flatten { axis: outer_axis } = g.nodes[outer].op else { continue };
        let mid = g.nodes[outer].inputs[0].clone();
        let Some(inner) = g.producer(&mid) else { continue };
        let Op::Flatten { axis: inner_axis } = g.nodes[inner].op else { continue };
        if g.use_count(&mid) != 1 {
            continue;
        }
        let source = g.nodes[inner].inputs[0].clone();
        let Some(rank) = g.shape_of(&source).map(TensorShape::rank) else { continue };
        let (Some(a1), Some(a2)) = (flatten_axis(inner_axis, rank), flatten_axis(outer_axis, 2))
        else {
            continue;
        };
        let fused = match a2 {
            0 => 0,
            1 => a1,
            _ => rank,
        };
        g.nodes[outer].op = Op::Flatten { axis: fused as i64 };
        g.nodes[outer].inputs[0] = source;
        g.nodes.remove(inner);
        return true;
    }
    false
}

fn fresh_name(g: &NierGraph, base: &str) -> String {
    let taken: HashSet<&str> = g
        .tensor_names()
        .into_iter()
        .chain(g.nodes.iter().map(|n| n.name.as_str()))
        .collect();
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|k| format!("{base}_{k}"))
        .find(|n| !taken.contains(n.as_str()))
        .expect("unbounded")
}

fn transpose(t: &RationalTensor) -> RationalTensor {
    let d = t.shape().dims();
    let (rows, cols) = (d[0], d[1]);
    RationalTensor::from_fn(TensorShape::new(vec![cols, rows]), |flat| {
        t.get(&[flat % rows, flat / rows]).clone()
    })
}

fn normalize_gemm(g: &mut NierGraph) -> bool {
    let one = crate::rational::Rational::from_integer(1.into());
    for i in 0..g.nodes.len() {
        let Op::Gemm(attrs) = &g.nodes[i].op else { continue };
        let has_bias = g.nodes[i].inputs.len() == 3;
        if attrs.alpha != one || (has_bias && attrs.beta != one) {
            continue;
        }
        let node = g.nodes[i].clone();
        let mut weight = node.inputs[1].clone();
        if attrs.trans_b {
            let Some(w) = g.tensors.get(&weight) else { continue };
            let transposed = transpose(w);
            let name = fresh_name(g, &format!("{weight}.T"));
            g.tensors.insert(name.clone(), transposed);
            weight = name;
        }
        let mut replacement = Vec::new();
        if has_bias {
            let mm_out = fresh_name(g, &format!("{}.matmul", node.output));
            let mm_name = fresh_name(g, &format!("{}.matmul", node.name));
            let add_name = fresh_name(g, &format!("{}.add", node.name));
            replacement.push(NierNode {
                name: mm_name,
                op: Op::MatMul,
                inputs: vec![node.inputs[0].clone(), weight],
                output: mm_out.clone(),
            });
            replacement.push(NierNode {
                name: add_name,
                op: Op::Add,
                inputs: vec![mm_out, node.inputs[2].clone()],
                output: node.output.clone(),
            });
        } else {
            replacement.push(NierNode {
                name: node.name.clone(),
                op: Op::MatMul,
                inputs: vec![node.inputs[0].clone(), weight],
                output: node.output.clone(),
            });
        }
        g.nodes.splice(i..=i, replacement);
        return true;
    }
    false
}

fn drop_dead_tensors(g: &mut NierGraph) {
    let used: HashSet<String> = g
        .nodes
        .iter()
        .flat_map(|n| n.inputs.iter().cloned())
        .chain(g.outputs.iter().map(|o| o.name.clone()))
        .collect();
    g.tensors.retain(|name, _| used.contains(name));
    while let Some(i) = g
        .nodes
        .iter()
        .position(|n| matches!(n.op, Op::Constant(_)) && g.use_count(&n.output) == 0)
    {
        g.nodes.remove(i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nier::{dump, GemmAttrs, ValueInfo};
    use crate::oracle::eval_exact;
    use crate::rational::Rational;

    fn r(n: i64) -> Rational {
        Rational::from_integer(n.into())
    }

    fn tensor(dims: &[usize], vals: &[i64]) -> RationalTensor {
        RationalTensor::new(dims.into(), vals.iter().map(|&v| r(v)).collect()).unwrap()
    }

    #[test]
    fn folds_constant_add() {
        let mut g = NierGraph {
            inputs: vec![ValueInfo::new("x", &[1, 2])],
            outputs: vec![ValueInfo::new("y", &[1, 2])],
            ..Default::default()
        };
        g.tensors.insert("a".into(), tensor(&[1, 2], &[1, 2]));
        g.tensors.insert("b".into(), tensor(&[1, 2], &[10, 20]));
        g.nodes.push(NierNode::new("sum", Op::Add, &["a", "b"], "c"));
        g.nodes.push(NierNode::new("out", Op::Add, &["x", "c"], "y"));
        let out = rewrite(&g, &RewriteRules::default()).unwrap();
        assert_eq!(out.nodes[0].op, Op::Constant(tensor(&[1, 2], &[11, 22])));
        assert!(out.tensors.is_empty());
        let x = tensor(&[1, 2], &[5, -5]);
        assert_eq!(eval_exact(&out, &x).unwrap().0, eval_exact(&g, &x).unwrap().0);
    }

    #[test]
    fn identity_before_gemm_is_bypassed() {
        let mut g = NierGraph {
            inputs: vec![ValueInfo::new("x", &[1, 2])],
            outputs: vec![ValueInfo::new("y", &[1, 1])],
            ..Default::default()
        };
        g.tensors.insert("w".into(), tensor(&[2, 1], &[3, 4]));
        g.nodes.push(NierNode::new("id", Op::Identity, &["x"], "x2"));
        g.nodes.push(NierNode::new("fc", Op::Gemm(GemmAttrs::default()), &["x2", "w"], "y"));
        let rules = RewriteRules { normalize_gemm: false, ..Default::default() };
        let out = rewrite(&g, &rules).unwrap();
        assert_eq!(out.nodes.len(), 1);
        assert_eq!(out.nodes[0].inputs, vec!["x", "w"]);
    }

    #[test]
    fn identity_defining_output_renames_producer() {
        let mut g = NierGraph {
            inputs: vec![ValueInfo::new("x", &[1, 2])],
            outputs: vec![ValueInfo::new("y", &[1, 2])],
            ..Default::default()
        };
        g.nodes.push(NierNode::new("r", Op::Relu, &["x"], "h"));
        g.nodes.push(NierNode::new("id", Op::Identity, &["h"], "y"));
        let out = rewrite(&g, &RewriteRules::default()).unwrap();
        assert_eq!(out.nodes, vec![NierNode::new("r", Op::Relu, &["x"], "y")]);
    }

    #[test]
    fn flatten_pair_fuses() {
        let mut g = NierGraph {
            inputs: vec![ValueInfo::new("x", &[1, 2, 3, 4])],
            outputs: vec![ValueInfo::new("y", &[1, 24])],
            ..Default::default()
        };
        g.nodes.push(NierNode::new("f1", Op::Flatten { axis: 2 }, &["x"], "t"));
        g.nodes.push(NierNode::new("f2", Op::Flatten { axis: 0 }, &["t"], "y"));
        let out = rewrite(&g, &RewriteRules::default()).unwrap();
        assert_eq!(out.nodes, vec![NierNode::new("f2", Op::Flatten { axis: 0 }, &["x"], "y")]);
    }

    #[test]
    fn gemm_split_into_matmul_add() {
        let mut g = NierGraph {
            inputs: vec![ValueInfo::new("x", &[1, 2])],
            outputs: vec![ValueInfo::new("y", &[1, 3])],
            ..Default::default()
        };
        g.tensors.insert("w".into(), tensor(&[3, 2], &[1, 2, 3, 4, 5, 6]));
        g.tensors.insert("b".into(), tensor(&[3], &[7, 8, 9]));
        let attrs = GemmAttrs { trans_b: true, ..Default::default() };
        g.nodes.push(NierNode::new("fc", Op::Gemm(attrs), &["x", "w", "b"], "y"));
        let out = rewrite(&g, &RewriteRules::default()).unwrap();
        let kinds: Vec<_> = out.nodes.iter().map(|n| n.op.kind()).collect();
        assert_eq!(kinds, [crate::nier::OpKind::MatMul, crate::nier::OpKind::Add]);
        assert!(out.tensors.contains_key("w.T") && !out.tensors.contains_key("w"));
        let x = tensor(&[1, 2], &[-1, 2]);
        assert_eq!(eval_exact(&out, &x).unwrap().0, eval_exact(&g, &x).unwrap().0);
    }

    #[test]
    fn nothing_to_do_is_byte_identical() {
        let mut g = NierGraph {
            inputs: vec![ValueInfo::new("x", &[1, 2])],
            outputs: vec![ValueInfo::new("y", &[1, 2])],
            ..Default::default()
        };
        g.tensors.insert("b".into(), tensor(&[2], &[1, 1]));
        g.nodes.push(NierNode::new("add", Op::Add, &["x", "b"], "h"));
        g.nodes.push(NierNode::new("relu", Op::Relu, &["h"], "y"));
        let g = infer_shapes(&g).unwrap();
        let out = rewrite(&g, &RewriteRules::default()).unwrap();
        assert_eq!(dump(&out), dump(&g));
        assert_eq!(out, g);
    }
}
