use std::collections::BTreeMap;

use super::{topo_sort, NierGraph, NierNode, Op, TensorShape};
use crate::error::{Error, Result};

fn mismatch(node: &NierNode, expected: impl Into<String>, actual: impl Into<String>) -> Error {
    Error::ShapeMismatch {
        node: node.name.clone(),
        expected: expected.into(),
        actual: actual.into(),
    }
}

/// Annotates every tensor with its concrete shape and sorts nodes
/// topologically. Idempotent.
pub fn infer_shapes(graph: &NierGraph) -> Result<NierGraph> {
    let mut out = topo_sort(graph)?;
    let mut shapes: BTreeMap<String, TensorShape> = BTreeMap::new();
    for v in &out.inputs {
        if !v.shape.is_valid() {
            return Err(Error::ShapeMismatch {
                node: v.name.clone(),
                expected: "non-empty dims >= 1".into(),
                actual: v.shape.to_string(),
            });
        }
        shapes.insert(v.name.clone(), v.shape.clone());
    }
    for (name, t) in &out.tensors {
        shapes.insert(name.clone(), t.shape().clone());
    }
    for node in &out.nodes {
        let ins: Vec<&TensorShape> = node
            .inputs
            .iter()
            .map(|i| shapes.get(i).ok_or_else(|| Error::UnknownTensor(i.clone())))
            .collect::<Result<_>>()?;
        let shape = node_output_shape(node, &ins)?;
        shapes.insert(node.output.clone(), shape);
    }
    for v in &out.outputs {
        let actual = shapes.get(&v.name).ok_or_else(|| Error::UnknownTensor(v.name.clone()))?;
        if actual != &v.shape {
            return Err(Error::ShapeMismatch {
                node: v.name.clone(),
                expected: v.shape.to_string(),
                actual: actual.to_string(),
            });
        }
    }
    out.shapes = shapes;
    Ok(out)
}

fn arity(node: &NierNode, ins: &[&TensorShape], min: usize, max: usize) -> Result<()> {
    if ins.len() < min || ins.len() > max {
        let expected = if min == max {
            format!("{min} inputs")
        } else {
            format!("{min}..={max} inputs")
        };
        return Err(mismatch(node, expected, format!("{} inputs", ins.len())));
    }
    Ok(())
}

fn rank(node: &NierNode, s: &TensorShape, want: usize) -> Result<()> {
    if s.rank() != want {
        return Err(mismatch(node, format!("rank {want}"), s.to_string()));
    }
    Ok(())
}

/// Numpy-style multidirectional broadcast.
pub fn broadcast_shapes(a: &TensorShape, b: &TensorShape) -> Option<TensorShape> {
    let r = a.rank().max(b.rank());
    let pad = |s: &TensorShape| -> Vec<usize> {
        let mut d = vec![1; r - s.rank()];
        d.extend_from_slice(s.dims());
        d
    };
    let (da, db) = (pad(a), pad(b));
    da.iter()
        .zip(&db)
        .map(|(&x, &y)| match (x, y) {
            (x, y) if x == y => Some(x),
            (1, y) => Some(y),
            (x, 1) => Some(x),
            _ => None,
        })
        .collect::<Option<Vec<_>>>()
        .map(TensorShape::new)
}

/// Resolves a possibly negative Flatten axis against the input rank.
pub(crate) fn flatten_axis(axis: i64, rank: usize) -> Option<usize> {
    let r = rank as i64;
    let a = if axis < 0 { axis + r } else { axis };
    (0..=r).contains(&a).then_some(a as usize)
}

pub(crate) fn node_output_shape(node: &NierNode, ins: &[&TensorShape]) -> Result<TensorShape> {
    match &node.op {
        Op::Relu | Op::Identity => {
            arity(node, ins, 1, 1)?;
            Ok(ins[0].clone())
        }
        Op::Constant(t) => {
            arity(node, ins, 0, 0)?;
            Ok(t.shape().clone())
        }
        Op::Add => {
            arity(node, ins, 2, 2)?;
            broadcast_shapes(ins[0], ins[1])
                .ok_or_else(|| mismatch(node, ins[0].to_string(), ins[1].to_string()))
        }
        Op::MatMul => {
            arity(node, ins, 2, 2)?;
            rank(node, ins[0], 2)?;
            rank(node, ins[1], 2)?;
            let (a, b) = (ins[0].dims(), ins[1].dims());
            if a[1] != b[0] {
                return Err(mismatch(
                    node,
                    format!("{} rows in right operand", a[1]),
                    ins[1].to_string(),
                ));
            }
            Ok(TensorShape::new(vec![a[0], b[1]]))
        }
        Op::Gemm(attrs) => {
            arity(node, ins, 2, 3)?;
            rank(node, ins[0], 2)?;
            rank(node, ins[1], 2)?;
            let (a, b) = (ins[0].dims(), ins[1].dims());
            let (k, n) = if attrs.trans_b { (b[1], b[0]) } else { (b[0], b[1]) };
            if a[1] != k {
                return Err(mismatch(
                    node,
                    format!("inner dimension {k} (weight {})", ins[1]),
                    format!("input {}", ins[0]),
                ));
            }
            let out = TensorShape::new(vec![a[0], n]);
            if let Some(c) = ins.get(2) {
                match broadcast_shapes(&out, c) {
                    Some(s) if s == out => {}
                    _ => {
                        return Err(mismatch(
                            node,
                            format!("bias broadcastable to {out}"),
                            c.to_string(),
                        ))
                    }
                }
            }
            Ok(out)
        }
        Op::Conv2D(w) => {
            arity(node, ins, 2, 3)?;
            rank(node, ins[0], 4)?;
            rank(node, ins[1], 4)?;
            let (x, k) = (ins[0].dims(), ins[1].dims());
            if k[1] != x[1] {
                return Err(mismatch(
                    node,
                    format!("{} input channels", k[1]),
                    ins[0].to_string(),
                ));
            }
            if [k[2], k[3]] != w.kernel {
                return Err(mismatch(
                    node,
                    format!("kernel {}x{}", w.kernel[0], w.kernel[1]),
                    ins[1].to_string(),
                ));
            }
            if let Some(b) = ins.get(2) {
                if b.dims() != [k[0]] {
                    return Err(mismatch(node, format!("bias [{}]", k[0]), b.to_string()));
                }
            }
            let (oh, ow) = spatial(node, w, x)?;
            Ok(TensorShape::new(vec![x[0], k[0], oh, ow]))
        }
        Op::MaxPool2D(w) => {
            arity(node, ins, 1, 1)?;
            rank(node, ins[0], 4)?;
            let x = ins[0].dims();
            if w.pads.iter().zip([0, 1, 0, 1]).any(|(&p, axis)| p >= w.kernel[axis]) {
                return Err(Error::EmptyWindow { node: node.name.clone() });
            }
            let (oh, ow) = spatial(node, w, x).map_err(|_| Error::EmptyWindow {
                node: node.name.clone(),
            })?;
            Ok(TensorShape::new(vec![x[0], x[1], oh, ow]))
        }
        Op::Flatten { axis } => {
            arity(node, ins, 1, 1)?;
            let d = ins[0].dims();
            let a = flatten_axis(*axis, d.len())
                .ok_or_else(|| mismatch(node, format!("axis within rank {}", d.len()), axis.to_string()))?;
            Ok(TensorShape::new(vec![
                d[..a].iter().product(),
                d[a..].iter().product(),
            ]))
        }
    }
}

fn spatial(node: &NierNode, w: &super::Window2D, x: &[usize]) -> Result<(usize, usize)> {
    let oh = w.output_extent(0, x[2]);
    let ow = w.output_extent(1, x[3]);
    match (oh, ow) {
        (Some(h), Some(w)) => Ok((h, w)),
        _ => Err(mismatch(
            node,
            format!("spatial extent >= kernel {}x{}", w.kernel[0], w.kernel[1]),
            format!("{}x{}", x[2], x[3]),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nier::{GemmAttrs, RationalTensor, ValueInfo, Window2D};

    fn single(op: Op, input: &[usize], consts: Vec<(&str, &[usize])>) -> Result<NierGraph> {
        let mut g = NierGraph {
            inputs: vec![ValueInfo::new("x", input)],
            ..Default::default()
        };
        let mut names = vec!["x"];
        for (name, dims) in consts {
            g.tensors.insert(name.into(), RationalTensor::zeros(dims.into()));
            names.push(name);
        }
        g.nodes.push(NierNode::new("n", op, &names, "y"));
        infer_shapes(&g)
    }

    #[test]
    fn conv_valid_padding() {
        let w = Window2D { kernel: [3, 3], strides: [1, 1], pads: [0; 4] };
        let g = single(Op::Conv2D(w), &[1, 1, 9, 9], vec![("k", &[5, 1, 3, 3])]).unwrap();
        assert_eq!(g.shapes["y"].dims(), [1, 5, 7, 7]);
    }

    #[test]
    fn maxpool_stride_two() {
        let w = Window2D { kernel: [2, 2], strides: [2, 2], pads: [0; 4] };
        let g = single(Op::MaxPool2D(w), &[1, 1, 4, 4], vec![]).unwrap();
        assert_eq!(g.shapes["y"].dims(), [1, 1, 2, 2]);
    }

    #[test]
    fn maxpool_kernel_too_large() {
        let w = Window2D { kernel: [5, 5], strides: [1, 1], pads: [0; 4] };
        let err = single(Op::MaxPool2D(w), &[1, 1, 4, 4], vec![]).unwrap_err();
        assert!(matches!(err, Error::EmptyWindow { .. }));
    }

    #[test]
    fn gemm_inner_dimension_conflict() {
        let attrs = GemmAttrs { trans_b: true, ..Default::default() };
        let err = single(Op::Gemm(attrs), &[1, 80], vec![("w", &[40, 81])]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }), "{err}");
    }

    #[test]
    fn flatten_axes() {
        for (axis, want) in [(0, [1, 24]), (1, [2, 12]), (2, [6, 4]), (3, [24, 1]), (-1, [6, 4])] {
            let g = single(Op::Flatten { axis }, &[2, 3, 4], vec![]).unwrap();
            assert_eq!(g.shapes["y"].dims(), want, "axis {axis}");
        }
        assert!(single(Op::Flatten { axis: 4 }, &[2, 3, 4], vec![]).is_err());
    }

    #[test]
    fn add_broadcasts_bias() {
        let g = single(Op::Add, &[1, 4], vec![("b", &[4])]).unwrap();
        assert_eq!(g.shapes["y"].dims(), [1, 4]);
        assert!(single(Op::Add, &[1, 4], vec![("b", &[3])]).is_err());
    }

    #[test]
    fn idempotent() {
        let w = Window2D { kernel: [2, 2], strides: [1, 1], pads: [1, 1, 1, 1] };
        let g = single(Op::Conv2D(w), &[1, 2, 3, 3], vec![("k", &[2, 2, 2, 2]), ("b", &[2])]).unwrap();
        assert_eq!(g.shapes["y"].dims(), [1, 2, 4, 4]);
        assert_eq!(infer_shapes(&g).unwrap(), g);
    }
}
