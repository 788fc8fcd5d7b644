use std::collections::BTreeMap;

use super::{OnnxSubsetModel, RawAttr, RawNode, RawTensor, RawValues};
use crate::error::{Error, Result};
use crate::nier::{infer_shapes, GemmAttrs, NierGraph, NierNode, Op, RationalTensor, TensorShape, ValueInfo, Window2D};
use crate::rational::{float32_to_rational, float64_to_rational, Rational};

fn unsupported(node: &RawNode, detail: impl Into<String>) -> Error {
    Error::UnsupportedAttribute { node: node.name.clone(), detail: detail.into() }
}

/// Converts raw values to exact rationals. A rank-0 tensor becomes `[1]`.
pub(crate) fn to_rational_tensor(t: &RawTensor) -> Result<RationalTensor> {
    let data = match &t.values {
        RawValues::F32(v) => v.iter().map(|&x| float32_to_rational(x)).collect::<Result<Vec<_>>>(),
        RawValues::F64(v) => v.iter().map(|&x| float64_to_rational(x)).collect::<Result<Vec<_>>>(),
    }
    .map_err(|_| Error::NonFiniteWeight(t.name.clone()))?;
    let dims = if t.dims.is_empty() { vec![1] } else { t.dims.clone() };
    RationalTensor::new(TensorShape::new(dims), data)
        .ok_or_else(|| Error::MalformedProtobuf(format!("tensor {:?} has the wrong element count", t.name)))
}

struct Attrs<'a> {
    node: &'a RawNode,
}

impl Attrs<'_> {
    fn get(&self, key: &str) -> Option<&RawAttr> {
        self.node.attributes.get(key)
    }

    fn int(&self, key: &str, default: i64) -> Result<i64> {
        match self.get(key) {
            None => Ok(default),
            Some(RawAttr::Int(v)) => Ok(*v),
            Some(_) => Err(unsupported(self.node, format!("{key} must be an integer"))),
        }
    }

    fn float(&self, key: &str, default: f32) -> Result<Rational> {
        let v = match self.get(key) {
            None => default,
            Some(RawAttr::Float(v)) => *v,
            Some(_) => return Err(unsupported(self.node, format!("{key} must be a float"))),
        };
        float32_to_rational(v).map_err(|_| unsupported(self.node, format!("{key} is not finite")))
    }

    fn ints(&self, key: &str) -> Result<Option<Vec<i64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(RawAttr::Ints(v)) => Ok(Some(v.clone())),
            Some(_) => Err(unsupported(self.node, format!("{key} must be a list of integers"))),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(RawAttr::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(unsupported(self.node, format!("{key} must be a string"))),
        }
    }

    /// Two positive integers.
    fn pair(&self, key: &str, default: [usize; 2]) -> Result<[usize; 2]> {
        match self.ints(key)? {
            None => Ok(default),
            Some(v) if v.len() == 2 && v.iter().all(|&x| x >= 1) => Ok([v[0] as usize, v[1] as usize]),
            Some(v) => Err(unsupported(self.node, format!("{key} = {v:?}, expected two positive integers"))),
        }
    }

    fn pads(&self) -> Result<[usize; 4]> {
        match self.ints("pads")? {
            None => Ok([0; 4]),
            Some(v) if v.len() == 4 && v.iter().all(|&x| x >= 0) => {
                Ok([v[0] as usize, v[1] as usize, v[2] as usize, v[3] as usize])
            }
            Some(v) => Err(unsupported(self.node, format!("pads = {v:?}, expected four non-negative integers"))),
        }
    }

    /// Rejects dilations other than 1 and `auto_pad` other than NOTSET or VALID.
    fn plain_window(&self) -> Result<()> {
        if let Some(d) = self.ints("dilations")? {
            if d.iter().any(|&x| x != 1) {
                return Err(unsupported(self.node, format!("dilations = {d:?}")));
            }
        }
        match self.string("auto_pad")?.as_deref() {
            None | Some("NOTSET") | Some("VALID") | Some("") => Ok(()),
            Some(other) => Err(unsupported(self.node, format!("auto_pad = {other}"))),
        }
    }
}

fn convert_node(node: &RawNode, weights: &BTreeMap<String, RationalTensor>) -> Result<Op> {
    let a = Attrs { node };
    let op = match node.op_type.as_str() {
        "Gemm" => {
            if a.int("transA", 0)? != 0 {
                return Err(unsupported(node, "transA = 1"));
            }
            Op::Gemm(GemmAttrs {
                alpha: a.float("alpha", 1.0)?,
                beta: a.float("beta", 1.0)?,
                trans_b: a.int("transB", 0)? != 0,
            })
        }
        "MatMul" => Op::MatMul,
        "Add" => Op::Add,
        "Relu" => Op::Relu,
        "Identity" => Op::Identity,
        "Flatten" => Op::Flatten { axis: a.int("axis", 1)? },
        "Conv" => {
            a.plain_window()?;
            if a.int("group", 1)? != 1 {
                return Err(unsupported(node, "group != 1"));
            }
            let from_weight = node
                .inputs
                .get(1)
                .and_then(|w| weights.get(w))
                .filter(|w| w.shape().rank() == 4)
                .map(|w| [w.shape().dims()[2], w.shape().dims()[3]]);
            let kernel = match (a.ints("kernel_shape")?, from_weight) {
                (Some(_), _) => a.pair("kernel_shape", [1, 1])?,
                (None, Some(k)) => k,
                (None, None) => return Err(unsupported(node, "kernel_shape is required for a non-constant kernel")),
            };
            Op::Conv2D(Window2D { kernel, strides: a.pair("strides", [1, 1])?, pads: a.pads()? })
        }
        "MaxPool" => {
            a.plain_window()?;
            if a.int("ceil_mode", 0)? != 0 {
                return Err(unsupported(node, "ceil_mode = 1"));
            }
            if node.outputs.iter().skip(1).any(|o| !o.is_empty()) {
                return Err(unsupported(node, "Indices output"));
            }
            if a.ints("kernel_shape")?.is_none() {
                return Err(unsupported(node, "kernel_shape is required"));
            }
            Op::MaxPool2D(Window2D {
                kernel: a.pair("kernel_shape", [1, 1])?,
                strides: a.pair("strides", [1, 1])?,
                pads: a.pads()?,
            })
        }
        "Constant" => {
            let value = if let Some(RawAttr::Tensor(t)) = a.get("value") {
                to_rational_tensor(t)?
            } else if let Some(RawAttr::Float(v)) = a.get("value_float") {
                let v = float32_to_rational(*v).map_err(|_| Error::NonFiniteWeight(node.name.clone()))?;
                RationalTensor::new(TensorShape::new(vec![1]), vec![v]).unwrap()
            } else if let Some(RawAttr::Floats(v)) = a.get("value_floats") {
                let data = v
                    .iter()
                    .map(|&x| float32_to_rational(x))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|_| Error::NonFiniteWeight(node.name.clone()))?;
                RationalTensor::new(TensorShape::new(vec![data.len().max(1)]), data)
                    .ok_or_else(|| unsupported(node, "empty value_floats"))?
            } else {
                return Err(unsupported(node, "Constant needs a float tensor value"));
            };
            Op::Constant(value)
        }
        other => return Err(Error::UnsupportedOperator { op: other.into(), node: node.name.clone() }),
    };
    if node.outputs.first().is_none_or(|o| o.is_empty()) {
        return Err(Error::MalformedProtobuf(format!("node {:?} has no output", node.name)));
    }
    if !matches!(op, Op::MaxPool2D(_)) && node.outputs.len() > 1 {
        return Err(unsupported(node, "more than one output"));
    }
    Ok(op)
}

/// Builds the NIER graph of a parsed model: attribute defaults resolved,
/// weights converted exactly, nodes topologically sorted and shapes
/// inferred.
pub fn to_nier(model: &OnnxSubsetModel) -> Result<NierGraph> {
    let mut graph = NierGraph::default();
    for t in &model.initializers {
        graph.tensors.insert(t.name.clone(), to_rational_tensor(t)?);
    }
    for v in &model.inputs {
        let dims = v.dims.clone().ok_or_else(|| Error::ShapeMismatch {
            node: v.name.clone(),
            expected: "a concrete input shape".into(),
            actual: "none".into(),
        })?;
        graph.inputs.push(ValueInfo::new(v.name.clone(), &dims));
    }
    for n in &model.nodes {
        let op = convert_node(n, &graph.tensors)?;
        graph.nodes.push(NierNode {
            name: n.name.clone(),
            op,
            inputs: n.inputs.clone(),
            output: n.outputs[0].clone(),
        });
    }

    // Outputs without a declared shape take the inferred one.
    let inferred = infer_shapes(&graph)?;
    for v in &model.outputs {
        let shape = match &v.dims {
            Some(d) => TensorShape::new(d.clone()),
            None => inferred.shape_of(&v.name).cloned().ok_or_else(|| Error::UnknownTensor(v.name.clone()))?,
        };
        graph.outputs.push(ValueInfo { name: v.name.clone(), shape });
    }
    infer_shapes(&graph)
}

#[cfg(test)]
mod tests {
    use super::super::builder::*;
    use super::super::parse_onnx;
    use super::*;

    fn conv_model(extra: Vec<crate::onnx::proto::AttributeProto>) -> Vec<u8> {
        ModelBuilder::new(13)
            .input("x", &[1, 1, 4, 4])
            .initializer("k", &[1, 1, 3, 3], &[1.0; 9])
            .node("Conv", "c", &["x", "k"], &["y"], extra)
            .untyped_output("y")
            .build()
    }

    #[test]
    fn conv_defaults_from_kernel() {
        let g = to_nier(&parse_onnx(&conv_model(vec![])).unwrap()).unwrap();
        match &g.nodes[0].op {
            Op::Conv2D(w) => {
                assert_eq!(w.kernel, [3, 3]);
                assert_eq!(w.strides, [1, 1]);
                assert_eq!(w.pads, [0; 4]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(g.outputs[0].shape.dims(), &[1, 1, 2, 2]);
    }

    #[test]
    fn conv_rejections() {
        for attr in [
            attr_int("group", 2),
            attr_ints("dilations", &[2, 2]),
            attr_string("auto_pad", "SAME_UPPER"),
        ] {
            let m = parse_onnx(&conv_model(vec![attr])).unwrap();
            assert!(matches!(to_nier(&m), Err(Error::UnsupportedAttribute { .. })));
        }
    }

    #[test]
    fn gemm_alpha_exact() {
        let bytes = ModelBuilder::new(11)
            .input("x", &[1, 2])
            .initializer("w", &[2, 2], &[1.0, 0.0, 0.0, 1.0])
            .node("Gemm", "g", &["x", "w"], &["y"], vec![attr_float("alpha", 0.1), attr_int("transB", 1)])
            .output("y", &[1, 2])
            .build();
        let g = to_nier(&parse_onnx(&bytes).unwrap()).unwrap();
        match &g.nodes[0].op {
            Op::Gemm(a) => {
                assert_eq!(a.alpha, Rational::new(13421773.into(), 134217728.into()));
                assert!(a.trans_b);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_finite_weight_rejected() {
        let bytes = ModelBuilder::new(13)
            .input("x", &[1, 2])
            .initializer("b", &[2], &[1.0, f32::NAN])
            .node("Add", "a", &["x", "b"], &["y"], vec![])
            .output("y", &[1, 2])
            .build();
        assert!(matches!(to_nier(&parse_onnx(&bytes).unwrap()), Err(Error::NonFiniteWeight(n)) if n == "b"));
    }

    #[test]
    fn maxpool_indices_rejected() {
        let bytes = ModelBuilder::new(13)
            .input("x", &[1, 1, 4, 4])
            .node("MaxPool", "p", &["x"], &["y", "idx"], vec![attr_ints("kernel_shape", &[2, 2])])
            .untyped_output("y")
            .build();
        assert!(matches!(to_nier(&parse_onnx(&bytes).unwrap()), Err(Error::UnsupportedAttribute { .. })));
    }

    #[test]
    fn constant_node_value() {
        let bytes = ModelBuilder::new(13)
            .input("x", &[1, 2])
            .node("Constant", "c", &[], &["b"], vec![attr_tensor("value", tensor_f64("", &[2], &[0.5, -2.0]))])
            .node("Add", "a", &["x", "b"], &["y"], vec![])
            .output("y", &[1, 2])
            .build();
        let g = to_nier(&parse_onnx(&bytes).unwrap()).unwrap();
        match &g.nodes[0].op {
            Op::Constant(t) => assert_eq!(t.data()[1], Rational::from_integer((-2).into())),
            other => panic!("{other:?}"),
        }
    }
}
