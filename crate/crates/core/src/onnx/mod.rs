//! ONNX ingest: decodes a serialized `ModelProto`, checks it against the
//! supported subset and converts it to a [`NierGraph`](crate::nier::NierGraph).
//!
//! Supported subset: opset 9 to 13 of the default domain; operators Gemm,
//! MatMul, Add, Relu, Conv (2-D), MaxPool (2-D), Flatten, Constant and
//! Identity; float32 or float64 initializers stored in `raw_data`,
//! `float_data` or `double_data`. A symbolic leading dimension is read as a
//! batch of one.

pub mod builder;
mod export;
mod convert;
pub mod proto;

use std::collections::{BTreeMap, HashSet};

use prost::Message;

pub use convert::to_nier;
pub use export::{to_onnx, EXPORT_OPSET};

use crate::error::{Error, Result};
use proto::{attribute_type, data_type};

pub const MIN_OPSET: i64 = 9;
pub const MAX_OPSET: i64 = 13;

pub const SUPPORTED_OPS: [&str; 9] =
    ["Gemm", "MatMul", "Add", "Relu", "Conv", "MaxPool", "Flatten", "Constant", "Identity"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    Float32,
    Float64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RawValues {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl RawValues {
    pub fn len(&self) -> usize {
        match self {
            RawValues::F32(v) => v.len(),
            RawValues::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            RawValues::F32(_) => Dtype::Float32,
            RawValues::F64(_) => Dtype::Float64,
        }
    }
}

/// An initializer or constant payload, decoded but not yet converted.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: RawValues,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RawAttr {
    Float(f32),
    Int(i64),
    String(String),
    Tensor(RawTensor),
    Floats(Vec<f32>),
    Ints(Vec<i64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawNode {
    pub name: String,
    pub op_type: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub attributes: BTreeMap<String, RawAttr>,
}

/// A graph input or output. `dims` is `None` when the model carries no
/// shape for it.
#[derive(Clone, Debug, PartialEq)]
pub struct RawValueInfo {
    pub name: String,
    pub dims: Option<Vec<usize>>,
}

/// A decoded model restricted to the supported subset.
#[derive(Clone, Debug, PartialEq)]
pub struct OnnxSubsetModel {
    pub opset: i64,
    pub nodes: Vec<RawNode>,
    pub initializers: Vec<RawTensor>,
    pub inputs: Vec<RawValueInfo>,
    pub outputs: Vec<RawValueInfo>,
}

/// Decodes `bytes` as an ONNX model and checks it against the subset.
pub fn parse_onnx(bytes: &[u8]) -> Result<OnnxSubsetModel> {
    if bytes.is_empty() {
        return Err(Error::MalformedProtobuf("empty input".into()));
    }
    let model = proto::ModelProto::decode(bytes).map_err(|e| Error::MalformedProtobuf(e.to_string()))?;
    let graph = model.graph.ok_or_else(|| Error::MalformedProtobuf("model has no graph".into()))?;
    let opset = default_opset(&model.opset_import)?;

    let initializers = graph.initializer.iter().map(decode_tensor).collect::<Result<Vec<_>>>()?;
    let init_names: HashSet<&str> = initializers.iter().map(|t| t.name.as_str()).collect();

    // Older exporters also list initializers among the graph inputs.
    let inputs = graph
        .input
        .iter()
        .filter(|v| !init_names.contains(v.name.as_deref().unwrap_or("")))
        .map(decode_value_info)
        .collect::<Result<Vec<_>>>()?;
    let outputs = graph.output.iter().map(decode_value_info).collect::<Result<Vec<_>>>()?;

    let mut known: HashSet<String> = inputs.iter().map(|v| v.name.clone()).collect();
    known.extend(init_names.iter().map(|s| s.to_string()));
    let mut nodes = Vec::with_capacity(graph.node.len());
    for (i, n) in graph.node.iter().enumerate() {
        let op_type = n.op_type.clone().unwrap_or_default();
        let name = match n.name.as_deref() {
            Some(s) if !s.is_empty() => s.to_string(),
            _ => format!("{op_type}_{i}"),
        };
        let domain = n.domain.as_deref().unwrap_or("");
        if !(domain.is_empty() || domain == "ai.onnx") || !SUPPORTED_OPS.contains(&op_type.as_str()) {
            return Err(Error::UnsupportedOperator { op: op_type, node: name });
        }
        let mut node_inputs = n.input.clone();
        while node_inputs.last().is_some_and(|s| s.is_empty()) {
            node_inputs.pop();
        }
        for input in &node_inputs {
            if input.is_empty() {
                return Err(Error::UnsupportedAttribute {
                    node: name.clone(),
                    detail: "omitted optional input".into(),
                });
            }
            if !known.contains(input) {
                return Err(Error::UnknownTensor(input.clone()));
            }
        }
        for output in &n.output {
            if !output.is_empty() && !known.insert(output.clone()) {
                return Err(Error::DuplicateTensor(output.clone()));
            }
        }
        let mut attributes = BTreeMap::new();
        for a in &n.attribute {
            let key = a.name.clone().unwrap_or_default();
            attributes.insert(key, decode_attr(a, &name)?);
        }
        nodes.push(RawNode { name, op_type, inputs: node_inputs, outputs: n.output.clone(), attributes });
    }
    for out in &outputs {
        if !known.contains(&out.name) {
            return Err(Error::UnknownTensor(out.name.clone()));
        }
    }

    Ok(OnnxSubsetModel { opset, nodes, initializers, inputs, outputs })
}

fn default_opset(imports: &[proto::OperatorSetIdProto]) -> Result<i64> {
    let version = imports
        .iter()
        .find(|o| matches!(o.domain.as_deref(), None | Some("") | Some("ai.onnx")))
        .and_then(|o| o.version)
        .ok_or_else(|| Error::MalformedProtobuf("no opset import for the default domain".into()))?;
    if !(MIN_OPSET..=MAX_OPSET).contains(&version) {
        return Err(Error::UnsupportedOpset(version));
    }
    Ok(version)
}

fn decode_dims(dims: &[i64], tensor: &str) -> Result<Vec<usize>> {
    dims.iter()
        .map(|&d| {
            usize::try_from(d)
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::MalformedProtobuf(format!("tensor {tensor:?} has dimension {d}")))
        })
        .collect()
}

fn decode_tensor(t: &proto::TensorProto) -> Result<RawTensor> {
    let name = t.name.clone().unwrap_or_default();
    if t.data_location == Some(1) {
        return Err(Error::MalformedProtobuf(format!("tensor {name:?} uses external data")));
    }
    let dims = decode_dims(&t.dims, &name)?;
    let dtype = t.data_type.unwrap_or(0);
    let values = match (dtype, &t.raw_data) {
        (data_type::FLOAT, Some(raw)) => RawValues::F32(
            raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
        ),
        (data_type::DOUBLE, Some(raw)) => RawValues::F64(
            raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        ),
        (data_type::FLOAT, None) => RawValues::F32(t.float_data.clone()),
        (data_type::DOUBLE, None) => RawValues::F64(t.double_data.clone()),
        _ => return Err(Error::UnsupportedDtype { tensor: name, dtype }),
    };
    let width = if dtype == data_type::FLOAT { 4 } else { 8 };
    if t.raw_data.as_ref().is_some_and(|r| r.len() % width != 0) {
        return Err(Error::MalformedProtobuf(format!("raw data of {name:?} is not a whole number of elements")));
    }
    let numel: usize = dims.iter().product();
    if values.len() != numel {
        return Err(Error::MalformedProtobuf(format!(
            "tensor {name:?} has {} values for {numel} elements",
            values.len()
        )));
    }
    Ok(RawTensor { name, dims, values })
}

fn decode_value_info(v: &proto::ValueInfoProto) -> Result<RawValueInfo> {
    let name = v.name.clone().unwrap_or_default();
    let Some(tensor_type) = v.r#type.as_ref().and_then(|t| t.tensor_type.as_ref()) else {
        return Ok(RawValueInfo { name, dims: None });
    };
    if let Some(elem) = tensor_type.elem_type {
        if elem != data_type::FLOAT && elem != data_type::DOUBLE {
            return Err(Error::UnsupportedDtype { tensor: name, dtype: elem });
        }
    }
    let Some(shape) = &tensor_type.shape else {
        return Ok(RawValueInfo { name, dims: None });
    };
    let mut dims = Vec::with_capacity(shape.dim.len());
    for (axis, d) in shape.dim.iter().enumerate() {
        match (d.dim_value, &d.dim_param) {
            (Some(v), _) if v > 0 => dims.push(v as usize),
            // Symbolic or missing batch axis.
            (_, _) if axis == 0 => dims.push(1),
            _ => return Ok(RawValueInfo { name, dims: None }),
        }
    }
    Ok(RawValueInfo { name, dims: Some(dims) })
}

fn decode_attr(a: &proto::AttributeProto, node: &str) -> Result<RawAttr> {
    let kind = a.r#type.unwrap_or_else(|| {
        // Some writers omit the type tag; infer it from the populated field.
        if a.t.is_some() {
            attribute_type::TENSOR
        } else if !a.ints.is_empty() {
            attribute_type::INTS
        } else if !a.floats.is_empty() {
            attribute_type::FLOATS
        } else if a.s.is_some() {
            attribute_type::STRING
        } else if a.f.is_some() {
            attribute_type::FLOAT
        } else {
            attribute_type::INT
        }
    });
    Ok(match kind {
        attribute_type::FLOAT => RawAttr::Float(a.f.unwrap_or(0.0)),
        attribute_type::INT => RawAttr::Int(a.i.unwrap_or(0)),
        attribute_type::STRING => RawAttr::String(String::from_utf8_lossy(a.s.as_deref().unwrap_or(&[])).into_owned()),
        attribute_type::TENSOR => {
            let t = a.t.as_ref().ok_or_else(|| Error::MalformedProtobuf(format!("attribute on {node:?} lacks its tensor")))?;
            RawAttr::Tensor(decode_tensor(t)?)
        }
        attribute_type::FLOATS => RawAttr::Floats(a.floats.clone()),
        attribute_type::INTS => RawAttr::Ints(a.ints.clone()),
        other => {
            return Err(Error::UnsupportedAttribute {
                node: node.to_string(),
                detail: format!("attribute {:?} has type {other}", a.name.as_deref().unwrap_or("")),
            })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::builder::ModelBuilder;
    use super::*;

    #[test]
    fn empty_and_garbage_rejected() {
        assert!(matches!(parse_onnx(&[]), Err(Error::MalformedProtobuf(_))));
        assert!(matches!(parse_onnx(&[0xff, 0xff, 0xff]), Err(Error::MalformedProtobuf(_))));
    }

    #[test]
    fn unsupported_op_named() {
        let bytes = ModelBuilder::new(13)
            .input("x", &[1, 2])
            .node("Softmax", "sm", &["x"], &["y"], vec![])
            .output("y", &[1, 2])
            .build();
        match parse_onnx(&bytes) {
            Err(Error::UnsupportedOperator { op, node }) => {
                assert_eq!(op, "Softmax");
                assert_eq!(node, "sm");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn opset_range() {
        for (v, ok) in [(8, false), (9, true), (13, true), (14, false)] {
            let bytes = ModelBuilder::new(v)
                .input("x", &[1, 2])
                .node("Relu", "r", &["x"], &["y"], vec![])
                .output("y", &[1, 2])
                .build();
            assert_eq!(parse_onnx(&bytes).is_ok(), ok, "opset {v}");
        }
    }

    #[test]
    fn int_initializer_rejected() {
        let mut b = ModelBuilder::new(13).input("x", &[1, 2]);
        b.raw_initializer(proto::TensorProto {
            name: Some("k".into()),
            dims: vec![2],
            data_type: Some(7),
            ..Default::default()
        });
        let bytes = b.node("Add", "a", &["x", "k"], &["y"], vec![]).output("y", &[1, 2]).build();
        assert!(matches!(parse_onnx(&bytes), Err(Error::UnsupportedDtype { dtype: 7, .. })));
    }

    #[test]
    fn payload_length_checked() {
        let mut b = ModelBuilder::new(13).input("x", &[1, 2]);
        b.raw_initializer(proto::TensorProto {
            name: Some("k".into()),
            dims: vec![2],
            data_type: Some(data_type::FLOAT),
            float_data: vec![1.0],
            ..Default::default()
        });
        let bytes = b.node("Add", "a", &["x", "k"], &["y"], vec![]).output("y", &[1, 2]).build();
        assert!(matches!(parse_onnx(&bytes), Err(Error::MalformedProtobuf(_))));
    }

    #[test]
    fn symbolic_batch_is_one() {
        let bytes = ModelBuilder::new(13)
            .symbolic_input("x", &[2])
            .node("Relu", "r", &["x"], &["y"], vec![])
            .output("y", &[1, 2])
            .build();
        let m = parse_onnx(&bytes).unwrap();
        assert_eq!(m.inputs[0].dims, Some(vec![1, 2]));
    }
}
