//! Programmatic construction of small ONNX models, for tests and fixtures.

use prost::Message;

use super::proto::{
    attribute_type, data_type, AttributeProto, Dimension, GraphProto, ModelProto, NodeProto, OperatorSetIdProto,
    TensorProto, TensorShapeProto, TypeProto, TypeProtoTensor, ValueInfoProto,
};

#[derive(Clone, Debug, Default)]
pub struct ModelBuilder {
    opset: i64,
    graph: GraphProto,
}

fn value_info(name: &str, dims: Vec<Dimension>) -> ValueInfoProto {
    ValueInfoProto {
        name: Some(name.into()),
        r#type: Some(TypeProto {
            tensor_type: Some(TypeProtoTensor {
                elem_type: Some(data_type::FLOAT),
                shape: Some(TensorShapeProto { dim: dims }),
            }),
        }),
    }
}

fn fixed(dims: &[usize]) -> Vec<Dimension> {
    dims.iter()
        .map(|&d| Dimension { dim_value: Some(d as i64), dim_param: None })
        .collect()
}

/// Float32 tensor stored as little-endian `raw_data`.
pub fn tensor_f32(name: &str, dims: &[usize], values: &[f32]) -> TensorProto {
    TensorProto {
        name: Some(name.into()),
        dims: dims.iter().map(|&d| d as i64).collect(),
        data_type: Some(data_type::FLOAT),
        raw_data: Some(values.iter().flat_map(|v| v.to_le_bytes()).collect()),
        ..Default::default()
    }
}

pub fn tensor_f64(name: &str, dims: &[usize], values: &[f64]) -> TensorProto {
    TensorProto {
        name: Some(name.into()),
        dims: dims.iter().map(|&d| d as i64).collect(),
        data_type: Some(data_type::DOUBLE),
        double_data: values.to_vec(),
        ..Default::default()
    }
}

pub fn attr_int(name: &str, v: i64) -> AttributeProto {
    AttributeProto { name: Some(name.into()), i: Some(v), r#type: Some(attribute_type::INT), ..Default::default() }
}

pub fn attr_float(name: &str, v: f32) -> AttributeProto {
    AttributeProto { name: Some(name.into()), f: Some(v), r#type: Some(attribute_type::FLOAT), ..Default::default() }
}

pub fn attr_ints(name: &str, v: &[i64]) -> AttributeProto {
    AttributeProto {
        name: Some(name.into()),
        ints: v.to_vec(),
        r#type: Some(attribute_type::INTS),
        ..Default::default()
    }
}

pub fn attr_string(name: &str, v: &str) -> AttributeProto {
    AttributeProto {
        name: Some(name.into()),
        s: Some(v.as_bytes().to_vec()),
        r#type: Some(attribute_type::STRING),
        ..Default::default()
    }
}

pub fn attr_tensor(name: &str, t: TensorProto) -> AttributeProto {
    AttributeProto { name: Some(name.into()), t: Some(t), r#type: Some(attribute_type::TENSOR), ..Default::default() }
}

impl ModelBuilder {
    pub fn new(opset: i64) -> Self {
        Self { opset, graph: GraphProto { name: Some("g".into()), ..Default::default() } }
    }

    pub fn input(mut self, name: &str, dims: &[usize]) -> Self {
        self.graph.input.push(value_info(name, fixed(dims)));
        self
    }

    /// Input with a symbolic leading batch axis followed by `dims`.
    pub fn symbolic_input(mut self, name: &str, dims: &[usize]) -> Self {
        let mut all = vec![Dimension { dim_value: None, dim_param: Some("N".into()) }];
        all.extend(fixed(dims));
        self.graph.input.push(value_info(name, all));
        self
    }

    pub fn output(mut self, name: &str, dims: &[usize]) -> Self {
        self.graph.output.push(value_info(name, fixed(dims)));
        self
    }

    /// Output without shape information.
    pub fn untyped_output(mut self, name: &str) -> Self {
        self.graph.output.push(ValueInfoProto { name: Some(name.into()), r#type: None });
        self
    }

    pub fn initializer(mut self, name: &str, dims: &[usize], values: &[f32]) -> Self {
        self.graph.initializer.push(tensor_f32(name, dims, values));
        self
    }

    pub fn raw_initializer(&mut self, t: TensorProto) {
        self.graph.initializer.push(t);
    }

    pub fn node(
        mut self,
        op_type: &str,
        name: &str,
        inputs: &[&str],
        outputs: &[&str],
        attributes: Vec<AttributeProto>,
    ) -> Self {
        self.graph.node.push(NodeProto {
            input: inputs.iter().map(|s| s.to_string()).collect(),
            output: outputs.iter().map(|s| s.to_string()).collect(),
            name: Some(name.into()),
            op_type: Some(op_type.into()),
            attribute: attributes,
            domain: None,
        });
        self
    }

    pub fn model(self) -> ModelProto {
        ModelProto {
            ir_version: Some(7),
            producer_name: Some("nnsmt".into()),
            graph: Some(self.graph),
            opset_import: vec![OperatorSetIdProto { domain: Some(String::new()), version: Some(self.opset) }],
        }
    }

    pub fn build(self) -> Vec<u8> {
        self.model().encode_to_vec()
    }
}
