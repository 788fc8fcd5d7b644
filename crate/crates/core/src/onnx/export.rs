//! Serialization of a NIER graph back to ONNX (opset 13).

use num_traits::ToPrimitive;
use prost::Message;

use super::builder::{attr_float, attr_int, attr_ints, attr_tensor, tensor_f32, tensor_f64, ModelBuilder};
use super::proto::{AttributeProto, TensorProto};
use crate::error::{Error, Result};
use crate::nier::{NierGraph, Op, RationalTensor, Window2D};
use crate::rational::{float32_to_rational, float64_to_rational, Rational};

pub const EXPORT_OPSET: i64 = 13;

fn as_f64(name: &str, v: &Rational) -> Result<f64> {
    let f = v.to_f64().filter(|f| f.is_finite());
    match f {
        Some(f) if float64_to_rational(f).ok().as_ref() == Some(v) => Ok(f),
        _ => Err(Error::UnrepresentableWeight(name.to_string())),
    }
}

fn as_f32(v: &Rational) -> Option<f32> {
    let f = v.to_f64()? as f32;
    (f.is_finite() && float32_to_rational(f).ok().as_ref() == Some(v)).then_some(f)
}

/// float32 when every value fits exactly, float64 otherwise.
fn tensor(name: &str, t: &RationalTensor) -> Result<TensorProto> {
    let dims = t.shape().dims();
    if let Some(values) = t.data().iter().map(as_f32).collect::<Option<Vec<_>>>() {
        return Ok(tensor_f32(name, dims, &values));
    }
    let values = t.data().iter().map(|v| as_f64(name, v)).collect::<Result<Vec<_>>>()?;
    Ok(tensor_f64(name, dims, &values))
}

fn float_attr(node: &str, name: &str, v: &Rational) -> Result<AttributeProto> {
    let f = as_f32(v).ok_or_else(|| Error::UnrepresentableWeight(format!("{node}.{name}")))?;
    Ok(attr_float(name, f))
}

fn window_attrs(w: &Window2D) -> Vec<AttributeProto> {
    let ints = |v: &[usize]| v.iter().map(|&x| x as i64).collect::<Vec<_>>();
    vec![
        attr_ints("kernel_shape", &ints(&w.kernel)),
        attr_ints("strides", &ints(&w.strides)),
        attr_ints("pads", &ints(&w.pads)),
    ]
}

/// Builds an ONNX model equivalent to `graph`. Values that are not exact
/// float32 or float64 numbers give `UnrepresentableWeight`.
pub fn to_onnx(graph: &NierGraph) -> Result<Vec<u8>> {
    let mut b = ModelBuilder::new(EXPORT_OPSET);
    for v in &graph.inputs {
        b = b.input(&v.name, v.shape.dims());
    }
    for v in &graph.outputs {
        b = b.output(&v.name, v.shape.dims());
    }
    for (name, t) in &graph.tensors {
        b.raw_initializer(tensor(name, t)?);
    }
    for n in &graph.nodes {
        let (op, attrs) = match &n.op {
            Op::Gemm(g) => (
                "Gemm",
                vec![
                    float_attr(&n.name, "alpha", &g.alpha)?,
                    float_attr(&n.name, "beta", &g.beta)?,
                    attr_int("transB", g.trans_b as i64),
                ],
            ),
            Op::MatMul => ("MatMul", vec![]),
            Op::Add => ("Add", vec![]),
            Op::Relu => ("Relu", vec![]),
            Op::Identity => ("Identity", vec![]),
            Op::Conv2D(w) => ("Conv", window_attrs(w)),
            Op::MaxPool2D(w) => ("MaxPool", window_attrs(w)),
            Op::Flatten { axis } => ("Flatten", vec![attr_int("axis", *axis)]),
            Op::Constant(t) => ("Constant", vec![attr_tensor("value", tensor(&n.output, t)?)]),
        };
        let inputs: Vec<&str> = n.inputs.iter().map(String::as_str).collect();
        b = b.node(op, &n.name, &inputs, &[n.output.as_str()], attrs);
    }
    Ok(b.model().encode_to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onnx::{parse_onnx, to_nier};

    #[test]
    fn non_dyadic_weight_is_rejected() {
        let mut g = crate::fixtures::zero_net(&crate::camus::SimulatorSpec::binary(2, 2));
        let (_, t) = g.tensors.iter_mut().next().unwrap();
        let shape = t.shape().clone();
        *t = RationalTensor::from_fn(shape, |_| Rational::new(1.into(), 3.into()));
        assert!(matches!(to_onnx(&g), Err(Error::UnrepresentableWeight(_))));
    }

    #[test]
    fn float64_fallback() {
        let mut g = crate::fixtures::zero_net(&crate::camus::SimulatorSpec::binary(2, 2));
        let (_, t) = g.tensors.iter_mut().next().unwrap();
        let shape = t.shape().clone();
        let tiny = float64_to_rational(1e-300).unwrap();
        *t = RationalTensor::from_fn(shape, |_| tiny.clone());
        let back = to_nier(&parse_onnx(&to_onnx(&g).unwrap()).unwrap()).unwrap();
        assert_eq!(back.tensors, g.tensors);
    }
}
