use std::path::PathBuf;

use nnsmt::nier::{OpKind, RationalTensor};
use nnsmt::onnx::{parse_onnx, to_nier};
use nnsmt::oracle::eval_exact;
use nnsmt::rational::{float64_to_rational, Rational};
use nnsmt::Error;
use num_traits::ToPrimitive;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn load(name: &str) -> nnsmt::nier::NierGraph {
    let bytes = std::fs::read(fixture(name)).unwrap();
    to_nier(&parse_onnx(&bytes).unwrap()).unwrap()
}

fn r(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

#[derive(serde::Deserialize)]
struct Pass {
    input: Vec<f64>,
    output: Vec<f64>,
}

fn reference(key: &str) -> Vec<Pass> {
    let text = std::fs::read_to_string(fixture("reference.json")).unwrap();
    let mut all: std::collections::BTreeMap<String, Vec<Pass>> = serde_json::from_str(&text).unwrap();
    all.remove(key).unwrap()
}

fn check_against_torch(model: &str, key: &str) {
    let g = load(model);
    let shape = g.inputs[0].shape.clone();
    let passes = reference(key);
    assert_eq!(passes.len(), 8);
    for p in passes {
        let data = p.input.iter().map(|&v| float64_to_rational(v).unwrap()).collect();
        let (out, _) = eval_exact(&g, &RationalTensor::new(shape.clone(), data).unwrap()).unwrap();
        let got: Vec<f64> = out[0].data().iter().map(|v| v.to_f64().unwrap()).collect();
        assert_eq!(got.len(), p.output.len());
        for (a, b) in got.iter().zip(&p.output) {
            assert!((a - b).abs() <= 1e-4, "{model}: {a} vs {b}");
        }
    }
}

#[test]
fn fc_fixture_structure() {
    let bytes = std::fs::read(fixture("fc2_3x3.onnx")).unwrap();
    let raw = parse_onnx(&bytes).unwrap();
    assert_eq!(raw.opset, 13);
    let g = to_nier(&raw).unwrap();
    let ops: Vec<OpKind> = g.nodes.iter().map(|n| n.op.kind()).collect();
    assert_eq!(ops, [OpKind::Gemm, OpKind::Relu, OpKind::Gemm]);
    assert_eq!(g.tensors.len(), 4);
    assert_eq!(g.inputs[0].shape.dims(), &[1, 9][..]);
    assert_eq!(g.outputs[0].shape.dims(), &[1, 2][..]);
}

#[test]
fn fc_fixture_exact_on_zero_input() {
    let g = load("fc2_3x3.onnx");
    let input = RationalTensor::zeros(g.inputs[0].shape.clone());
    let (out, trace) = eval_exact(&g, &input).unwrap();
    let hidden = trace.get(&g.nodes[0].output).unwrap();
    assert_eq!(
        hidden.data(),
        &[r(-6529027, 33554432), r(4807221, 16777216), r(1247717, 8388608), r(5420971, 33554432)][..]
    );
    let d = 562949953421312;
    assert_eq!(out[0].data(), &[r(-201557643213031, d), r(1343025908527, d)][..]);
}

#[test]
fn fc_fixture_matches_torch() {
    check_against_torch("fc2_3x3.onnx", "fc2_3x3");
}

#[test]
fn conv_fixture_matches_torch() {
    let g = load("conv_4x4.onnx");
    let kinds: Vec<OpKind> = g.nodes.iter().map(|n| n.op.kind()).collect();
    assert!(kinds.contains(&OpKind::Conv2D) && kinds.contains(&OpKind::MaxPool2D));
    check_against_torch("conv_4x4.onnx", "conv_4x4");
}

#[test]
fn softmax_is_rejected_by_name() {
    let bytes = nnsmt::onnx::builder::ModelBuilder::new(13)
        .input("x", &[1, 2])
        .output("y", &[1, 2])
        .node("Softmax", "sm", &["x"], &["y"], vec![])
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
fn exported_fixture_reimports_identically() {
    for name in ["fc2_3x3.onnx", "conv_4x4.onnx"] {
        let g = load(name);
        let back = to_nier(&parse_onnx(&nnsmt::onnx::to_onnx(&g).unwrap()).unwrap()).unwrap();
        assert_eq!(back, g, "{name}");
    }
}
