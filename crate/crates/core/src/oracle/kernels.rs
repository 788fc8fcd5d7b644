//! Exact reference kernels, one per operator.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::nier::shape::{flatten_axis, node_output_shape};
use crate::nier::{GemmAttrs, NierNode, Op, RationalTensor, TensorShape, Window2D};
use crate::rational::Rational;

/// Evaluates one node on concrete inputs.
pub(crate) fn eval_node(node: &NierNode, inputs: &[&RationalTensor]) -> Result<RationalTensor> {
    let shapes: Vec<&TensorShape> = inputs.iter().map(|t| t.shape()).collect();
    let out_shape = node_output_shape(node, &shapes)?;
    let out = match &node.op {
        Op::Identity => inputs[0].clone(),
        Op::Constant(t) => t.clone(),
        Op::Relu => RationalTensor::from_fn(out_shape, |i| relu(&inputs[0].data()[i])),
        Op::Add => add(inputs[0], inputs[1], out_shape),
        Op::MatMul => gemm(inputs[0], inputs[1], None, &GemmAttrs::default(), out_shape),
        Op::Gemm(attrs) => gemm(inputs[0], inputs[1], inputs.get(2).copied(), attrs, out_shape),
        Op::Conv2D(w) => conv2d(inputs[0], inputs[1], inputs.get(2).copied(), w, out_shape),
        Op::MaxPool2D(w) => maxpool2d(node, inputs[0], w, out_shape)?,
        Op::Flatten { axis } => {
            debug_assert!(flatten_axis(*axis, inputs[0].shape().rank()).is_some());
            inputs[0].clone().reshaped(out_shape).expect("flatten preserves numel")
        }
    };
    Ok(out)
}

pub(crate) fn relu(x: &Rational) -> Rational {
    if x.is_negative() {
        Rational::zero()
    } else {
        x.clone()
    }
}

/// Maps an output multi-index onto a broadcast operand.
pub(crate) fn broadcast_index(out_index: &[usize], operand: &TensorShape) -> usize {
    let offset = out_index.len() - operand.rank();
    let idx: Vec<usize> = operand
        .dims()
        .iter()
        .enumerate()
        .map(|(axis, &d)| if d == 1 { 0 } else { out_index[offset + axis] })
        .collect();
    operand.ravel(&idx)
}

fn add(a: &RationalTensor, b: &RationalTensor, out: TensorShape) -> RationalTensor {
    let shape = out.clone();
    RationalTensor::from_fn(out, |flat| {
        let idx = shape.unravel(flat);
        &a.data()[broadcast_index(&idx, a.shape())] + &b.data()[broadcast_index(&idx, b.shape())]
    })
}

fn gemm(
    a: &RationalTensor,
    b: &RationalTensor,
    c: Option<&RationalTensor>,
    attrs: &GemmAttrs,
    out: TensorShape,
) -> RationalTensor {
    let k = a.shape().dims()[1];
    let n = out.dims()[1];
    let shape = out.clone();
    RationalTensor::from_fn(out, |flat| {
        let (i, j) = (flat / n, flat % n);
        let mut acc = Rational::zero();
        for p in 0..k {
            let w = if attrs.trans_b { b.get(&[j, p]) } else { b.get(&[p, j]) };
            acc += a.get(&[i, p]) * w;
        }
        acc *= &attrs.alpha;
        if let Some(c) = c {
            let bias = &c.data()[broadcast_index(&shape.unravel(flat), c.shape())];
            acc += &attrs.beta * bias;
        }
        acc
    })
}

/// Input coordinate read by output position `o`, kernel offset `k`;
/// `None` when it lands in padding.
pub(crate) fn source_coord(o: usize, k: usize, stride: usize, pad: usize, extent: usize) -> Option<usize> {
    (o * stride + k).checked_sub(pad).filter(|&i| i < extent)
}

fn conv2d(
    x: &RationalTensor,
    kernel: &RationalTensor,
    bias: Option<&RationalTensor>,
    w: &Window2D,
    out: TensorShape,
) -> RationalTensor {
    let xd = x.shape().dims();
    let (cin, h, wd) = (xd[1], xd[2], xd[3]);
    let shape = out.clone();
    RationalTensor::from_fn(out, |flat| {
        let idx = shape.unravel(flat);
        let (n, co, oh, ow) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = bias.map(|b| b.data()[co].clone()).unwrap_or_else(Rational::zero);
        for ci in 0..cin {
            for kh in 0..w.kernel[0] {
                let Some(ih) = source_coord(oh, kh, w.strides[0], w.pads[0], h) else { continue };
                for kw in 0..w.kernel[1] {
                    let Some(iw) = source_coord(ow, kw, w.strides[1], w.pads[1], wd) else { continue };
                    acc += kernel.get(&[co, ci, kh, kw]) * x.get(&[n, ci, ih, iw]);
                }
            }
        }
        acc
    })
}

fn maxpool2d(node: &NierNode, x: &RationalTensor, w: &Window2D, out: TensorShape) -> Result<RationalTensor> {
    let xd = x.shape().dims();
    let (h, wd) = (xd[2], xd[3]);
    let shape = out.clone();
    let data = (0..out.numel())
        .map(|flat| {
            let idx = shape.unravel(flat);
            let mut best: Option<&Rational> = None;
            for kh in 0..w.kernel[0] {
                let Some(ih) = source_coord(idx[2], kh, w.strides[0], w.pads[0], h) else { continue };
                for kw in 0..w.kernel[1] {
                    let Some(iw) = source_coord(idx[3], kw, w.strides[1], w.pads[1], wd) else { continue };
                    let v = x.get(&[idx[0], idx[1], ih, iw]);
                    if best.is_none_or(|b| v > b) {
                        best = Some(v);
                    }
                }
            }
            best.cloned().ok_or_else(|| Error::EmptyWindow { node: node.name.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RationalTensor::new(out, data).expect("numel matches"))
}
