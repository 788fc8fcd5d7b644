//! Line-oriented debug dump used by golden-file tests.
//!
//! ```text
//! nier-dump v1
//! input <name> <shape>
//! tensor <name> <shape> fnv=<16 hex digits>
//! node <index> <name> <op>(<attrs>) in=[<a>, <b>] out=<name> shape=<shape>
//! output <name> <shape>
//! ```
//!
//! Tensor values are summarized by an FNV-1a hash over their `n/d`
//! renderings. Shapes of node outputs print as `?` before inference.

use std::fmt::Write;

use super::{NierGraph, Op, RationalTensor};
use crate::rational::display;

pub const DUMP_FORMAT_VERSION: u32 = 1;

fn fnv1a(t: &RationalTensor) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in t.data() {
        for b in display(v).bytes().chain(std::iter::once(b',')) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

fn op_text(op: &Op) -> String {
    match op {
        Op::Gemm(a) => format!(
            "Gemm(alpha={}, beta={}, transB={})",
            display(&a.alpha),
            display(&a.beta),
            u8::from(a.trans_b)
        ),
        Op::Conv2D(w) | Op::MaxPool2D(w) => format!(
            "{}(kernel={}x{}, strides={:?}, pads={:?})",
            op.kind(),
            w.kernel[0],
            w.kernel[1],
            w.strides,
            w.pads
        ),
        Op::Flatten { axis } => format!("Flatten(axis={axis})"),
        Op::Constant(t) => format!("Constant({} fnv={:016x})", t.shape(), fnv1a(t)),
        _ => format!("{}()", op.kind()),
    }
}

/// Renders the graph, one item per line, in stored node order.
pub fn dump(graph: &NierGraph) -> String {
    let mut out = format!("nier-dump v{DUMP_FORMAT_VERSION}\n");
    for v in &graph.inputs {
        let _ = writeln!(out, "input {} {}", v.name, v.shape);
    }
    for (name, t) in &graph.tensors {
        let _ = writeln!(out, "tensor {} {} fnv={:016x}", name, t.shape(), fnv1a(t));
    }
    for (i, n) in graph.nodes.iter().enumerate() {
        let shape = graph
            .shapes
            .get(&n.output)
            .map_or_else(|| "?".to_string(), ToString::to_string);
        let _ = writeln!(
            out,
            "node {i} {} {} in=[{}] out={} shape={shape}",
            n.name,
            op_text(&n.op),
            n.inputs.join(", "),
            n.output,
        );
    }
    for v in &graph.outputs {
        let _ = writeln!(out, "output {} {}", v.name, v.shape);
    }
    out
}
