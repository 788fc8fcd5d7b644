//! Neural IntErmediate Representation: a tensor-operation DAG holding
//! exact-rational weights, with shape inference and rewriting passes.

mod dump;
mod rewrite;
pub(crate) mod shape;
mod topo;

use std::collections::BTreeMap;
use std::fmt;

use crate::rational::Rational;

pub use dump::{dump, DUMP_FORMAT_VERSION};
pub use rewrite::{rewrite, RewriteRules};
pub use shape::{broadcast_shapes, infer_shapes};
pub use topo::{topo_order, topo_sort};

/// Concrete tensor dimensions, NCHW for 4-D tensors. All dims are >= 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorShape(Vec<usize>);

impl TensorShape {
    pub fn new(dims: Vec<usize>) -> Self {
        Self(dims)
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_valid(&self) -> bool {
        !self.0.is_empty() && self.0.iter().all(|&d| d >= 1)
    }

    /// Row-major multi-index of a flat offset.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut index = vec![0; self.0.len()];
        for (slot, &dim) in index.iter_mut().zip(&self.0).rev() {
            *slot = flat % dim;
            flat /= dim;
        }
        index
    }

    pub fn ravel(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.0).fold(0, |acc, (&i, &d)| acc * d + i)
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, "]")
    }
}

impl From<&[usize]> for TensorShape {
    fn from(dims: &[usize]) -> Self {
        Self(dims.to_vec())
    }
}

/// Dense row-major tensor of exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalTensor {
    shape: TensorShape,
    data: Vec<Rational>,
}

impl RationalTensor {
    /// Returns `None` when `data.len()` differs from the element count.
    pub fn new(shape: TensorShape, data: Vec<Rational>) -> Option<Self> {
        (shape.numel() == data.len()).then_some(Self { shape, data })
    }

    pub fn from_fn(shape: TensorShape, f: impl FnMut(usize) -> Rational) -> Self {
        let data = (0..shape.numel()).map(f).collect();
        Self { shape, data }
    }

    pub fn zeros(shape: TensorShape) -> Self {
        Self::from_fn(shape, |_| Rational::from_integer(0.into()))
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn data(&self) -> &[Rational] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Rational> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> &Rational {
        &self.data[self.shape.ravel(index)]
    }

    /// Same data under a new shape with equal element count.
    pub fn reshaped(self, shape: TensorShape) -> Option<Self> {
        Self::new(shape, self.data)
    }
}

/// Operator kinds admitted by the IR.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Gemm,
    MatMul,
    Add,
    Relu,
    Conv2D,
    MaxPool2D,
    Flatten,
    Constant,
    Identity,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GemmAttrs {
    pub alpha: Rational,
    pub beta: Rational,
    pub trans_b: bool,
}

impl Default for GemmAttrs {
    fn default() -> Self {
        Self {
            alpha: Rational::from_integer(1.into()),
            beta: Rational::from_integer(1.into()),
            trans_b: false,
        }
    }
}

/// Spatial attributes shared by Conv2D and MaxPool2D. Pads are ordered
/// `[top, left, bottom, right]` as in ONNX.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window2D {
    pub kernel: [usize; 2],
    pub strides: [usize; 2],
    pub pads: [usize; 4],
}

impl Window2D {
    /// Output extent along one spatial axis, `None` if the window does not fit.
    pub fn output_extent(&self, axis: usize, input: usize) -> Option<usize> {
        let padded = input + self.pads[axis] + self.pads[axis + 2];
        let k = self.kernel[axis];
        (padded >= k).then(|| (padded - k) / self.strides[axis] + 1)
    }
}

/// An operator together with its attributes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Gemm(GemmAttrs),
    MatMul,
    Add,
    Relu,
    /// Input channels and output channels come from the kernel tensor.
    Conv2D(Window2D),
    MaxPool2D(Window2D),
    /// Axis as written in the model; negative values count from the end.
    Flatten { axis: i64 },
    Constant(RationalTensor),
    Identity,
}

impl Op {
    pub fn kind(&self) -> OpKind {
        match self {
            Op::Gemm(_) => OpKind::Gemm,
            Op::MatMul => OpKind::MatMul,
            Op::Add => OpKind::Add,
            Op::Relu => OpKind::Relu,
            Op::Conv2D(_) => OpKind::Conv2D,
            Op::MaxPool2D(_) => OpKind::MaxPool2D,
            Op::Flatten { .. } => OpKind::Flatten,
            Op::Constant(_) => OpKind::Constant,
            Op::Identity => OpKind::Identity,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NierNode {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<String>,
    pub output: String,
}

impl NierNode {
    pub fn new(name: impl Into<String>, op: Op, inputs: &[&str], output: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            op,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            output: output.into(),
        }
    }
}

/// A named value with a declared shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueInfo {
    pub name: String,
    pub shape: TensorShape,
}

impl ValueInfo {
    pub fn new(name: impl Into<String>, dims: &[usize]) -> Self {
        Self { name: name.into(), shape: dims.into() }
    }
}

/// Tensor-operation DAG. `shapes` is filled by [`infer_shapes`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NierGraph {
    pub nodes: Vec<NierNode>,
    pub tensors: BTreeMap<String, RationalTensor>,
    pub inputs: Vec<ValueInfo>,
    pub outputs: Vec<ValueInfo>,
    pub shapes: BTreeMap<String, TensorShape>,
}

impl NierGraph {
    pub fn is_constant(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn is_graph_input(&self, name: &str) -> bool {
        self.inputs.iter().any(|v| v.name == name)
    }

    pub fn is_graph_output(&self, name: &str) -> bool {
        self.outputs.iter().any(|v| v.name == name)
    }

    /// Index of the node producing `name`, if any.
    pub fn producer(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.output == name)
    }

    pub fn shape_of(&self, name: &str) -> Option<&TensorShape> {
        self.shapes.get(name)
    }

    /// Every tensor name in the graph: inputs, initializers, node outputs.
    pub fn tensor_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.inputs.iter().map(|v| v.name.as_str()).collect();
        names.extend(self.tensors.keys().map(String::as_str));
        names.extend(self.nodes.iter().map(|n| n.output.as_str()));
        names
    }

    /// Number of nodes that read `name`, plus one if it is a graph output.
    pub fn use_count(&self, name: &str) -> usize {
        let reads: usize = self
            .nodes
            .iter()
            .map(|n| n.inputs.iter().filter(|i| *i == name).count())
            .sum();
        reads + usize::from(self.is_graph_output(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ravel_round_trip() {
        let shape = TensorShape::new(vec![2, 3, 4]);
        for flat in 0..shape.numel() {
            assert_eq!(shape.ravel(&shape.unravel(flat)), flat);
        }
        assert_eq!(shape.unravel(23), vec![1, 2, 3]);
    }

    #[test]
    fn tensor_length_checked() {
        let shape = TensorShape::new(vec![2, 2]);
        assert!(RationalTensor::new(shape.clone(), vec![]).is_none());
        assert_eq!(RationalTensor::zeros(shape).data().len(), 4);
    }

    #[test]
    fn window_extent() {
        let w = Window2D { kernel: [3, 3], strides: [1, 1], pads: [0; 4] };
        assert_eq!(w.output_extent(0, 9), Some(7));
        let w = Window2D { kernel: [2, 2], strides: [2, 2], pads: [0; 4] };
        assert_eq!(w.output_extent(1, 4), Some(2));
        let w = Window2D { kernel: [5, 5], strides: [1, 1], pads: [1, 0, 1, 0] };
        assert_eq!(w.output_extent(0, 2), None);
        assert_eq!(w.output_extent(0, 3), Some(1));
    }
}
