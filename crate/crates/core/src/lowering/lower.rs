use std::collections::{BTreeMap, HashMap};

use super::term::{max2, Expr, Formula};
use super::{element_name, input_prefix, intermediate_name, output_prefix, sanitize, ConstraintSystem, VarRole};
use crate::error::{Error, Result};
use crate::nier::{infer_shapes, NierGraph, NierNode, Op, RationalTensor, TensorShape, Window2D};
use crate::oracle::kernels::{broadcast_index, source_coord};

/// How constant tensors reach the formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightMode {
    /// One declared variable per weight element, pinned by an equality to
    /// its exact value. Products with activations are then nonlinear
    /// syntactically, so this needs QF_NRA.
    #[default]
    Declared,
    /// Weight values appear as literal coefficients.
    Inlined,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoweringOptions {
    pub weights: WeightMode,
}

/// A tensor as seen by the lowering: its shape and one atom (variable or
/// literal) per element.
#[derive(Clone, Copy, Debug)]
pub struct Operand<'a> {
    pub shape: &'a TensorShape,
    pub atoms: &'a [Expr],
}

/// `(ite (>= x 0) x 0)`.
pub fn lower_relu(x: Expr) -> Expr {
    Expr::Ite(Box::new(Formula::Ge(x.clone(), Expr::int(0))), Box::new(x), Box::new(Expr::int(0)))
}

/// Defining term of every output element of a 2-D convolution. Positions in
/// the padding contribute nothing.
pub fn lower_conv2d(
    node: &NierNode,
    input: Operand<'_>,
    kernel: Operand<'_>,
    bias: Option<Operand<'_>>,
) -> Result<Vec<Expr>> {
    let Op::Conv2D(w) = &node.op else {
        return Err(Error::UnsupportedAttribute { node: node.name.clone(), detail: "not a Conv2D node".into() });
    };
    let shapes: Vec<&TensorShape> = [Some(input.shape), Some(kernel.shape), bias.map(|b| b.shape)]
        .into_iter()
        .flatten()
        .collect();
    let out = crate::nier::shape::node_output_shape(node, &shapes)?;
    let xd = input.shape.dims();
    let (cin, h, wd) = (xd[1], xd[2], xd[3]);
    let terms = (0..out.numel())
        .map(|flat| {
            let idx = out.unravel(flat);
            let (n, co, oh, ow) = (idx[0], idx[1], idx[2], idx[3]);
            let mut terms = Vec::new();
            for ci in 0..cin {
                for kh in 0..w.kernel[0] {
                    let Some(ih) = source_coord(oh, kh, w.strides[0], w.pads[0], h) else { continue };
                    for kw in 0..w.kernel[1] {
                        let Some(iw) = source_coord(ow, kw, w.strides[1], w.pads[1], wd) else { continue };
                        let k = &kernel.atoms[kernel.shape.ravel(&[co, ci, kh, kw])];
                        let x = &input.atoms[input.shape.ravel(&[n, ci, ih, iw])];
                        terms.extend(Expr::product(x, k));
                    }
                }
            }
            if let Some(b) = bias {
                terms.push(b.atoms[co].clone());
            }
            Expr::sum(terms)
        })
        .collect();
    Ok(terms)
}

/// Maximum of `values` as a chain of conditionals: the first value that is
/// `>=` every later one is selected, scanning in the given order.
pub fn max_chain(values: &[Expr]) -> Option<Expr> {
    match values {
        [] => None,
        [only] => Some(only.clone()),
        [a, b] => Some(max2(a.clone(), b.clone())),
        [first, rest @ ..] => {
            let dominates = rest.iter().map(|v| Formula::Ge(first.clone(), v.clone())).collect();
            Some(Expr::Ite(
                Box::new(Formula::and(dominates)),
                Box::new(first.clone()),
                Box::new(max_chain(rest)?),
            ))
        }
    }
}

/// Defining term of every output element of a 2-D max pooling. Padded
/// positions are excluded from the window.
pub fn lower_maxpool(node: &NierNode, input: Operand<'_>) -> Result<Vec<Expr>> {
    let Op::MaxPool2D(w) = &node.op else {
        return Err(Error::UnsupportedAttribute { node: node.name.clone(), detail: "not a MaxPool2D node".into() });
    };
    let out = crate::nier::shape::node_output_shape(node, &[input.shape])?;
    let xd = input.shape.dims();
    (0..out.numel())
        .map(|flat| {
            let idx = out.unravel(flat);
            let window = window_atoms(w, &idx, xd, input);
            max_chain(&window).ok_or_else(|| Error::EmptyWindow { node: node.name.clone() })
        })
        .collect()
}

fn window_atoms(w: &Window2D, out_idx: &[usize], xd: &[usize], input: Operand<'_>) -> Vec<Expr> {
    let mut atoms = Vec::new();
    for kh in 0..w.kernel[0] {
        let Some(ih) = source_coord(out_idx[2], kh, w.strides[0], w.pads[0], xd[2]) else { continue };
        for kw in 0..w.kernel[1] {
            let Some(iw) = source_coord(out_idx[3], kw, w.strides[1], w.pads[1], xd[3]) else { continue };
            atoms.push(input.atoms[input.shape.ravel(&[out_idx[0], out_idx[1], ih, iw])].clone());
        }
    }
    atoms
}

fn lower_gemm(
    a: Operand<'_>,
    b: Operand<'_>,
    c: Option<Operand<'_>>,
    alpha: &crate::rational::Rational,
    beta: &crate::rational::Rational,
    trans_b: bool,
    out: &TensorShape,
) -> Vec<Expr> {
    let k = a.shape.dims()[1];
    let n = out.dims()[1];
    let alpha = Expr::Lit(alpha.clone());
    let beta = Expr::Lit(beta.clone());
    (0..out.numel())
        .map(|flat| {
            let (i, j) = (flat / n, flat % n);
            let products: Vec<Expr> = (0..k)
                .filter_map(|p| {
                    let w = if trans_b { b.shape.ravel(&[j, p]) } else { b.shape.ravel(&[p, j]) };
                    Expr::product(&a.atoms[a.shape.ravel(&[i, p])], &b.atoms[w])
                })
                .collect();
            let mut terms = if alpha == Expr::int(1) {
                products
            } else {
                Expr::product(&alpha, &Expr::sum(products)).into_iter().collect()
            };
            if let Some(c) = c {
                let bias = &c.atoms[broadcast_index(&out.unravel(flat), c.shape)];
                terms.extend(Expr::product(&beta, bias));
            }
            Expr::sum(terms)
        })
        .collect()
}

/// Lowers with declared weights, the layout of the hand-written QF_NRA
/// files this tool reproduces.
pub fn lower_graph(graph: &NierGraph) -> Result<ConstraintSystem> {
    lower_graph_with(graph, &LoweringOptions::default())
}

struct Lowering<'g> {
    graph: &'g NierGraph,
    opts: LoweringOptions,
    cs: ConstraintSystem,
    atoms: HashMap<String, Vec<Expr>>,
    weight_prefixes: BTreeMap<String, String>,
}

impl<'g> Lowering<'g> {
    fn shape(&self, name: &str) -> Result<&'g TensorShape> {
        self.graph.shapes.get(name).ok_or_else(|| Error::UnknownTensor(name.to_string()))
    }

    fn weight_prefix(&mut self, tensor: &str) -> String {
        if let Some(p) = self.weight_prefixes.get(tensor) {
            return p.clone();
        }
        let base = format!("w_{}", sanitize(tensor));
        let mut prefix = base.clone();
        let mut k = 1;
        while self.weight_prefixes.values().any(|p| p == &prefix) {
            prefix = format!("{base}.dup{k}");
            k += 1;
        }
        self.weight_prefixes.insert(tensor.to_string(), prefix.clone());
        prefix
    }

    fn materialize_constant(&mut self, name: &str, value: &RationalTensor) -> Result<Vec<Expr>> {
        match self.opts.weights {
            WeightMode::Inlined => Ok(value.data().iter().cloned().map(Expr::Lit).collect()),
            WeightMode::Declared => {
                let prefix = self.weight_prefix(name);
                value
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let var = format!("{prefix}_{i}");
                        self.cs.define(var.clone(), VarRole::Weight, Expr::Lit(v.clone()))?;
                        Ok(Expr::Var(var))
                    })
                    .collect()
            }
        }
    }

    fn operand_atoms(&mut self, name: &str) -> Result<()> {
        if self.atoms.contains_key(name) {
            return Ok(());
        }
        let value = self
            .graph
            .tensors
            .get(name)
            .ok_or_else(|| Error::UnknownTensor(name.to_string()))?;
        let atoms = self.materialize_constant(name, value)?;
        self.atoms.insert(name.to_string(), atoms);
        Ok(())
    }

    fn operand(&self, name: &str) -> Result<Operand<'_>> {
        Ok(Operand { shape: self.shape(name)?, atoms: &self.atoms[name] })
    }

    fn output_var_names(&self, node_index: usize, tensor: &str, numel: usize) -> Result<Vec<String>> {
        let shape = self.shape(tensor)?;
        Ok(match self.graph.outputs.iter().position(|o| o.name == tensor) {
            Some(k) => (0..numel).map(|i| element_name(&output_prefix(k), shape, i)).collect(),
            None => (0..numel).map(|i| intermediate_name(node_index, i)).collect(),
        })
    }

    fn node_terms(&mut self, node: &NierNode) -> Result<Vec<Expr>> {
        for input in &node.inputs {
            self.operand_atoms(input)?;
        }
        let out_shape = self.shape(&node.output)?;
        let args: Vec<Operand<'_>> = node.inputs.iter().map(|n| self.operand(n)).collect::<Result<_>>()?;
        Ok(match &node.op {
            Op::Identity | Op::Flatten { .. } => args[0].atoms.to_vec(),
            Op::Relu => args[0].atoms.iter().cloned().map(lower_relu).collect(),
            Op::Add => (0..out_shape.numel())
                .map(|flat| {
                    let idx = out_shape.unravel(flat);
                    Expr::sum(vec![
                        args[0].atoms[broadcast_index(&idx, args[0].shape)].clone(),
                        args[1].atoms[broadcast_index(&idx, args[1].shape)].clone(),
                    ])
                })
                .collect(),
            Op::MatMul => {
                let one = crate::rational::Rational::from_integer(1.into());
                lower_gemm(args[0], args[1], None, &one, &one, false, out_shape)
            }
            Op::Gemm(a) => lower_gemm(args[0], args[1], args.get(2).copied(), &a.alpha, &a.beta, a.trans_b, out_shape),
            Op::Conv2D(_) => lower_conv2d(node, args[0], args[1], args.get(2).copied())?,
            Op::MaxPool2D(_) => lower_maxpool(node, args[0])?,
            Op::Constant(t) => t.data().iter().cloned().map(Expr::Lit).collect(),
        })
    }
}

/// Lowers a shape-inferable graph to one Real variable per input, output
/// and intermediate element plus one defining equality per variable.
pub fn lower_graph_with(graph: &NierGraph, opts: &LoweringOptions) -> Result<ConstraintSystem> {
    let graph = infer_shapes(graph)?;
    let mut state = Lowering {
        graph: &graph,
        opts: *opts,
        cs: ConstraintSystem::new(""),
        atoms: HashMap::new(),
        weight_prefixes: BTreeMap::new(),
    };

    for (k, input) in graph.inputs.iter().enumerate() {
        let prefix = input_prefix(k);
        let atoms = (0..input.shape.numel())
            .map(|i| {
                let name = element_name(&prefix, &input.shape, i);
                state.cs.declare(name.clone(), VarRole::Input)?;
                Ok(Expr::Var(name))
            })
            .collect::<Result<Vec<_>>>()?;
        state.atoms.insert(input.name.clone(), atoms);
    }

    for (index, node) in graph.nodes.iter().enumerate() {
        let terms = match &node.op {
            Op::Constant(t) if !graph.is_graph_output(&node.output) => {
                let atoms = state.materialize_constant(&node.output, t)?;
                state.atoms.insert(node.output.clone(), atoms);
                continue;
            }
            _ => state.node_terms(node)?,
        };
        let names = state.output_var_names(index, &node.output, terms.len())?;
        let role = if graph.is_graph_output(&node.output) { VarRole::Output } else { VarRole::Intermediate };
        let mut atoms = Vec::with_capacity(terms.len());
        for (name, term) in names.into_iter().zip(terms) {
            state.cs.define(name.clone(), role, term)?;
            atoms.push(Expr::Var(name));
        }
        state.atoms.insert(node.output.clone(), atoms);
    }

    // Outputs wired straight to a graph input or an initializer.
    for (k, out) in graph.outputs.iter().enumerate() {
        if graph.producer(&out.name).is_some() {
            continue;
        }
        state.operand_atoms(&out.name)?;
        let src = state.atoms[&out.name].clone();
        for (i, atom) in src.into_iter().enumerate() {
            let name = element_name(&output_prefix(k), &out.shape, i);
            state.cs.define(name, VarRole::Output, atom)?;
        }
    }

    Ok(state.cs)
}
