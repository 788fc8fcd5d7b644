//! Small networks with known behaviour, for tests, benchmarks and the
//! command-line demo.
//!
//! The alert networks take a `[1, 1, h, w]` image and return two logits
//! `[no_alert, alert]`.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camus::{Region, SimulatorSpec};
use crate::nier::{
    infer_shapes, GemmAttrs, NierGraph, NierNode, Op, RationalTensor, TensorShape, ValueInfo, Window2D,
};
use crate::rational::Rational;

pub fn r(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn tensor(dims: &[usize], data: Vec<Rational>) -> RationalTensor {
    RationalTensor::new(TensorShape::new(dims.to_vec()), data).expect("fixture tensor length")
}

fn finish(g: NierGraph) -> NierGraph {
    infer_shapes(&g).expect("fixture graph is well formed")
}

/// Flatten followed by one Gemm with `W = [no_alert_row; alert_row]`
/// (stored transposed, as exporters do) and bias `[no_alert_bias, 0]`.
fn linear_alert_net(sim: &SimulatorSpec, alert_row: Vec<Rational>, no_alert_bias: Rational) -> NierGraph {
    let n = sim.pixels();
    let mut w = vec![Rational::zero(); n];
    w.extend(alert_row);
    let mut g = NierGraph::default();
    g.inputs.push(ValueInfo::new("image", &[1, 1, sim.height, sim.width]));
    g.tensors.insert("fc.weight".into(), tensor(&[2, n], w));
    g.tensors.insert("fc.bias".into(), tensor(&[2], vec![no_alert_bias, Rational::zero()]));
    g.nodes.push(NierNode::new("flatten", Op::Flatten { axis: 1 }, &["image"], "flat"));
    let attrs = GemmAttrs { trans_b: true, ..Default::default() };
    g.nodes.push(NierNode::new("fc", Op::Gemm(attrs), &["flat", "fc.weight", "fc.bias"], "logits"));
    g.outputs.push(ValueInfo::new("logits", &[1, 2]));
    finish(g)
}

fn zone_row(sim: &SimulatorSpec, zone: &Region, weight: impl Fn(usize) -> Rational) -> Vec<Rational> {
    (0..sim.pixels())
        .map(|i| {
            let (h, w) = sim.coords(i);
            if zone.contains(h, w) {
                weight(i)
            } else {
                Rational::zero()
            }
        })
        .collect()
}

/// Alerts iff some pixel of `zone` is set: alert logit is the zone sum,
/// no-alert logit is 1/2. Correct for both alert properties on `{0, 1}`
/// pixels.
pub fn correct_alert_net(sim: &SimulatorSpec, zone: &Region) -> NierGraph {
    linear_alert_net(sim, zone_row(sim, zone, |_| Rational::one()), r(1, 2))
}

/// All weights and biases zero: both logits are 0, so it never alerts.
pub fn zero_net(sim: &SimulatorSpec) -> NierGraph {
    linear_alert_net(sim, vec![Rational::zero(); sim.pixels()], Rational::zero())
}

/// Like [`correct_alert_net`] but blind to the last pixel of the zone.
pub fn missed_pixel_net(sim: &SimulatorSpec, zone: &Region) -> NierGraph {
    let last = zone.pixels(sim).last().copied();
    linear_alert_net(
        sim,
        zone_row(sim, zone, |i| if Some(i) == last { Rational::zero() } else { Rational::one() }),
        r(1, 2),
    )
}

/// Like [`correct_alert_net`] but pixel `(0, 0)` also raises the alert.
pub fn false_alarm_net(sim: &SimulatorSpec, zone: &Region) -> NierGraph {
    let mut row = zone_row(sim, zone, |_| Rational::one());
    row[0] = Rational::one();
    linear_alert_net(sim, row, r(1, 2))
}

/// Always alerts: constant logits `[0, 1]`.
pub fn always_alert_net(sim: &SimulatorSpec) -> NierGraph {
    let n = sim.pixels();
    let mut g = linear_alert_net(sim, vec![Rational::zero(); n], Rational::zero());
    g.tensors.insert("fc.bias".into(), tensor(&[2], vec![Rational::zero(), Rational::one()]));
    g
}

/// Alert network using the convolutional operators: a 2x2 all-ones
/// convolution (pads 1 on the bottom and right), ReLU, 2x2 max pooling with
/// stride 1, then the zone sum as in [`correct_alert_net`] taken over the
/// pooled map. Correct for the alert properties whenever `zone` spans
/// whole rows down to the bottom edge.
pub fn conv_alert_net(sim: &SimulatorSpec, zone: &Region) -> NierGraph {
    let (h, w) = (sim.height, sim.width);
    let mut g = NierGraph::default();
    g.inputs.push(ValueInfo::new("image", &[1, 1, h, w]));
    g.tensors.insert("conv.weight".into(), tensor(&[1, 1, 2, 2], vec![Rational::one(); 4]));
    g.tensors.insert("conv.bias".into(), tensor(&[1], vec![Rational::zero()]));
    let conv = Window2D { kernel: [2, 2], strides: [1, 1], pads: [0, 0, 1, 1] };
    let pool = Window2D { kernel: [2, 2], strides: [1, 1], pads: [0, 0, 1, 1] };
    g.nodes.push(NierNode::new("conv", Op::Conv2D(conv), &["image", "conv.weight", "conv.bias"], "c"));
    g.nodes.push(NierNode::new("relu", Op::Relu, &["c"], "r"));
    g.nodes.push(NierNode::new("pool", Op::MaxPool2D(pool), &["r"], "p"));
    g.nodes.push(NierNode::new("flatten", Op::Flatten { axis: 1 }, &["p"], "flat"));
    // The pooled cell (i, j) sees pixels (i..=i+2, j..=j+2); only cells on
    // the zone's rows can reach the zone without reaching above it.
    let mut wts = vec![Rational::zero(); h * w];
    wts.extend(zone_row(sim, zone, |_| Rational::one()));
    g.tensors.insert("fc.weight".into(), tensor(&[2, h * w], wts));
    g.tensors.insert("fc.bias".into(), tensor(&[2], vec![r(1, 2), Rational::zero()]));
    let attrs = GemmAttrs { trans_b: true, ..Default::default() };
    g.nodes.push(NierNode::new("fc", Op::Gemm(attrs), &["flat", "fc.weight", "fc.bias"], "logits"));
    g.outputs.push(ValueInfo::new("logits", &[1, 2]));
    finish(g)
}

/// Reconstruction network `out = W x` with `W` the identity, except that
/// the diagonal entry of pixel `perturbed` (if any) is 1/2.
pub fn identity_net(sim: &SimulatorSpec, perturbed: Option<usize>) -> NierGraph {
    let n = sim.pixels();
    let w = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            match (i == j, Some(i) == perturbed) {
                (true, true) => r(1, 2),
                (true, false) => Rational::one(),
                _ => Rational::zero(),
            }
        })
        .collect();
    let mut g = NierGraph::default();
    g.inputs.push(ValueInfo::new("image", &[1, n]));
    g.tensors.insert("rec.weight".into(), tensor(&[n, n], w));
    g.nodes.push(NierNode::new("rec", Op::MatMul, &["image", "rec.weight"], "params"));
    g.outputs.push(ValueInfo::new("params", &[1, n]));
    finish(g)
}

/// Random dyadic weight `k/8` with `|k| <= 8`.
fn dyadic(rng: &mut ChaCha8Rng) -> Rational {
    r(rng.gen_range(-8..=8), 8)
}

fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> RationalTensor {
    let n = dims.iter().product();
    tensor(dims, (0..n).map(|_| dyadic(rng)).collect())
}

/// The toy perception architecture with random weights: Flatten, then
/// fully connected layers of `h*w/2` and `h*w/4` ReLU units (at least one
/// each) and a two-logit head.
pub fn random_mlp(sim: &SimulatorSpec, seed: u64) -> NierGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sim.pixels();
    let sizes = [n, (n / 2).max(1), (n / 4).max(1), 2];
    let mut g = NierGraph::default();
    g.inputs.push(ValueInfo::new("image", &[1, 1, sim.height, sim.width]));
    g.nodes.push(NierNode::new("flatten", Op::Flatten { axis: 1 }, &["image"], "x0"));
    let mut prev = "x0".to_string();
    for layer in 0..3 {
        let (fan_in, fan_out) = (sizes[layer], sizes[layer + 1]);
        let w = format!("l_{}.weight", layer + 1);
        let b = format!("l_{}.bias", layer + 1);
        g.tensors.insert(w.clone(), random_tensor(&mut rng, &[fan_out, fan_in]));
        g.tensors.insert(b.clone(), random_tensor(&mut rng, &[fan_out]));
        let out = if layer == 2 { "logits".to_string() } else { format!("z{}", layer + 1) };
        let attrs = GemmAttrs { trans_b: true, ..Default::default() };
        g.nodes.push(NierNode::new(format!("fc{}", layer + 1), Op::Gemm(attrs), &[&prev, &w, &b], out.clone()));
        prev = out;
        if layer < 2 {
            let act = format!("x{}", layer + 1);
            g.nodes.push(NierNode::new(format!("relu{}", layer + 1), Op::Relu, &[&prev], act.clone()));
            prev = act;
        }
    }
    g.outputs.push(ValueInfo::new("logits", &[1, 2]));
    finish(g)
}

/// A random well-formed graph touching every operator, for property tests.
/// Inputs are `[1, c, h, w]` with `c <= 2` and `h, w` in `2..=4`.
pub fn random_graph(seed: u64) -> NierGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = rng.gen_range(1..=2);
    let (mut h, mut w) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
    let mut g = NierGraph::default();
    g.inputs.push(ValueInfo::new("x", &[1, c, h, w]));
    let mut prev = "x".to_string();
    let mut channels = c;
    let mut counter = 0;
    let mut fresh = |stem: &str| {
        counter += 1;
        format!("{stem}{counter}")
    };

    if rng.gen_bool(0.3) {
        let out = fresh("id");
        g.nodes.push(NierNode::new(fresh("identity"), Op::Identity, &[&prev], out.clone()));
        prev = out;
    }
    if rng.gen_bool(0.7) {
        let k = [rng.gen_range(1..=h.min(3)), rng.gen_range(1..=w.min(3))];
        let pads = [0, 0, 0, 0].map(|_: usize| rng.gen_range(0..=1));
        let strides = [rng.gen_range(1..=2), rng.gen_range(1..=2)];
        let window = Window2D { kernel: k, strides, pads };
        let out_c = rng.gen_range(1..=2);
        let kname = fresh("conv.weight");
        g.tensors.insert(kname.clone(), random_tensor(&mut rng, &[out_c, channels, k[0], k[1]]));
        let mut inputs = vec![prev.clone(), kname];
        if rng.gen_bool(0.5) {
            let bname = fresh("conv.bias");
            g.tensors.insert(bname.clone(), random_tensor(&mut rng, &[out_c]));
            inputs.push(bname);
        }
        let out = fresh("conv");
        h = window.output_extent(0, h).unwrap();
        w = window.output_extent(1, w).unwrap();
        let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
        g.nodes.push(NierNode::new(fresh("conv"), Op::Conv2D(window), &refs, out.clone()));
        prev = out;
        channels = out_c;
        if rng.gen_bool(0.7) {
            let out = fresh("relu");
            g.nodes.push(NierNode::new(fresh("relu"), Op::Relu, &[&prev], out.clone()));
            prev = out;
        }
    }
    if rng.gen_bool(0.6) && h >= 1 && w >= 1 {
        let k = [rng.gen_range(1..=h.min(2)), rng.gen_range(1..=w.min(2))];
        let pads = [k[0], k[1], k[0], k[1]].map(|kk| if kk > 1 { rng.gen_range(0..kk) } else { 0 });
        let strides = [rng.gen_range(1..=2), rng.gen_range(1..=2)];
        let window = Window2D { kernel: k, strides, pads };
        h = window.output_extent(0, h).unwrap();
        w = window.output_extent(1, w).unwrap();
        let out = fresh("pool");
        g.nodes.push(NierNode::new(fresh("pool"), Op::MaxPool2D(window), &[&prev], out.clone()));
        prev = out;
    }
    let out = fresh("flat");
    g.nodes.push(NierNode::new(fresh("flatten"), Op::Flatten { axis: 1 }, &[&prev], out.clone()));
    prev = out;
    if rng.gen_bool(0.3) {
        let out = fresh("flat");
        g.nodes.push(NierNode::new(fresh("flatten"), Op::Flatten { axis: 1 }, &[&prev], out.clone()));
        prev = out;
    }
    let mut width = channels * h * w;

    // Hidden affine layer, as Gemm or as MatMul plus a constant bias.
    let hidden = rng.gen_range(1..=4);
    if rng.gen_bool(0.5) {
        let trans_b = rng.gen_bool(0.5);
        let dims = if trans_b { [hidden, width] } else { [width, hidden] };
        let wname = fresh("fc.weight");
        g.tensors.insert(wname.clone(), random_tensor(&mut rng, &dims));
        let mut inputs = vec![prev.clone(), wname];
        if rng.gen_bool(0.7) {
            let bname = fresh("fc.bias");
            let bdims: &[usize] = if rng.gen_bool(0.5) { &[hidden] } else { &[1, hidden] };
            g.tensors.insert(bname.clone(), random_tensor(&mut rng, bdims));
            inputs.push(bname);
        }
        let alpha = if rng.gen_bool(0.7) { Rational::one() } else { r(1, 2) };
        let beta = if rng.gen_bool(0.7) { Rational::one() } else { r(3, 2) };
        let refs: Vec<&str> = inputs.iter().map(String::as_str).collect();
        let out = fresh("fc");
        g.nodes.push(NierNode::new(fresh("gemm"), Op::Gemm(GemmAttrs { alpha, beta, trans_b }), &refs, out.clone()));
        prev = out;
    } else {
        let wname = fresh("mm.weight");
        g.tensors.insert(wname.clone(), random_tensor(&mut rng, &[width, hidden]));
        let out = fresh("mm");
        g.nodes.push(NierNode::new(fresh("matmul"), Op::MatMul, &[&prev, &wname], out.clone()));
        prev = out;
        // Bias from a Constant node, sometimes as a sum of two constants
        // so that folding has work to do.
        let cname = fresh("bias");
        g.nodes.push(NierNode::new(fresh("const"), Op::Constant(random_tensor(&mut rng, &[hidden])), &[], cname.clone()));
        let bias = if rng.gen_bool(0.5) {
            let other = fresh("bias.part");
            g.tensors.insert(other.clone(), random_tensor(&mut rng, &[hidden]));
            let sum = fresh("bias.sum");
            g.nodes.push(NierNode::new(fresh("add"), Op::Add, &[&cname, &other], sum.clone()));
            sum
        } else {
            cname
        };
        let out = fresh("affine");
        g.nodes.push(NierNode::new(fresh("add"), Op::Add, &[&prev, &bias], out.clone()));
        prev = out;
    }
    width = hidden;
    if rng.gen_bool(0.8) {
        let out = fresh("relu");
        g.nodes.push(NierNode::new(fresh("relu"), Op::Relu, &[&prev], out.clone()));
        prev = out;
    }
    let wname = fresh("head.weight");
    g.tensors.insert(wname.clone(), random_tensor(&mut rng, &[2, width]));
    let bname = fresh("head.bias");
    g.tensors.insert(bname.clone(), random_tensor(&mut rng, &[2]));
    let attrs = GemmAttrs { trans_b: true, ..Default::default() };
    g.nodes.push(NierNode::new(fresh("head"), Op::Gemm(attrs), &[&prev, &wname, &bname], "y"));
    if rng.gen_bool(0.3) {
        // Identity straight into the graph output.
        g.nodes.last_mut().unwrap().output = "y.pre".into();
        g.nodes.push(NierNode::new(fresh("identity"), Op::Identity, &["y.pre"], "y"));
    }
    g.outputs.push(ValueInfo::new("y", &[1, 2]));
    finish(g)
}

/// Random rational input for the first graph input: `k/16` with
/// `|k| <= 32`.
pub fn random_input(graph: &NierGraph, seed: u64) -> RationalTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = graph.inputs[0].shape.clone();
    RationalTensor::from_fn(shape, |_| r(rng.gen_range(-32..=32), 16))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camus::PropertySpec;
    use crate::oracle::eval_exact;

    fn logits(g: &NierGraph, image: &[i64]) -> Vec<Rational> {
        let data = image.iter().map(|&v| Rational::from_integer(v.into())).collect();
        let x = RationalTensor::new(g.inputs[0].shape.clone(), data).unwrap();
        eval_exact(g, &x).unwrap().0[0].data().to_vec()
    }

    #[test]
    fn correct_net_by_hand() {
        let sim = SimulatorSpec::binary(2, 2);
        let zone = Region::bottom_half(&sim);
        let g = correct_alert_net(&sim, &zone);
        assert_eq!(logits(&g, &[0, 0, 1, 0]), vec![r(1, 2), r(1, 1)]);
        assert_eq!(logits(&g, &[1, 1, 0, 0]), vec![r(1, 2), r(0, 1)]);
        let dza = PropertySpec::danger_zone_alert(&sim);
        let image: Vec<Rational> = [0, 0, 1, 0].iter().map(|&v| r(v, 1)).collect();
        assert!(!dza.violated(&sim, &image, &logits(&g, &[0, 0, 1, 0])));
    }

    #[test]
    fn random_graphs_are_well_formed() {
        for seed in 0..200 {
            let g = random_graph(seed);
            let x = random_input(&g, seed);
            let (out, trace) = eval_exact(&g, &x).unwrap();
            assert_eq!(out[0].shape().dims(), &[1, 2]);
            assert!(trace.values.len() >= g.nodes.len());
        }
    }

    #[test]
    fn conv_net_matches_linear_net() {
        let sim = SimulatorSpec::binary(3, 3);
        let zone = Region::bottom_half(&sim);
        let conv = conv_alert_net(&sim, &zone);
        let dza = PropertySpec::danger_zone_alert(&sim);
        let nfa = PropertySpec::no_false_alert(&sim);
        for i in 0..512u64 {
            let image: Vec<i64> = (0..9).map(|p| ((i >> (8 - p)) & 1) as i64).collect();
            let img: Vec<Rational> = image.iter().map(|&v| r(v, 1)).collect();
            let out = logits(&conv, &image);
            assert!(!dza.violated(&sim, &img, &out), "{image:?}");
            assert!(!nfa.violated(&sim, &img, &out), "{image:?}");
        }
    }
}
