use std::collections::{BTreeMap, HashSet};

use nnsmt::fixtures::{random_graph, random_input};
use nnsmt::lowering::{
    element_name, input_prefix, lower_graph, lower_graph_with, output_prefix, LoweringOptions, VarRole, WeightMode,
};
use nnsmt::nier::{infer_shapes, rewrite, topo_order, topo_sort, NierGraph, RewriteRules};
use nnsmt::onnx::{parse_onnx, to_nier, to_onnx};
use nnsmt::oracle::eval_exact;
use nnsmt::rational::{float32_to_rational, float64_to_rational, is_dyadic, is_normalized};
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn million_f32_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 1_000_000 {
        let f = f32::from_bits(rng.gen());
        if !f.is_finite() {
            continue;
        }
        let q = float32_to_rational(f).unwrap();
        assert!(is_dyadic(&q) && is_normalized(&q));
        assert_eq!(q.to_f64().unwrap(), f as f64, "{f:e}");
        checked += 1;
    }
}

proptest! {
    #[test]
    fn f64_round_trip(bits in any::<u64>()) {
        let f = f64::from_bits(bits);
        prop_assume!(f.is_finite());
        let q = float64_to_rational(f).unwrap();
        prop_assert!(is_dyadic(&q) && is_normalized(&q));
        prop_assert_eq!(q.to_f64().unwrap(), f);
    }
}

fn outputs(g: &NierGraph, seed: u64) -> Vec<nnsmt::nier::RationalTensor> {
    eval_exact(g, &random_input(g, seed)).unwrap().0
}

fn is_topological(g: &NierGraph, order: &[usize]) -> bool {
    let mut available: HashSet<&str> = g.inputs.iter().map(|v| v.name.as_str()).collect();
    available.extend(g.tensors.keys().map(String::as_str));
    for &i in order {
        let n = &g.nodes[i];
        if !n.inputs.iter().all(|x| available.contains(x.as_str())) {
            return false;
        }
        available.insert(&n.output);
    }
    order.len() == g.nodes.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rewriting_preserves_outputs(seed in any::<u64>()) {
        let g = random_graph(seed);
        let rewritten = rewrite(&g, &RewriteRules::default()).unwrap();
        for k in 0..10 {
            prop_assert_eq!(outputs(&g, k), outputs(&rewritten, k));
        }
    }

    #[test]
    fn rewriting_reaches_a_fixpoint(seed in any::<u64>()) {
        let once = rewrite(&random_graph(seed), &RewriteRules::default()).unwrap();
        prop_assert_eq!(rewrite(&once, &RewriteRules::default()).unwrap(), once);
    }

    #[test]
    fn topo_order_is_deterministic_and_valid(seed in any::<u64>(), shuffle in any::<u64>()) {
        let mut g = random_graph(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        for i in (1..g.nodes.len()).rev() {
            let j = rng.gen_range(0..=i);
            g.nodes.swap(i, j);
        }
        let order = topo_order(&g).unwrap();
        prop_assert_eq!(&order, &topo_order(&g.clone()).unwrap());
        prop_assert!(is_topological(&g, &order));
        let sorted = topo_sort(&g).unwrap();
        prop_assert_eq!(topo_order(&sorted).unwrap(), (0..g.nodes.len()).collect::<Vec<_>>());
        prop_assert_eq!(outputs(&sorted, 1), outputs(&g, 1));
    }

    #[test]
    fn shape_inference_is_idempotent(seed in any::<u64>()) {
        let once = infer_shapes(&random_graph(seed)).unwrap();
        prop_assert_eq!(infer_shapes(&once).unwrap(), once.clone());
        for name in once.tensor_names() {
            prop_assert!(once.shapes.contains_key(name), "{}", name);
        }
    }

    #[test]
    fn onnx_export_reimports_identically(seed in any::<u64>()) {
        let g = random_graph(seed);
        let back = to_nier(&parse_onnx(&to_onnx(&g).unwrap()).unwrap()).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn trace_covers_every_tensor(seed in any::<u64>()) {
        let g = random_graph(seed);
        let (_, trace) = eval_exact(&g, &random_input(&g, seed)).unwrap();
        for name in g.tensor_names() {
            let t = trace.get(name);
            prop_assert!(t.is_some(), "{}", name);
            prop_assert_eq!(t.unwrap().shape(), g.shapes.get(name).unwrap());
        }
    }

    /// Forward propagation of the defining equalities reproduces exact
    /// evaluation, and every assertion holds on the resulting assignment.
    #[test]
    fn lowering_agrees_with_evaluation(seed in any::<u64>(), declared in any::<bool>()) {
        let g = random_graph(seed);
        let weights = if declared { WeightMode::Declared } else { WeightMode::Inlined };
        let cs = lower_graph_with(&g, &LoweringOptions { weights }).unwrap();
        let input = random_input(&g, seed ^ 1);
        let shape = &g.inputs[0].shape;
        let inputs: BTreeMap<_, _> = (0..shape.numel())
            .map(|i| (element_name(&input_prefix(0), shape, i), input.data()[i].clone()))
            .collect();
        let env = cs.propagate(&inputs).unwrap();
        for a in cs.assertions() {
            prop_assert_eq!(a.formula.eval(&|n| env.get(n).cloned()), Some(true));
        }
        let (out, _) = eval_exact(&g, &input).unwrap();
        let oshape = &g.outputs[0].shape;
        for (i, v) in out[0].data().iter().enumerate() {
            prop_assert_eq!(&env[&element_name(&output_prefix(0), oshape, i)], v);
        }
        let roles = cs.vars_with_role(VarRole::Input).count();
        prop_assert_eq!(roles, shape.numel());
    }

    #[test]
    fn lowering_is_deterministic(seed in any::<u64>()) {
        let g = random_graph(seed);
        prop_assert_eq!(lower_graph(&g).unwrap(), lower_graph(&g.clone()).unwrap());
    }
}
