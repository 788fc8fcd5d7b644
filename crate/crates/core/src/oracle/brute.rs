use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::eval::eval_exact;
use crate::camus::{Domain, PropertySpec, SimulatorSpec};
use crate::error::{Error, Result};
use crate::lowering::{element_name, input_prefix};
use crate::nier::{infer_shapes, NierGraph, RationalTensor};
use crate::verdict::{Counterexample, Verdict};

/// Default enumeration cap: grids of up to 20 pixels.
pub const DEFAULT_MAX_ENUM_BITS: u32 = 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BruteForceReport {
    pub verdict: Verdict,
    /// Images up to and including the first violation in enumeration
    /// order, or all `2^(h*w)` images when the property holds.
    pub evaluations: u64,
}

/// Parameter set of image number `index`: pixel `p` (row-major) carries an
/// obstacle iff bit `pixels - 1 - p` of `index` is set, so counting upward
/// enumerates images in lexicographic row-major order with 0 before 1.
pub fn params_of_index(sim: &SimulatorSpec, index: u64) -> BTreeSet<(usize, usize)> {
    let n = sim.pixels();
    (0..n).filter(|&p| (index >> (n - 1 - p)) & 1 == 1).map(|p| sim.coords(p)).collect()
}

/// Exhaustive check over every image the binary simulator can render.
/// Returns the lexicographically first violating parameter set, if any.
pub fn brute_force_verify(
    graph: &NierGraph,
    sim: &SimulatorSpec,
    prop: &PropertySpec,
    max_enum_bits: u32,
) -> Result<BruteForceReport> {
    sim.validate()?;
    if sim.domain != Domain::Binary {
        return Err(Error::InvalidSpec("exhaustive enumeration needs a binary pixel domain".into()));
    }
    let pixels = sim.pixels();
    if pixels > max_enum_bits as usize || pixels > 63 {
        return Err(Error::GridTooLarge { pixels, cap_bits: max_enum_bits });
    }
    let graph = infer_shapes(graph)?;
    let [input] = graph.inputs.as_slice() else {
        return Err(Error::InvalidSpec("the model must have exactly one input".into()));
    };
    sim.check_input_shape(&input.shape)?;
    if graph.outputs.len() != 1 {
        return Err(Error::InvalidSpec("the model must have exactly one output".into()));
    }
    prop.validate(sim, graph.outputs[0].shape.numel())?;

    let check = |index: u64| -> Result<bool> {
        let image = sim.render(&params_of_index(sim, index));
        let tensor = RationalTensor::new(input.shape.clone(), image.clone()).expect("shape checked");
        let (outputs, _) = eval_exact(&graph, &tensor)?;
        Ok(prop.violated(sim, &image, outputs[0].data()))
    };

    let total = 1u64 << pixels;
    // find_first keeps the minimum index, however the work is split.
    let first = (0..total)
        .into_par_iter()
        .map(|i| check(i).map(|v| (i, v)))
        .find_first(|r| !matches!(r, Ok((_, false))));
    match first {
        None => Ok(BruteForceReport { verdict: Verdict::Proven, evaluations: total }),
        Some(Err(e)) => Err(e),
        Some(Ok((index, _))) => {
            let params = params_of_index(sim, index);
            let flat = sim.render(&params);
            let assignment: BTreeMap<_, _> = flat
                .iter()
                .enumerate()
                .map(|(i, v)| (element_name(&input_prefix(0), &input.shape, i), v.clone()))
                .collect();
            let image = flat.chunks(sim.width).map(<[_]>::to_vec).collect();
            Ok(BruteForceReport {
                verdict: Verdict::Falsified(Counterexample { assignment, image, params: Some(params), confirmed: true }),
                evaluations: index + 1,
            })
        }
    }
}
