use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::model::parse_model;
use super::process::{run_solver_cancellable, RawOutcome, SolverStatus};
use super::SolverConfig;
use crate::camus::{compose_task, Domain, PropertySpec, SimulatorSpec, VarRef, VerificationTask};
use crate::error::{Error, Result};
use crate::lowering::{element_name, input_prefix, lower_graph};
use crate::nier::{NierGraph, RationalTensor, TensorShape};
use crate::oracle::eval_exact;
use crate::rational::{display, Rational};
use crate::verdict::{Counterexample, Verdict};

/// An input image read back from a solver model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReconstructedInput {
    /// Value of every input variable.
    pub assignment: BTreeMap<String, Rational>,
    /// `image[h][w]`.
    pub image: Vec<Vec<Rational>>,
    /// Pixels at `hi`, for binary domains.
    pub params: Option<BTreeSet<(usize, usize)>>,
}

/// Reads the pixel values out of a model and checks them against the
/// simulator's pixel domain.
pub fn reconstruct_input(
    assignment: &BTreeMap<String, Rational>,
    sim: &SimulatorSpec,
    input_shape: &TensorShape,
) -> Result<ReconstructedInput> {
    sim.check_input_shape(input_shape)?;
    let mut inputs = BTreeMap::new();
    let mut flat = Vec::with_capacity(sim.pixels());
    for i in 0..sim.pixels() {
        let name = element_name(&input_prefix(0), input_shape, i);
        let v = assignment.get(&name).ok_or_else(|| Error::IncompleteModel(name.clone()))?.clone();
        let ok = match sim.domain {
            Domain::Binary => v == sim.lo || v == sim.hi,
            Domain::Interval => sim.lo <= v && v <= sim.hi,
        };
        if !ok {
            return Err(Error::DomainViolation { var: name, value: display(&v) });
        }
        inputs.insert(name, v.clone());
        flat.push(v);
    }
    let params = (sim.domain == Domain::Binary)
        .then(|| (0..sim.pixels()).filter(|&i| flat[i] == sim.hi).map(|i| sim.coords(i)).collect());
    let image = flat.chunks(sim.width).map(<[_]>::to_vec).collect();
    Ok(ReconstructedInput { assignment: inputs, image, params })
}

fn mentions_named(prop: &PropertySpec) -> bool {
    match prop {
        PropertySpec::IoContract { pre, post } => {
            pre.iter().chain(post).flat_map(|c| c.vars()).any(|v| matches!(v, VarRef::Named(_)))
        }
        _ => false,
    }
}

/// Whether exact evaluation of `graph` on `image` violates `prop`.
pub fn confirm_counterexample(
    graph: &NierGraph,
    image: &[Vec<Rational>],
    sim: &SimulatorSpec,
    prop: &PropertySpec,
) -> Result<bool> {
    let [input] = graph.inputs.as_slice() else {
        return Err(Error::InvalidSpec("the model must have exactly one input".into()));
    };
    let flat: Vec<Rational> = image.iter().flatten().cloned().collect();
    let tensor = RationalTensor::new(input.shape.clone(), flat.clone()).ok_or_else(|| Error::ShapeMismatch {
        node: input.name.clone(),
        expected: input.shape.to_string(),
        actual: format!("{} pixels", flat.len()),
    })?;
    let (outputs, _) = eval_exact(graph, &tensor)?;
    let outputs = outputs.first().ok_or_else(|| Error::InvalidSpec("the model has no output".into()))?;

    // Other named variables are defined by the lowering; run its
    // equalities forward from the image.
    let named = if mentions_named(prop) {
        let cs = lower_graph(graph)?;
        let inputs = (0..flat.len())
            .map(|i| (element_name(&input_prefix(0), &input.shape, i), flat[i].clone()))
            .collect();
        cs.propagate(&inputs).unwrap_or_default()
    } else {
        BTreeMap::new()
    };
    Ok(prop.violated_with(sim, &flat, outputs.data(), &|n| named.get(n).cloned()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyOutcome {
    pub verdict: Verdict,
    /// Solver that produced the verdict, if any answered.
    pub solver: Option<String>,
    pub elapsed: Duration,
    pub smt_path: PathBuf,
}

fn strip_get_model(text: &str) -> String {
    text.lines().filter(|l| l.trim() != "(get-model)").map(|l| format!("{l}\n")).collect()
}

/// Turns one definitive solver answer into a verdict, confirming any
/// counterexample by exact evaluation.
fn decide(task: &VerificationTask, cfg: &SolverConfig, raw: &RawOutcome) -> Result<Verdict> {
    match raw.status {
        SolverStatus::Unsat => Ok(Verdict::Proven),
        SolverStatus::Unknown => Ok(Verdict::Unknown(raw.stderr.trim().to_string())),
        SolverStatus::Sat if !cfg.model_request => Ok(Verdict::Unknown("sat, but no model was requested".into())),
        SolverStatus::Sat => {
            let model = parse_model(&raw.model_text)?;
            let input = reconstruct_input(&model, &task.simulator, &task.model.inputs[0].shape)?;
            let confirmed = confirm_counterexample(&task.model, &input.image, &task.simulator, &task.property)?;
            if !confirmed {
                return Err(Error::EncodingBug(format!(
                    "{} returned a model that exact evaluation does not confirm as a counterexample",
                    cfg.name
                )));
            }
            Ok(Verdict::Falsified(Counterexample {
                assignment: input.assignment,
                image: input.image,
                params: input.params,
                confirmed,
            }))
        }
    }
}

/// Composes the task, writes it to `smt_path` and runs the configured
/// solvers on it, concurrently when there are several. The first `sat` or
/// `unsat` wins and the other solvers are stopped.
pub fn verify(task: &VerificationTask, configs: &[SolverConfig], smt_path: &Path) -> Result<VerifyOutcome> {
    let text = compose_task(task)?;
    verify_text(task, &text, configs, smt_path)
}

/// [`verify`] on an already composed task text.
pub fn verify_text(
    task: &VerificationTask,
    text: &str,
    configs: &[SolverConfig],
    smt_path: &Path,
) -> Result<VerifyOutcome> {
    if configs.is_empty() {
        return Err(Error::InvalidSpec("no solver configured".into()));
    }
    let start = Instant::now();
    std::fs::write(smt_path, text)?;
    let bare_path = smt_path.with_extension("nomodel.smt2");
    if configs.iter().any(|c| !c.model_request) {
        std::fs::write(&bare_path, strip_get_model(text))?;
    }
    let file_for = |cfg: &SolverConfig| if cfg.model_request { smt_path } else { bare_path.as_path() };

    let cancel = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel();
    let mut definitive: Option<(usize, RawOutcome)> = None;
    let mut others: Vec<(usize, Result<RawOutcome>)> = Vec::new();
    thread::scope(|scope| {
        for (i, cfg) in configs.iter().enumerate() {
            let tx = tx.clone();
            let cancel = &cancel;
            let file = file_for(cfg);
            scope.spawn(move || {
                let _ = tx.send((i, run_solver_cancellable(file, cfg, cancel)));
            });
        }
        drop(tx);
        for (i, result) in rx {
            match result {
                Ok(None) => {}
                Ok(Some(raw)) if raw.status != SolverStatus::Unknown && definitive.is_none() => {
                    cancel.store(true, Ordering::Relaxed);
                    definitive = Some((i, raw));
                }
                Ok(Some(raw)) => others.push((i, Ok(raw))),
                Err(e) => others.push((i, Err(e))),
            }
        }
    });

    let outcome = |verdict, i: Option<usize>| VerifyOutcome {
        verdict,
        solver: i.map(|i| configs[i].name.clone()),
        elapsed: start.elapsed(),
        smt_path: smt_path.to_path_buf(),
    };
    if let Some((i, raw)) = definitive {
        let verdict = decide(task, &configs[i], &raw)?;
        return Ok(outcome(verdict, Some(i)));
    }

    // No definitive answer: prefer unknown, then timeout, then solver
    // errors. Missing executables only matter if nothing ran.
    others.sort_by_key(|(i, _)| *i);
    if let Some((i, Ok(raw))) = others.iter().find(|(_, r)| r.is_ok()) {
        return Ok(outcome(decide(task, &configs[*i], raw)?, Some(*i)));
    }
    if let Some((i, _)) = others.iter().find(|(_, r)| matches!(r, Err(Error::Timeout(_)))) {
        return Ok(outcome(Verdict::Timeout, Some(*i)));
    }
    if let Some((i, Err(e))) = others.iter().find(|(_, r)| matches!(r, Err(Error::NonzeroExit { .. }))) {
        return Ok(outcome(Verdict::SolverError(e.to_string()), Some(*i)));
    }
    match others.into_iter().next() {
        Some((_, Err(e))) => Err(e),
        _ => Err(Error::InvalidSpec("no solver produced an answer".into())),
    }
}
