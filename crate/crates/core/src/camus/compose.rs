use std::fmt::Write;

use super::{Directive, Domain, Norm, PropertySpec, SimulatorSpec, VarRef};
use crate::error::{Error, Result};
use crate::lowering::term::abs;
use crate::lowering::{
    emit_body, emit_prelude, element_name, input_prefix, lower_graph_with, output_prefix, ConstraintSystem,
    EmitOptions, Expr, Formula, LoweringOptions, VarRole,
};
use crate::nier::{infer_shapes, NierGraph};

/// A network, a simulator and a property, ready to be composed into one
/// SMT-LIB file.
#[derive(Clone, Debug)]
pub struct VerificationTask {
    pub model: NierGraph,
    pub simulator: SimulatorSpec,
    pub property: PropertySpec,
    pub emit: EmitOptions,
}

impl VerificationTask {
    /// Checks that the model has one input carrying the grid and one output
    /// that the property can refer to.
    pub fn new(model: NierGraph, simulator: SimulatorSpec, property: PropertySpec) -> Result<Self> {
        let model = infer_shapes(&model)?;
        if model.inputs.len() != 1 || model.outputs.len() != 1 {
            return Err(Error::InvalidSpec(format!(
                "the model must have one input and one output, it has {} and {}",
                model.inputs.len(),
                model.outputs.len()
            )));
        }
        simulator.validate()?;
        simulator.check_input_shape(&model.inputs[0].shape)?;
        property.validate(&simulator, model.outputs[0].shape.numel())?;
        Ok(Self { model, simulator, property, emit: EmitOptions::default() })
    }

    pub fn with_emit(mut self, emit: EmitOptions) -> Self {
        self.emit = emit;
        self
    }

    /// Input variable of each pixel, row-major.
    pub fn pixel_vars(&self) -> Vec<String> {
        let shape = &self.model.inputs[0].shape;
        (0..shape.numel()).map(|i| element_name(&input_prefix(0), shape, i)).collect()
    }

    pub fn output_vars(&self) -> Vec<String> {
        let shape = &self.model.outputs[0].shape;
        (0..shape.numel()).map(|i| element_name(&output_prefix(0), shape, i)).collect()
    }
}

fn declared_with_role(cs: &ConstraintSystem, role: VarRole, count: usize, what: &str) -> Result<Vec<Expr>> {
    let vars: Vec<Expr> = cs.vars_with_role(role).take(count).map(|v| Expr::var(v.name.clone())).collect();
    if vars.len() < count {
        return Err(Error::MissingVariable(format!("{what} {}", vars.len())));
    }
    Ok(vars)
}

fn pixel_exprs(sim: &SimulatorSpec, cs: &ConstraintSystem) -> Result<Vec<Expr>> {
    declared_with_role(cs, VarRole::Input, sim.pixels(), "input pixel")
}

/// Pixel-domain assertions: `(or (= p lo) (= p hi))` per pixel for a
/// binary domain, `(>= p lo)` and `(<= p hi)` per pixel for an interval.
pub fn emit_input_constraints(sim: &SimulatorSpec, cs: &ConstraintSystem) -> Result<Vec<Formula>> {
    let lo = Expr::lit(sim.lo.clone());
    let hi = Expr::lit(sim.hi.clone());
    let mut out = Vec::new();
    for p in pixel_exprs(sim, cs)? {
        match sim.domain {
            Domain::Binary => out.push(Formula::Or(vec![
                Formula::Eq(p.clone(), lo.clone()),
                Formula::Eq(p, hi.clone()),
            ])),
            Domain::Interval => {
                out.push(Formula::Ge(p.clone(), lo.clone()));
                out.push(Formula::Le(p, hi.clone()));
            }
        }
    }
    Ok(out)
}

/// Reconstruction target of a pixel variable: the variable itself for
/// `{0, 1}` pixels, `(p - lo) / (hi - lo)` otherwise.
fn param_expr(sim: &SimulatorSpec, p: Expr) -> Expr {
    let span = &sim.hi - &sim.lo;
    if num_traits::Zero::is_zero(&sim.lo) && num_traits::One::is_one(&span) {
        return p;
    }
    let shifted = Expr::sum(vec![p, Expr::lit(-sim.lo.clone())]);
    Expr::Mul(vec![Expr::lit(num_traits::Inv::inv(span)), shifted])
}

fn diff(a: &Expr, b: &Expr) -> Expr {
    Expr::Sub(Box::new(a.clone()), Box::new(b.clone()))
}

fn alert_formulas(directive: &Directive, outputs: &[Expr]) -> (Formula, Formula) {
    match directive {
        Directive::TwoLogit { alert, no_alert } => {
            let (a, n) = (outputs[*alert].clone(), outputs[*no_alert].clone());
            (Formula::Lt(n.clone(), a.clone()), Formula::Le(a, n))
        }
        Directive::Threshold { output, theta } => {
            let (o, t) = (outputs[*output].clone(), Expr::lit(theta.clone()));
            (Formula::Ge(o.clone(), t.clone()), Formula::Lt(o, t))
        }
    }
}

/// The negated property, one formula per assertion. The task is `sat`
/// exactly when a counterexample exists.
pub fn emit_property_negation(prop: &PropertySpec, sim: &SimulatorSpec, cs: &ConstraintSystem) -> Result<Vec<Formula>> {
    let pixels = pixel_exprs(sim, cs)?;
    let output_count = cs.vars_with_role(VarRole::Output).count();
    let outputs = declared_with_role(cs, VarRole::Output, output_count, "output")?;
    let lo = Expr::lit(sim.lo.clone());
    let hi = Expr::lit(sim.hi.clone());
    let check_index = |k: usize, what: &str| {
        if k >= output_count {
            Err(Error::MissingVariable(format!("{what} {k}")))
        } else {
            Ok(())
        }
    };

    Ok(match prop {
        PropertySpec::DangerZoneAlert { zone, directive } => {
            let occupied = zone.pixels(sim).into_iter().map(|i| Formula::Eq(pixels[i].clone(), hi.clone())).collect();
            check_index(directive.max_index(), "output")?;
            let (_, silent) = alert_formulas(directive, &outputs);
            vec![Formula::or(occupied), silent]
        }
        PropertySpec::NoFalseAlert { zone, directive } => {
            let mut out: Vec<Formula> =
                zone.pixels(sim).into_iter().map(|i| Formula::Eq(pixels[i].clone(), lo.clone())).collect();
            check_index(directive.max_index(), "output")?;
            let (alert, _) = alert_formulas(directive, &outputs);
            out.push(alert);
            out
        }
        PropertySpec::IdentityReconstruction => {
            check_index(sim.pixels().saturating_sub(1), "output")?;
            let mut parts = Vec::new();
            for (p, o) in pixels.iter().zip(&outputs) {
                let s = param_expr(sim, p.clone());
                parts.push(Formula::Lt(o.clone(), s.clone()));
                parts.push(Formula::Gt(o.clone(), s));
            }
            vec![Formula::or(parts)]
        }
        PropertySpec::ToleranceReconstruction { epsilon, norm } => {
            check_index(sim.pixels().saturating_sub(1), "output")?;
            let eps = Expr::lit(epsilon.clone());
            let pairs: Vec<(Expr, Expr)> =
                pixels.iter().zip(&outputs).map(|(p, o)| (o.clone(), param_expr(sim, p.clone()))).collect();
            match norm {
                Norm::LInf => {
                    let mut parts = Vec::new();
                    for (o, s) in &pairs {
                        parts.push(Formula::Gt(diff(o, s), eps.clone()));
                        parts.push(Formula::Gt(diff(s, o), eps.clone()));
                    }
                    vec![Formula::or(parts)]
                }
                Norm::L1 => {
                    let terms = pairs.iter().map(|(o, s)| abs(diff(o, s))).collect();
                    vec![Formula::Gt(Expr::Add(terms), eps)]
                }
            }
        }
        PropertySpec::IoContract { pre, post } => {
            let resolve = |v: &VarRef| -> Result<String> {
                let name = match v {
                    VarRef::Input(k) => match pixels.get(*k) {
                        Some(Expr::Var(n)) => n.clone(),
                        _ => return Err(Error::MissingVariable(v.to_string())),
                    },
                    VarRef::Output(k) => match outputs.get(*k) {
                        Some(Expr::Var(n)) => n.clone(),
                        _ => return Err(Error::MissingVariable(v.to_string())),
                    },
                    VarRef::Named(n) => n.clone(),
                };
                if !cs.is_declared(&name) {
                    return Err(Error::MissingVariable(name));
                }
                Ok(name)
            };
            let mut out = pre.iter().map(|c| c.to_formula(&resolve)).collect::<Result<Vec<_>>>()?;
            let negated = post.iter().map(|c| c.negated_formula(&resolve)).collect::<Result<Vec<_>>>()?;
            out.push(Formula::or(negated));
            out
        }
    })
}

fn property_comment(prop: &PropertySpec) -> &'static str {
    match prop {
        PropertySpec::DangerZoneAlert { .. } => {
            ";; Negation: an obstacle lies in the danger zone and the alert is not raised\n"
        }
        PropertySpec::NoFalseAlert { .. } => ";; Negation: the danger zone is empty and the alert is raised\n",
        PropertySpec::IdentityReconstruction => ";; Negation: some parameter is not reconstructed exactly\n",
        PropertySpec::ToleranceReconstruction { .. } => ";; Negation: the reconstruction error exceeds epsilon\n",
        PropertySpec::IoContract { .. } => ";; Negation: preconditions hold and some postcondition fails\n",
    }
}

/// The complete task file: network, simulator description, negated
/// property, `(check-sat)` and `(get-model)`.
pub fn compose_task(task: &VerificationTask) -> Result<String> {
    let lowering = LoweringOptions { weights: task.emit.logic.weight_mode() };
    let cs = lower_graph_with(&task.model, &lowering)?;
    let inputs = emit_input_constraints(&task.simulator, &cs)?;
    let negation = emit_property_negation(&task.property, &task.simulator, &cs)?;

    let mut out = String::new();
    emit_prelude(&mut out, &cs, &task.emit, true);
    out.push_str(";;;; Automatically generated part\n");
    emit_body(&mut out, &cs, &task.emit)?;
    out.push('\n');
    out.push_str(";;;; Handmade annotations\n");
    out.push_str(";; Simulator description\n");
    let style = task.emit.style(false);
    let _ = writeln!(
        out,
        ";; {}x{} grid, {} pixels",
        task.simulator.height,
        task.simulator.width,
        match task.simulator.domain {
            Domain::Binary => "binary",
            Domain::Interval => "interval",
        }
    );
    for f in &inputs {
        let _ = writeln!(out, "(assert {})", f.render(style));
    }
    out.push_str(";; Property to check\n");
    let _ = writeln!(out, ";; {}", task.property.kind().as_str());
    out.push_str(property_comment(&task.property));
    for f in &negation {
        let _ = writeln!(out, "(assert {})", f.render(style));
    }
    out.push_str("(check-sat)\n(get-model)\n");
    Ok(out)
}
