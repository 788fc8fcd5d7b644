use std::fmt::Write;

use super::term::RenderStyle;
use super::{ConstraintSystem, Logic, VarRole, NAMING_SCHEME_VERSION};
use crate::error::{Error, Result};
use crate::rational::NumeralStyle;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EmitOptions {
    pub logic: Logic,
    /// Spell negative literals as `(/ -n d)`, as the hand-written files
    /// this format descends from do. Not strict SMT-LIB 2.6.
    pub fig5_compat: bool,
}

impl EmitOptions {
    pub fn new(logic: Logic) -> Self {
        Self { logic, fig5_compat: false }
    }

    pub fn numerals(&self) -> NumeralStyle {
        NumeralStyle {
            fig5_compat: self.fig5_compat,
            real_decimals: self.logic == Logic::QfLira,
        }
    }

    pub fn style(&self, quote_symbols: bool) -> RenderStyle {
        RenderStyle { numerals: self.numerals(), quote_symbols }
    }
}

/// Header comment block, optional `produce-models` option and `set-logic`.
pub fn emit_prelude(out: &mut String, cs: &ConstraintSystem, opts: &EmitOptions, produce_models: bool) {
    let _ = writeln!(out, "; generated by nnsmt {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        out,
        "; naming scheme v{NAMING_SCHEME_VERSION}: actual_input_<n>_<c>_<h>_<w>, actual_output_<n>_<c>_<h>_<w>, n<node>_<index>, w_<tensor>_<index>"
    );
    let _ = writeln!(
        out,
        "; {} declarations, {} assertions",
        cs.declarations().len(),
        cs.assertions().len()
    );
    if produce_models {
        out.push_str("(set-option :produce-models true)\n");
    }
    let _ = writeln!(out, "(set-logic {})", opts.logic);
}

/// Rejects products of two non-constant terms under a linear logic.
fn check_logic(cs: &ConstraintSystem, opts: &EmitOptions) -> Result<()> {
    if !opts.logic.is_linear() {
        return Ok(());
    }
    for a in cs.assertions() {
        if let Some(term) = a.formula.find_nonlinear() {
            return Err(Error::LogicMismatch {
                logic: opts.logic.to_string(),
                term: term.render(opts.style(true)),
            });
        }
    }
    Ok(())
}

/// Declarations and assertions, grouped by role: inputs, weights (each
/// declaration followed by its value), intermediates, outputs.
pub fn emit_body(out: &mut String, cs: &ConstraintSystem, opts: &EmitOptions) -> Result<()> {
    check_logic(cs, opts)?;
    let style = opts.style(true);
    let declare = |out: &mut String, name: &str| {
        let _ = writeln!(out, "(declare-fun |{name}| () Real)");
    };
    let role_of_assertion = |defines: &Option<String>| defines.as_deref().and_then(|d| cs.role_of(d));

    let groups = [
        (VarRole::Input, ";; Inputs declaration"),
        (VarRole::Weight, ";; Weights declaration"),
        (VarRole::Intermediate, ";; Intermediate computations"),
        (VarRole::Output, ";; Outputs declaration"),
    ];
    for (role, banner) in groups {
        let vars: Vec<&str> = cs.vars_with_role(role).map(|v| v.name.as_str()).collect();
        if vars.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{banner}");
        let asserts = cs.assertions().iter().filter(|a| role_of_assertion(&a.defines) == Some(role));
        if role == VarRole::Weight {
            for a in asserts {
                declare(out, a.defines.as_deref().unwrap());
                let _ = writeln!(out, "(assert {})", a.formula.render(style));
            }
        } else {
            for v in vars {
                declare(out, v);
            }
            for a in asserts {
                let _ = writeln!(out, "(assert {})", a.formula.render(style));
            }
        }
    }
    let free: Vec<_> = cs.assertions().iter().filter(|a| role_of_assertion(&a.defines).is_none()).collect();
    if !free.is_empty() {
        out.push_str(";; Constraints\n");
        for a in free {
            let _ = writeln!(out, "(assert {})", a.formula.render(style));
        }
    }
    Ok(())
}

/// Renders a constraint system as a stand-alone SMT-LIB 2.6 script without
/// `(check-sat)`. Output is a pure function of `cs` and `opts`.
pub fn emit_smtlib(cs: &ConstraintSystem, opts: &EmitOptions) -> Result<String> {
    check_logic(cs, opts)?;
    let mut out = String::new();
    emit_prelude(&mut out, cs, opts, false);
    if cs.declarations().is_empty() && cs.assertions().is_empty() {
        return Ok(out);
    }
    out.push_str(";;;; Automatically generated part\n");
    emit_body(&mut out, cs, opts)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowering::{Expr, Formula};
    use crate::rational::Rational;

    #[test]
    fn empty_system_is_header_and_logic() {
        let cs = ConstraintSystem::new("QF_NRA");
        let text = emit_smtlib(&cs, &EmitOptions::default()).unwrap();
        let code: Vec<&str> = text.lines().filter(|l| !l.starts_with(';')).collect();
        assert_eq!(code, ["(set-logic QF_NRA)"]);
    }

    #[test]
    fn weight_pair_shape() {
        let mut cs = ConstraintSystem::new("QF_NRA");
        let v = Rational::new((-5585077).into(), 33554432.into());
        cs.define("w_l_1.weight_124".into(), VarRole::Weight, Expr::Lit(v)).unwrap();
        let text = emit_smtlib(&cs, &EmitOptions::default()).unwrap();
        assert!(text.contains(
            "(declare-fun |w_l_1.weight_124| () Real)\n(assert (= |w_l_1.weight_124| (- (/ 5585077 33554432))))\n"
        ));
        let compat = EmitOptions { fig5_compat: true, ..Default::default() };
        let text = emit_smtlib(&cs, &compat).unwrap();
        assert!(text.contains("(assert (= |w_l_1.weight_124| (/ -5585077 33554432)))"));
    }

    #[test]
    fn nonlinear_rejected_under_lra() {
        let mut cs = ConstraintSystem::new("");
        for n in ["x", "w"] {
            cs.declare(n.into(), VarRole::Input).unwrap();
        }
        let prod = Expr::Mul(vec![Expr::var("x"), Expr::var("w")]);
        cs.define("y".into(), VarRole::Output, prod).unwrap();
        let lra = EmitOptions::new(Logic::QfLra);
        assert!(matches!(emit_smtlib(&cs, &lra), Err(Error::LogicMismatch { .. })));
        assert!(emit_smtlib(&cs, &EmitOptions::new(Logic::QfNra)).is_ok());
        cs.assert(None, Formula::Ge(Expr::var("y"), Expr::int(0))).unwrap();
        let text = emit_smtlib(&cs, &EmitOptions::new(Logic::QfNra)).unwrap();
        assert!(text.ends_with(";; Constraints\n(assert (>= |y| 0))\n"));
    }
}
