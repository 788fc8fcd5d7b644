//! Lowering of a NIER graph to scalar Real constraints, and SMT-LIB 2
//! emission.
//!
//! Variable naming scheme (version 1):
//!
//! | role         | name                                   |
//! |--------------|----------------------------------------|
//! | input        | `actual_input_<n>_<c>_<h>_<w>`         |
//! | output       | `actual_output_<n>_<c>_<h>_<w>`        |
//! | intermediate | `n<nodeIndex>_<flatIndex>`             |
//! | weight       | `w_<tensorName>_<flatIndex>`           |
//!
//! Tensor indices are right-aligned into the four NCHW slots, so a `[1, 2]`
//! output gives `actual_output_0_0_0_0` and `actual_output_0_0_0_1`. A
//! second graph input or output is prefixed `actual_input1_`, and so on.
//! `nodeIndex` is the node's position in topological order. Tensor names
//! are sanitized to `[A-Za-z0-9_.]`.

mod emit;
mod lower;
pub mod term;

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

pub use emit::{emit_body, emit_prelude, emit_smtlib, EmitOptions};
pub use lower::{
    lower_conv2d, lower_graph, lower_graph_with, lower_maxpool, lower_relu, max_chain, LoweringOptions, Operand, WeightMode,
};
pub use term::{Expr, Formula, RenderStyle};

use crate::error::{Error, Result};
use crate::nier::TensorShape;
use crate::rational::Rational;

pub const NAMING_SCHEME_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarRole {
    Input,
    Output,
    Intermediate,
    Weight,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalarVar {
    pub name: String,
    pub role: VarRole,
}

/// An assertion together with the variable it defines, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assertion {
    pub defines: Option<String>,
    pub formula: Formula,
}

/// Flat, solver-agnostic list of Real declarations and assertions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConstraintSystem {
    declarations: Vec<ScalarVar>,
    assertions: Vec<Assertion>,
    roles: HashMap<String, VarRole>,
    pub logic_tag: String,
}

impl ConstraintSystem {
    pub fn new(logic_tag: impl Into<String>) -> Self {
        Self { logic_tag: logic_tag.into(), ..Default::default() }
    }

    pub fn declarations(&self) -> &[ScalarVar] {
        &self.declarations
    }

    pub fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.roles.contains_key(name)
    }

    pub fn declare(&mut self, name: String, role: VarRole) -> Result<()> {
        if self.roles.insert(name.clone(), role).is_some() {
            return Err(Error::InternalNamingCollision(name));
        }
        self.declarations.push(ScalarVar { name, role });
        Ok(())
    }

    /// Adds an assertion; every variable it mentions must be declared.
    pub fn assert(&mut self, defines: Option<String>, formula: Formula) -> Result<()> {
        let mut missing = None;
        formula.for_each_var(&mut |v| {
            if missing.is_none() && !self.roles.contains_key(v) {
                missing = Some(v.to_string());
            }
        });
        if let Some(v) = missing {
            return Err(Error::MissingVariable(v));
        }
        self.assertions.push(Assertion { defines, formula });
        Ok(())
    }

    /// Declares `name` and asserts `name = value`.
    pub fn define(&mut self, name: String, role: VarRole, value: Expr) -> Result<()> {
        self.declare(name.clone(), role)?;
        let formula = Formula::Eq(Expr::Var(name.clone()), value);
        self.assert(Some(name), formula)
    }

    pub fn role_of(&self, name: &str) -> Option<VarRole> {
        self.roles.get(name).copied()
    }

    pub fn vars_with_role(&self, role: VarRole) -> impl Iterator<Item = &ScalarVar> {
        self.declarations.iter().filter(move |v| v.role == role)
    }

    /// Values of every defined variable, computed by running the defining
    /// equalities forward from `inputs`. `None` if an input is missing.
    pub fn propagate(&self, inputs: &BTreeMap<String, Rational>) -> Option<BTreeMap<String, Rational>> {
        let mut env = inputs.clone();
        for a in &self.assertions {
            if let (Some(v), Formula::Eq(Expr::Var(lhs), term)) = (&a.defines, &a.formula) {
                if lhs == v {
                    let value = term.eval(&|n| env.get(n).cloned())?;
                    env.insert(v.clone(), value);
                }
            }
        }
        Some(env)
    }
}

/// Target SMT-LIB logic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Logic {
    #[default]
    QfNra,
    QfLra,
    QfLira,
}

impl Logic {
    pub fn as_str(self) -> &'static str {
        match self {
            Logic::QfNra => "QF_NRA",
            Logic::QfLra => "QF_LRA",
            Logic::QfLira => "QF_LIRA",
        }
    }

    pub fn is_linear(self) -> bool {
        !matches!(self, Logic::QfNra)
    }

    /// Weight handling that keeps the formula inside this logic: declared
    /// weight variables for QF_NRA, inlined literals otherwise.
    pub fn weight_mode(self) -> WeightMode {
        if self.is_linear() {
            WeightMode::Inlined
        } else {
            WeightMode::Declared
        }
    }
}

impl FromStr for Logic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "QF_NRA" => Ok(Logic::QfNra),
            "QF_LRA" => Ok(Logic::QfLra),
            "QF_LIRA" => Ok(Logic::QfLira),
            other => Err(Error::UnsupportedLogic(other.to_string())),
        }
    }
}

impl std::fmt::Display for Logic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Replaces characters outside `[A-Za-z0-9_.]` with `_`.
pub fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// `<prefix>_<i0>_<i1>_<i2>_<i3>` with indices right-aligned into four slots.
pub fn element_name(prefix: &str, shape: &TensorShape, flat: usize) -> String {
    let index = shape.unravel(flat);
    let mut slots = vec![0; 4usize.saturating_sub(index.len())];
    slots.extend(index);
    let mut name = prefix.to_string();
    for i in slots {
        name.push('_');
        name.push_str(&i.to_string());
    }
    name
}

/// Prefix for the `k`-th graph input.
pub fn input_prefix(k: usize) -> String {
    if k == 0 {
        "actual_input".into()
    } else {
        format!("actual_input{k}")
    }
}

/// Prefix for the `k`-th graph output.
pub fn output_prefix(k: usize) -> String {
    if k == 0 {
        "actual_output".into()
    } else {
        format!("actual_output{k}")
    }
}

pub fn intermediate_name(node_index: usize, flat: usize) -> String {
    format!("n{node_index}_{flat}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_right_align() {
        let s = TensorShape::new(vec![1, 2]);
        assert_eq!(element_name("actual_output", &s, 1), "actual_output_0_0_0_1");
        let s = TensorShape::new(vec![1, 1, 9, 9]);
        assert_eq!(element_name("actual_input", &s, 8), "actual_input_0_0_0_8");
        assert_eq!(element_name("actual_input", &s, 80), "actual_input_0_0_8_8");
    }

    #[test]
    fn sanitizes_tensor_names() {
        assert_eq!(sanitize("/0/Gemm_output_0"), "_0_Gemm_output_0");
        assert_eq!(sanitize("l_1.weight"), "l_1.weight");
    }

    #[test]
    fn collisions_and_missing_vars() {
        let mut cs = ConstraintSystem::new("QF_LRA");
        cs.declare("x".into(), VarRole::Input).unwrap();
        assert!(matches!(
            cs.declare("x".into(), VarRole::Input),
            Err(Error::InternalNamingCollision(_))
        ));
        let f = Formula::Eq(Expr::var("x"), Expr::var("y"));
        assert!(matches!(cs.assert(None, f), Err(Error::MissingVariable(v)) if v == "y"));
    }

    #[test]
    fn logic_names() {
        assert_eq!("QF_LRA".parse::<Logic>().unwrap(), Logic::QfLra);
        assert!("QF_BV".parse::<Logic>().is_err());
        assert_eq!(Logic::default().as_str(), "QF_NRA");
    }
}
