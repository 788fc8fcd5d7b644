//! Compiles ONNX feed-forward networks into SMT-LIB 2 verification tasks
//! and checks solver verdicts against an exact-rational reference
//! evaluator.
//!
//! Pipeline: [`onnx::parse_onnx`] and [`onnx::to_nier`] build a
//! [`nier::NierGraph`]; [`lowering::lower_graph`] turns it into a
//! [`lowering::ConstraintSystem`]; [`camus::compose_task`] adds the
//! simulator description and property negation; [`solver::verify`] runs a
//! solver and confirms any counterexample with [`oracle::eval_exact`].

pub mod camus;
pub mod error;
pub mod fixtures;
pub mod lowering;
pub mod nier;
pub mod onnx;
pub mod oracle;
pub mod rational;
pub mod solver;
pub mod verdict;

pub use error::{Error, Result};
pub use rational::Rational;
pub use verdict::{Counterexample, Status, Verdict};
