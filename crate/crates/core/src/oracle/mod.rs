//! Exact-rational reference evaluator and brute-force property check.

mod brute;
mod eval;
pub(crate) mod kernels;

pub use brute::{brute_force_verify, params_of_index, BruteForceReport, DEFAULT_MAX_ENUM_BITS};
pub use eval::{eval_exact, eval_exact_many, ExactActivationTrace};
