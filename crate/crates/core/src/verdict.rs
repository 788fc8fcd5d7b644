use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::rational::Rational;

/// A concrete violating input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    /// Value of every input variable.
    pub assignment: BTreeMap<String, Rational>,
    /// `image[h][w]`.
    pub image: Vec<Vec<Rational>>,
    /// Pixels at the high value, for binary pixel domains.
    pub params: Option<BTreeSet<(usize, usize)>>,
    /// Whether exact evaluation of the network on `image` violates the
    /// property.
    pub confirmed: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Proven,
    Falsified(Counterexample),
    Unknown(String),
    Timeout,
    SolverError(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Status {
    Proven,
    Falsified,
    Unknown,
    Timeout,
    SolverError,
}

impl Verdict {
    pub fn status(&self) -> Status {
        match self {
            Verdict::Proven => Status::Proven,
            Verdict::Falsified(_) => Status::Falsified,
            Verdict::Unknown(_) => Status::Unknown,
            Verdict::Timeout => Status::Timeout,
            Verdict::SolverError(_) => Status::SolverError,
        }
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            Verdict::Falsified(c) => Some(c),
            _ => None,
        }
    }
}

impl Status {
    /// Process exit code: 0 proven, 1 falsified, 2 unknown or timeout,
    /// 3 error.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Proven => 0,
            Status::Falsified => 1,
            Status::Unknown | Status::Timeout => 2,
            Status::SolverError => 3,
        }
    }

    pub fn is_definitive(self) -> bool {
        matches!(self, Status::Proven | Status::Falsified)
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Proven => "proven",
            Status::Falsified => "falsified",
            Status::Unknown => "unknown",
            Status::Timeout => "timeout",
            Status::SolverError => "solver-error",
        })
    }
}
