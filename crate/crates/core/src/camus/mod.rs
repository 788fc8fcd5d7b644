//! Simulator and property descriptions, and their compilation into SMT-LIB
//! constraints appended to a lowered network.
//!
//! The toy simulator renders a set `s` of one-pixel obstacles on an
//! `h x w` grid: pixel `(h, w)` is `hi` if `(h, w)` is in `s`, `lo`
//! otherwise. The property is negated in the emitted task, so `sat` means a
//! counterexample exists.

mod compose;
mod file;
pub mod linear;

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};

pub use compose::{compose_task, emit_input_constraints, emit_property_negation, VerificationTask};
pub use file::{load_task_spec, parse_task_spec, TaskSpec, SCHEMA};
pub use linear::{CmpOp, LinearConstraint, VarRef};

use crate::error::{Error, Result};
use crate::nier::TensorShape;
use crate::rational::{display, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    /// Each pixel is exactly `lo` or `hi`.
    Binary,
    /// Each pixel lies in `[lo, hi]`.
    Interval,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulatorSpec {
    pub height: usize,
    pub width: usize,
    pub domain: Domain,
    pub lo: Rational,
    pub hi: Rational,
}

impl SimulatorSpec {
    /// Binary `{0, 1}` pixels.
    pub fn binary(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            domain: Domain::Binary,
            lo: Rational::zero(),
            hi: Rational::from_integer(1.into()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidSpec("grid dimensions must be at least 1".into()));
        }
        if self.lo >= self.hi {
            return Err(Error::InvalidSpec(format!(
                "pixel bounds need lo < hi, got lo = {} and hi = {}",
                display(&self.lo),
                display(&self.hi)
            )));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Row-major pixel index.
    pub fn flat(&self, h: usize, w: usize) -> usize {
        h * self.width + w
    }

    pub fn coords(&self, flat: usize) -> (usize, usize) {
        (flat / self.width, flat % self.width)
    }

    /// Whether a model input of `shape` can carry this grid: `[1, 1, h, w]`
    /// or the flattened `[1, h*w]`.
    pub fn check_input_shape(&self, shape: &TensorShape) -> Result<()> {
        let ok = match shape.dims() {
            [1, 1, h, w] => *h == self.height && *w == self.width,
            [1, n] => *n == self.pixels(),
            _ => false,
        };
        if !ok {
            return Err(Error::ShapeMismatch {
                node: "<model input>".into(),
                expected: format!("[1, 1, {}, {}] or [1, {}]", self.height, self.width, self.pixels()),
                actual: shape.to_string(),
            });
        }
        Ok(())
    }

    /// `g(s)` as a row-major pixel vector.
    pub fn render(&self, s: &BTreeSet<(usize, usize)>) -> Vec<Rational> {
        (0..self.pixels())
            .map(|i| if s.contains(&self.coords(i)) { self.hi.clone() } else { self.lo.clone() })
            .collect()
    }

    /// Reconstruction target of a pixel value: 0 at `lo`, 1 at `hi`.
    pub fn param_value(&self, pixel: &Rational) -> Rational {
        (pixel - &self.lo) / (&self.hi - &self.lo)
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Region {
    /// The last `ceil(h/2)` rows.
    pub fn bottom_half(sim: &SimulatorSpec) -> Self {
        let rows = sim.height.div_ceil(2);
        Region { top: sim.height - rows, left: 0, height: rows, width: sim.width }
    }

    pub fn contains(&self, h: usize, w: usize) -> bool {
        (self.top..self.top + self.height).contains(&h) && (self.left..self.left + self.width).contains(&w)
    }

    pub fn check_within(&self, sim: &SimulatorSpec) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.top + self.height > sim.height || self.left + self.width > sim.width {
            return Err(Error::InvalidSpec(format!(
                "danger zone {self:?} is empty or outside the {}x{} grid",
                sim.height, sim.width
            )));
        }
        Ok(())
    }

    /// Row-major flat indices of the covered pixels.
    pub fn pixels(&self, sim: &SimulatorSpec) -> Vec<usize> {
        (0..sim.pixels()).filter(|&i| {
            let (h, w) = sim.coords(i);
            self.contains(h, w)
        })
        .collect()
    }
}

/// How the network signals "change direction".
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Directive {
    /// Alert iff `out[alert] > out[no_alert]`; ties mean no alert.
    TwoLogit { alert: usize, no_alert: usize },
    /// Alert iff `out[output] >= theta`.
    Threshold { output: usize, theta: Rational },
}

impl Default for Directive {
    fn default() -> Self {
        Directive::TwoLogit { alert: 1, no_alert: 0 }
    }
}

impl Directive {
    pub fn alerts(&self, outputs: &[Rational]) -> bool {
        match self {
            Directive::TwoLogit { alert, no_alert } => outputs[*alert] > outputs[*no_alert],
            Directive::Threshold { output, theta } => &outputs[*output] >= theta,
        }
    }

    fn max_index(&self) -> usize {
        match self {
            Directive::TwoLogit { alert, no_alert } => *alert.max(no_alert),
            Directive::Threshold { output, .. } => *output,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Norm {
    #[default]
    LInf,
    L1,
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linf" => Ok(Norm::LInf),
            "l1" => Ok(Norm::L1),
            other => Err(Error::UnsupportedNorm(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PropertyKind {
    DangerZoneAlert,
    NoFalseAlert,
    IdentityReconstruction,
    ToleranceReconstruction,
    IoContract,
}

impl PropertyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PropertyKind::DangerZoneAlert => "danger-zone-alert",
            PropertyKind::NoFalseAlert => "no-false-alert",
            PropertyKind::IdentityReconstruction => "identity-reconstruction",
            PropertyKind::ToleranceReconstruction => "tolerance-reconstruction",
            PropertyKind::IoContract => "io-contract",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PropertySpec {
    /// An obstacle in the zone always raises the alert.
    DangerZoneAlert { zone: Region, directive: Directive },
    /// An empty zone never raises the alert.
    NoFalseAlert { zone: Region, directive: Directive },
    /// The network reconstructs the parameters exactly: `p(g(s)) = s`.
    IdentityReconstruction,
    /// Reconstruction error within `epsilon` under `norm`.
    ToleranceReconstruction { epsilon: Rational, norm: Norm },
    /// `pre` implies `post`; both are conjunctions.
    IoContract { pre: Vec<LinearConstraint>, post: Vec<LinearConstraint> },
}

impl PropertySpec {
    pub fn kind(&self) -> PropertyKind {
        match self {
            PropertySpec::DangerZoneAlert { .. } => PropertyKind::DangerZoneAlert,
            PropertySpec::NoFalseAlert { .. } => PropertyKind::NoFalseAlert,
            PropertySpec::IdentityReconstruction => PropertyKind::IdentityReconstruction,
            PropertySpec::ToleranceReconstruction { .. } => PropertyKind::ToleranceReconstruction,
            PropertySpec::IoContract { .. } => PropertyKind::IoContract,
        }
    }

    pub fn danger_zone_alert(sim: &SimulatorSpec) -> Self {
        PropertySpec::DangerZoneAlert { zone: Region::bottom_half(sim), directive: Directive::default() }
    }

    pub fn no_false_alert(sim: &SimulatorSpec) -> Self {
        PropertySpec::NoFalseAlert { zone: Region::bottom_half(sim), directive: Directive::default() }
    }

    pub fn zone(&self) -> Option<&Region> {
        match self {
            PropertySpec::DangerZoneAlert { zone, .. } | PropertySpec::NoFalseAlert { zone, .. } => Some(zone),
            _ => None,
        }
    }

    /// Checks the property against the grid and the model's output count.
    pub fn validate(&self, sim: &SimulatorSpec, outputs: usize) -> Result<()> {
        match self {
            PropertySpec::DangerZoneAlert { zone, directive } | PropertySpec::NoFalseAlert { zone, directive } => {
                zone.check_within(sim)?;
                if directive.max_index() >= outputs {
                    return Err(Error::InvalidSpec(format!(
                        "directive refers to output {} but the model has {outputs}",
                        directive.max_index()
                    )));
                }
                if let Directive::TwoLogit { alert, no_alert } = directive {
                    if alert == no_alert {
                        return Err(Error::InvalidSpec("alert and no_alert outputs must differ".into()));
                    }
                }
            }
            PropertySpec::IdentityReconstruction | PropertySpec::ToleranceReconstruction { .. } => {
                if outputs != sim.pixels() {
                    return Err(Error::InvalidSpec(format!(
                        "reconstruction needs one output per pixel ({}), the model has {outputs}",
                        sim.pixels()
                    )));
                }
                if let PropertySpec::ToleranceReconstruction { epsilon, .. } = self {
                    if epsilon.is_negative() {
                        return Err(Error::InvalidSpec("epsilon must be >= 0".into()));
                    }
                }
            }
            PropertySpec::IoContract { pre, post } => {
                if post.is_empty() {
                    return Err(Error::InvalidSpec("io-contract needs at least one postcondition".into()));
                }
                for v in pre.iter().chain(post).flat_map(|c| c.vars()) {
                    let bad = match v {
                        VarRef::Input(k) => *k >= sim.pixels(),
                        VarRef::Output(k) => *k >= outputs,
                        VarRef::Named(_) => false,
                    };
                    if bad {
                        return Err(Error::MissingVariable(v.to_string()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether a concrete image and the network's exact outputs on it
    /// violate the property. `image` is row-major; named variables in an
    /// io-contract resolve through `named`.
    pub fn violated_with(
        &self,
        sim: &SimulatorSpec,
        image: &[Rational],
        outputs: &[Rational],
        named: &dyn Fn(&str) -> Option<Rational>,
    ) -> bool {
        let occupied = |zone: &Region| zone.pixels(sim).iter().any(|&i| image[i] == sim.hi);
        let errors = || image.iter().zip(outputs).map(|(p, o)| o - sim.param_value(p));
        match self {
            PropertySpec::DangerZoneAlert { zone, directive } => occupied(zone) && !directive.alerts(outputs),
            PropertySpec::NoFalseAlert { zone, directive } => {
                zone.pixels(sim).iter().all(|&i| image[i] == sim.lo) && directive.alerts(outputs)
            }
            PropertySpec::IdentityReconstruction => errors().any(|e| !e.is_zero()),
            PropertySpec::ToleranceReconstruction { epsilon, norm } => match norm {
                Norm::LInf => errors().any(|e| &e.abs() > epsilon),
                Norm::L1 => &errors().fold(Rational::zero(), |acc, e| acc + e.abs()) > epsilon,
            },
            PropertySpec::IoContract { pre, post } => {
                let value = |v: &VarRef| match v {
                    VarRef::Input(k) => image.get(*k).cloned(),
                    VarRef::Output(k) => outputs.get(*k).cloned(),
                    VarRef::Named(n) => named(n),
                };
                pre.iter().all(|c| c.holds(&value) == Some(true)) && post.iter().any(|c| c.holds(&value) == Some(false))
            }
        }
    }

    /// [`violated_with`](Self::violated_with) for properties that only
    /// mention `in<k>` and `out<k>`.
    pub fn violated(&self, sim: &SimulatorSpec, image: &[Rational], outputs: &[Rational]) -> bool {
        self.violated_with(sim, image, outputs, &|_| None)
    }
}
