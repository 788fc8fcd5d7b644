//! Property files: TOML documents with schema `nnsmt-property/1`.
//!
//! ```toml
//! schema = "nnsmt-property/1"
//!
//! [simulator]
//! height = 3
//! width = 3
//! domain = "binary"        # or "interval"
//! lo = 0                   # integers or strings such as "1/2", "0.25"
//! hi = 1
//!
//! [property]
//! kind = "danger-zone-alert"
//! danger_zone = { top = 1, left = 0, height = 2, width = 3 }
//! directive = { form = "two-logit", alert = 1, no_alert = 0 }
//!
//! [task]
//! logic = "QF_NRA"
//! ```
//!
//! `kind` is one of `danger-zone-alert`, `no-false-alert`,
//! `identity-reconstruction`, `tolerance-reconstruction` (with `epsilon`
//! and `norm = "linf" | "l1"`) or `io-contract` (with `pre` and `post`
//! lists of linear constraints). The danger zone defaults to the bottom
//! `ceil(height/2)` rows; the directive defaults to the two-logit form
//! shown. The threshold form is `{ form = "threshold", output = 0,
//! theta = "1/2" }`.

use std::path::Path;

use num_traits::Zero;
use serde::Deserialize;

use super::{Directive, Domain, LinearConstraint, Norm, PropertySpec, Region, SimulatorSpec};
use crate::error::{Error, Result};
use crate::lowering::Logic;
use crate::rational::{parse_rational, Rational};

pub const SCHEMA: &str = "nnsmt-property/1";

/// A parsed property file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskSpec {
    pub simulator: SimulatorSpec,
    pub property: PropertySpec,
    pub logic: Option<Logic>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Number {
    Int(i64),
    Str(String),
    Float(f64),
}

impl Number {
    fn to_rational(&self, key: &str) -> Result<Rational> {
        match self {
            Number::Int(i) => Ok(Rational::from_integer((*i).into())),
            Number::Str(s) => {
                parse_rational(s).ok_or_else(|| Error::InvalidSpec(format!("{key} = {s:?} is not a rational number")))
            }
            Number::Float(f) => Err(Error::InvalidSpec(format!(
                "{key} = {f} is a float; write it as a string such as \"{f}\" so it is read exactly"
            ))),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema: Option<String>,
    simulator: RawSimulator,
    property: RawProperty,
    task: Option<RawTask>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulator {
    height: usize,
    width: usize,
    domain: Option<String>,
    lo: Option<Number>,
    hi: Option<Number>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    top: usize,
    left: usize,
    height: usize,
    width: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDirective {
    form: String,
    alert: Option<usize>,
    no_alert: Option<usize>,
    output: Option<usize>,
    theta: Option<Number>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProperty {
    kind: String,
    danger_zone: Option<RawRegion>,
    directive: Option<RawDirective>,
    epsilon: Option<Number>,
    norm: Option<String>,
    #[serde(default)]
    pre: Vec<String>,
    #[serde(default)]
    post: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    logic: Option<String>,
}

fn simulator(raw: &RawSimulator) -> Result<SimulatorSpec> {
    let domain = match raw.domain.as_deref().unwrap_or("binary") {
        "binary" => Domain::Binary,
        "interval" => Domain::Interval,
        other => return Err(Error::InvalidSpec(format!("unknown pixel domain {other:?}"))),
    };
    let lo = raw.lo.as_ref().map(|n| n.to_rational("simulator.lo")).transpose()?.unwrap_or_else(Rational::zero);
    let hi = match &raw.hi {
        Some(n) => n.to_rational("simulator.hi")?,
        None => Rational::from_integer(1.into()),
    };
    let sim = SimulatorSpec { height: raw.height, width: raw.width, domain, lo, hi };
    sim.validate()?;
    Ok(sim)
}

fn directive(raw: Option<&RawDirective>) -> Result<Directive> {
    let Some(d) = raw else {
        return Ok(Directive::default());
    };
    match d.form.as_str() {
        "two-logit" => {
            if d.output.is_some() || d.theta.is_some() {
                return Err(Error::InvalidSpec("two-logit directive takes alert and no_alert only".into()));
            }
            Ok(Directive::TwoLogit { alert: d.alert.unwrap_or(1), no_alert: d.no_alert.unwrap_or(0) })
        }
        "threshold" => {
            if d.alert.is_some() || d.no_alert.is_some() {
                return Err(Error::InvalidSpec("threshold directive takes output and theta only".into()));
            }
            let theta = d
                .theta
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec("threshold directive needs theta".into()))?
                .to_rational("directive.theta")?;
            Ok(Directive::Threshold { output: d.output.unwrap_or(0), theta })
        }
        other => Err(Error::InvalidSpec(format!("unknown directive form {other:?}"))),
    }
}

fn property(raw: &RawProperty, sim: &SimulatorSpec) -> Result<PropertySpec> {
    let zone = || -> Result<Region> {
        let zone = match &raw.danger_zone {
            Some(r) => Region { top: r.top, left: r.left, height: r.height, width: r.width },
            None => Region::bottom_half(sim),
        };
        zone.check_within(sim)?;
        Ok(zone)
    };
    let constraints = |list: &[String]| list.iter().map(|s| LinearConstraint::parse(s)).collect::<Result<Vec<_>>>();
    let prop = match raw.kind.as_str() {
        "danger-zone-alert" => PropertySpec::DangerZoneAlert { zone: zone()?, directive: directive(raw.directive.as_ref())? },
        "no-false-alert" => PropertySpec::NoFalseAlert { zone: zone()?, directive: directive(raw.directive.as_ref())? },
        "identity-reconstruction" => PropertySpec::IdentityReconstruction,
        "tolerance-reconstruction" => {
            let epsilon = raw
                .epsilon
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec("tolerance-reconstruction needs epsilon".into()))?
                .to_rational("property.epsilon")?;
            let norm: Norm = raw.norm.as_deref().unwrap_or("linf").parse()?;
            PropertySpec::ToleranceReconstruction { epsilon, norm }
        }
        "io-contract" => PropertySpec::IoContract { pre: constraints(&raw.pre)?, post: constraints(&raw.post)? },
        other => return Err(Error::InvalidSpec(format!("unknown property kind {other:?}"))),
    };
    Ok(prop)
}

pub fn parse_task_spec(text: &str) -> Result<TaskSpec> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::InvalidSpec(e.message().to_string()))?;
    if let Some(schema) = &raw.schema {
        if schema != SCHEMA {
            return Err(Error::InvalidSpec(format!("unsupported schema {schema:?}, expected {SCHEMA:?}")));
        }
    }
    let simulator = simulator(&raw.simulator)?;
    let property = property(&raw.property, &simulator)?;
    let logic = raw.task.and_then(|t| t.logic).map(|l| l.parse()).transpose()?;
    Ok(TaskSpec { simulator, property, logic })
}

pub fn load_task_spec(path: &Path) -> Result<TaskSpec> {
    parse_task_spec(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camus::PropertyKind;

    #[test]
    fn minimal_file_defaults() {
        let spec = parse_task_spec(
            "[simulator]\nheight = 3\nwidth = 3\n[property]\nkind = \"danger-zone-alert\"\n",
        )
        .unwrap();
        assert_eq!(spec.simulator, SimulatorSpec::binary(3, 3));
        assert_eq!(spec.property, PropertySpec::danger_zone_alert(&spec.simulator));
        assert_eq!(spec.logic, None);
    }

    #[test]
    fn full_file() {
        let text = r#"
schema = "nnsmt-property/1"
[simulator]
height = 2
width = 2
domain = "interval"
lo = "-1/2"
hi = "0.5"
[property]
kind = "no-false-alert"
danger_zone = { top = 0, left = 1, height = 2, width = 1 }
directive = { form = "threshold", output = 0, theta = "1/4" }
[task]
logic = "QF_LRA"
"#;
        let spec = parse_task_spec(text).unwrap();
        assert_eq!(spec.simulator.domain, Domain::Interval);
        assert_eq!(spec.simulator.lo, Rational::new((-1).into(), 2.into()));
        assert_eq!(spec.logic, Some(Logic::QfLra));
        match spec.property {
            PropertySpec::NoFalseAlert { zone, directive } => {
                assert_eq!(zone.pixels(&spec.simulator), vec![1, 3]);
                assert!(matches!(directive, Directive::Threshold { output: 0, .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejections() {
        let base = "[simulator]\nheight = 2\nwidth = 2\n";
        let cases = [
            "[simulator]\nheight = 2\nwidth = 2\nlo = 0.5\n[property]\nkind = \"io-contract\"\n",
            "[simulator]\nheight = 2\nwidth = 2\nlo = 1\nhi = 1\n[property]\nkind = \"identity-reconstruction\"\n",
            &format!("{base}[property]\nkind = \"robustness\"\n"),
            &format!("{base}[property]\nkind = \"danger-zone-alert\"\ndanger_zone = {{ top = 1, left = 0, height = 2, width = 2 }}\n"),
            &format!("{base}[property]\nkind = \"tolerance-reconstruction\"\n"),
            &format!("{base}[property]\nkind = \"identity-reconstruction\"\ncolour = 1\n"),
            &format!("schema = \"other/2\"\n{base}[property]\nkind = \"identity-reconstruction\"\n"),
        ];
        for text in cases {
            assert!(matches!(parse_task_spec(text), Err(Error::InvalidSpec(_))), "{text}");
        }
        let l2 = format!("{base}[property]\nkind = \"tolerance-reconstruction\"\nepsilon = 0\nnorm = \"l2\"\n");
        assert!(matches!(parse_task_spec(&l2), Err(Error::UnsupportedNorm(_))));
    }

    #[test]
    fn io_contract_constraints() {
        let text = "[simulator]\nheight = 1\nwidth = 2\n[property]\nkind = \"io-contract\"\npre = [\"in0 = 0\"]\npost = [\"out0 >= 1/2\"]\n";
        let spec = parse_task_spec(text).unwrap();
        assert_eq!(spec.property.kind(), PropertyKind::IoContract);
    }
}
