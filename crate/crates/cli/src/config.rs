//! Optional run configuration file. Command-line flags override it.
//!
//! ```toml
//! logic = "QF_LRA"
//! solvers = ["z3", "/opt/cvc5/bin/cvc5"]
//! timeout = 30          # seconds
//! portfolio = true
//! max_enum = 20         # enumeration cap, in pixels
//! fig5_compat = false
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub logic: Option<String>,
    #[serde(default)]
    pub solvers: Vec<String>,
    pub timeout: Option<f64>,
    pub portfolio: Option<bool>,
    pub max_enum: Option<u32>,
    pub fig5_compat: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let c: RunConfig = toml::from_str("logic = \"QF_LRA\"\nsolvers = [\"z3\"]\ntimeout = 2.5").unwrap();
        assert_eq!(c.logic.as_deref(), Some("QF_LRA"));
        assert_eq!(c.timeout, Some(2.5));
        assert!(toml::from_str::<RunConfig>("solver = \"z3\"").is_err());
    }
}
