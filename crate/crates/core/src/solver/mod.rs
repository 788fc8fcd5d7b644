//! External SMT solver invocation, model parsing and counterexample
//! confirmation.

mod model;
mod process;
mod verify;

use std::path::{Path, PathBuf};
use std::time::Duration;

pub use model::parse_model;
pub use process::{run_solver, run_solver_cancellable, RawOutcome, SolverStatus};
pub use verify::{
    confirm_counterexample, reconstruct_input, verify, verify_text, ReconstructedInput, VerifyOutcome,
};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// How to run one solver. `{file}` in `args` is replaced by the task path;
/// if no argument mentions it, the path is appended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub name: String,
    pub executable: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
    /// Keep the task's `(get-model)` command. Without it a `sat` answer
    /// cannot be confirmed and is reported as unknown.
    pub model_request: bool,
}

/// Names accepted by [`SolverConfig::preset`].
pub const PRESETS: [&str; 5] = ["z3", "cvc5", "cvc4", "yices", "colibri"];

impl SolverConfig {
    pub fn new(name: impl Into<String>, executable: impl Into<PathBuf>, args: &[&str]) -> Self {
        Self {
            name: name.into(),
            executable: executable.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
            timeout: DEFAULT_TIMEOUT,
            model_request: true,
        }
    }

    /// Default invocation of a known solver, looked up on `PATH` by its
    /// usual executable name.
    pub fn preset(name: &str) -> Option<Self> {
        let (exe, args): (&str, &[&str]) = match name {
            "z3" => ("z3", &["-smt2", "{file}"]),
            "cvc5" => ("cvc5", &["--lang=smt2", "--produce-models", "{file}"]),
            "cvc4" => ("cvc4", &["--lang=smt2", "--produce-models", "{file}"]),
            "yices" => ("yices-smt2", &["{file}"]),
            "colibri" => ("colibri", &["{file}"]),
            _ => return None,
        };
        Some(Self::new(name, exe, args))
    }

    /// A preset name, or a path to an executable (which then gets the
    /// preset arguments matching its file name, or just the task path).
    pub fn from_name_or_path(spec: &str) -> Self {
        if let Some(cfg) = Self::preset(spec) {
            return cfg;
        }
        let path = Path::new(spec);
        let stem = path.file_name().and_then(|s| s.to_str()).unwrap_or(spec);
        let preset = match stem {
            "yices-smt2" => Self::preset("yices"),
            other => Self::preset(other),
        };
        match preset {
            Some(mut cfg) => {
                cfg.executable = path.to_path_buf();
                cfg
            }
            None => Self::new(stem, path, &["{file}"]),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Whether the executable can be found, either as a path or on `PATH`.
    pub fn is_available(&self) -> bool {
        resolve_executable(&self.executable).is_some()
    }

    fn command_args(&self, file: &Path) -> Vec<String> {
        let file = file.to_string_lossy();
        let mut args: Vec<String> = self.args.iter().map(|a| a.replace("{file}", &file)).collect();
        if !self.args.iter().any(|a| a.contains("{file}")) {
            args.push(file.into_owned());
        }
        args
    }
}

/// Full path of `exe`, searching `PATH` when it has no directory part.
pub fn resolve_executable(exe: &Path) -> Option<PathBuf> {
    if exe.components().count() > 1 {
        return exe.is_file().then(|| exe.to_path_buf());
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|dir| dir.join(exe)).find(|p| p.is_file())
}
