use std::io::{ErrorKind, Read};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use super::SolverConfig;
use crate::error::{Error, Result};

const POLL: Duration = Duration::from_millis(5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverStatus {
    Sat,
    Unsat,
    Unknown,
}

/// What a solver printed for one `(check-sat)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawOutcome {
    pub status: SolverStatus,
    /// Everything after the status line.
    pub model_text: String,
    pub stdout: String,
    pub stderr: String,
    pub elapsed: Duration,
}

fn read_all(mut r: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    if let Ok(pid) = i32::try_from(child.id()) {
        // SAFETY: signalling the process group created at spawn.
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
    let _ = child.kill();
    let _ = child.wait();
}

/// Runs the solver on `file`, killing it after `cfg.timeout`.
pub fn run_solver(file: &Path, cfg: &SolverConfig) -> Result<RawOutcome> {
    let never = AtomicBool::new(false);
    run_solver_cancellable(file, cfg, &never).map(|o| o.expect("not cancelled"))
}

/// [`run_solver`] that also stops, returning `Ok(None)`, once `cancel` is
/// set.
pub fn run_solver_cancellable(file: &Path, cfg: &SolverConfig, cancel: &AtomicBool) -> Result<Option<RawOutcome>> {
    if cfg.timeout.is_zero() {
        return Err(Error::InvalidSpec("solver timeout must be positive".into()));
    }
    let start = Instant::now();
    let mut command = Command::new(&cfg.executable);
    // Own process group, so a wrapper script's children die with it.
    #[cfg(unix)]
    std::os::unix::process::CommandExt::process_group(&mut command, 0);
    let mut child = command
        .args(cfg.command_args(file))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            ErrorKind::NotFound | ErrorKind::PermissionDenied => Error::SolverNotFound(cfg.executable.clone()),
            _ => Error::Io(e),
        })?;
    let stdout = read_all(child.stdout.take().expect("piped"));
    let stderr = read_all(child.stderr.take().expect("piped"));

    let exit = loop {
        if let Some(status) = child.try_wait()? {
            break Some(status);
        }
        if cancel.load(Ordering::Relaxed) || start.elapsed() >= cfg.timeout {
            kill_tree(&mut child);
            break None;
        }
        thread::sleep(POLL);
    };
    let elapsed = start.elapsed();
    let Some(exit) = exit else {
        // Readers are left to finish on their own.
        if cancel.load(Ordering::Relaxed) {
            return Ok(None);
        }
        return Err(Error::Timeout(cfg.timeout));
    };
    let stdout = stdout.join().unwrap_or_default();
    let stderr = stderr.join().unwrap_or_default();

    // The verdict is the first output line; diagnostics that follow it
    // (such as a refused get-model after unsat) do not change it.
    let mut lines = stdout.lines();
    let first = lines.by_ref().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let status = match first {
        "sat" => SolverStatus::Sat,
        "unsat" => SolverStatus::Unsat,
        "unknown" => SolverStatus::Unknown,
        _ => {
            let mut detail = stderr.trim().to_string();
            if detail.is_empty() {
                detail = stdout.trim().to_string();
            }
            return Err(Error::NonzeroExit { code: exit.code(), stderr: detail });
        }
    };
    let model_text = lines.collect::<Vec<_>>().join("\n");
    Ok(Some(RawOutcome { status, model_text, stdout, stderr, elapsed }))
}
