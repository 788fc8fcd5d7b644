use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nnsmt::camus::{PropertySpec, Region, SimulatorSpec, VerificationTask};
use nnsmt::fixtures::{correct_alert_net, zero_net};
use nnsmt::solver::{run_solver, verify, verify_text, SolverConfig, SolverStatus};
use nnsmt::{Error, Status, Verdict};

fn z3() -> Option<SolverConfig> {
    let cfg = SolverConfig::preset("z3").unwrap();
    if cfg.is_available() {
        Some(cfg)
    } else {
        eprintln!("z3 not on PATH, skipping");
        None
    }
}

fn cvc5_shim() -> SolverConfig {
    let shim = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scripts/cvc5-shim.py");
    SolverConfig::new("cvc5", "python3", &[shim.to_str().unwrap(), "{file}"])
}

/// A fake solver: a shell snippet that ignores the task file.
fn fake(name: &str, script: &str) -> SolverConfig {
    SolverConfig::new(name, "sh", &["-c", script, "{file}"])
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn trivial_answers() {
    let Some(z3) = z3() else { return };
    let dir = tempfile::tempdir().unwrap();
    let sat = write(dir.path(), "sat.smt2", "(set-logic QF_LRA)\n(check-sat)\n");
    assert_eq!(run_solver(&sat, &z3).unwrap().status, SolverStatus::Sat);
    let unsat = write(
        dir.path(),
        "unsat.smt2",
        "(set-option :produce-models true)\n(set-logic QF_LRA)\n(declare-fun x () Real)\n(assert (= x 0))\n(assert (= x 1))\n(check-sat)\n(get-model)\n",
    );
    assert_eq!(run_solver(&unsat, &z3).unwrap().status, SolverStatus::Unsat);
}

#[test]
fn model_text_is_returned() {
    let Some(z3) = z3() else { return };
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "m.smt2",
        "(set-option :produce-models true)\n(set-logic QF_LRA)\n(declare-fun x () Real)\n(assert (= (* 2 x) (- 5)))\n(check-sat)\n(get-model)\n",
    );
    let out = run_solver(&f, &z3).unwrap();
    let model = nnsmt::solver::parse_model(&out.model_text).unwrap();
    assert_eq!(model["x"], nnsmt::fixtures::r(-5, 2));
}

#[test]
fn missing_executable() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.smt2", "(check-sat)\n");
    let cfg = SolverConfig::new("ghost", "/nonexistent/solver-binary", &[]);
    assert!(matches!(run_solver(&f, &cfg), Err(Error::SolverNotFound(_))));
}

#[test]
fn timeout_kills_the_process() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.smt2", "(check-sat)\n");
    let cfg = fake("sleepy", "sleep 10").with_timeout(Duration::from_millis(200));
    let start = Instant::now();
    assert!(matches!(run_solver(&f, &cfg), Err(Error::Timeout(_))));
    assert!(start.elapsed() < Duration::from_secs(3));
}

#[test]
fn unknown_and_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "t.smt2", "(check-sat)\n");
    assert_eq!(run_solver(&f, &fake("u", "echo unknown")).unwrap().status, SolverStatus::Unknown);
    assert!(matches!(
        run_solver(&f, &fake("g", "echo 'segfault' >&2; echo oops; exit 3")),
        Err(Error::NonzeroExit { code: Some(3), .. })
    ));
}

fn alert_task(correct: bool) -> VerificationTask {
    let sim = SimulatorSpec::binary(2, 2);
    let net = if correct { correct_alert_net(&sim, &Region::bottom_half(&sim)) } else { zero_net(&sim) };
    VerificationTask::new(net, sim.clone(), PropertySpec::danger_zone_alert(&sim)).unwrap()
}

#[test]
fn end_to_end_with_z3() {
    let Some(z3) = z3() else { return };
    let dir = tempfile::tempdir().unwrap();
    let proven = verify(&alert_task(true), std::slice::from_ref(&z3), &dir.path().join("a.smt2")).unwrap();
    assert_eq!(proven.verdict, Verdict::Proven);
    assert_eq!(proven.solver.as_deref(), Some("z3"));
    let falsified = verify(&alert_task(false), &[z3], &dir.path().join("b.smt2")).unwrap();
    let cex = falsified.verdict.counterexample().unwrap();
    assert!(cex.confirmed);
    assert!(cex.params.as_ref().unwrap().iter().any(|&(h, _)| h == 1));
}

#[test]
fn end_to_end_with_cvc5() {
    let cvc5 = cvc5_shim();
    let dir = tempfile::tempdir().unwrap();
    let probe = write(dir.path(), "p.smt2", "(set-logic QF_LRA)\n(check-sat)\n");
    if run_solver(&probe, &cvc5).is_err() {
        eprintln!("cvc5 bindings unavailable, skipping");
        return;
    }
    let proven = verify(&alert_task(true), std::slice::from_ref(&cvc5), &dir.path().join("a.smt2")).unwrap();
    assert_eq!(proven.verdict, Verdict::Proven);
    let falsified = verify(&alert_task(false), &[cvc5], &dir.path().join("b.smt2")).unwrap();
    assert!(falsified.verdict.counterexample().unwrap().confirmed);
}

#[test]
fn portfolio_takes_the_first_definitive_answer() {
    let Some(z3) = z3() else { return };
    let dir = tempfile::tempdir().unwrap();
    let configs = [fake("sleepy", "sleep 20"), fake("unsure", "echo unknown"), z3];
    let start = Instant::now();
    let out = verify(&alert_task(true), &configs, &dir.path().join("p.smt2")).unwrap();
    assert_eq!(out.verdict, Verdict::Proven);
    assert_eq!(out.solver.as_deref(), Some("z3"));
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn fallbacks_without_a_definitive_answer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.smt2");
    let slow = fake("sleepy", "sleep 10").with_timeout(Duration::from_millis(100));
    let out = verify(&alert_task(true), &[slow.clone(), fake("unsure", "echo unknown")], &path).unwrap();
    assert_eq!(out.verdict.status(), Status::Unknown);
    let out = verify(&alert_task(true), &[slow], &path).unwrap();
    assert_eq!(out.verdict, Verdict::Timeout);
    let out = verify(&alert_task(true), &[fake("broken", "echo boom; exit 1")], &path).unwrap();
    assert_eq!(out.verdict.status(), Status::SolverError);
}

#[test]
fn sat_without_model_request_is_unknown() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fake("silent", "echo sat");
    cfg.model_request = false;
    let path = dir.path().join("s.smt2");
    let out = verify(&alert_task(false), &[cfg], &path).unwrap();
    assert_eq!(out.verdict.status(), Status::Unknown);
    let stripped = std::fs::read_to_string(path.with_extension("nomodel.smt2")).unwrap();
    assert!(!stripped.contains("(get-model)"));
}

const ALL_ZERO_MODEL: &str = "sat\n(\n(define-fun actual_input_0_0_0_0 () Real 0.0)\n(define-fun actual_input_0_0_0_1 () Real 0.0)\n(define-fun actual_input_0_0_1_0 () Real 0.0)\n(define-fun actual_input_0_0_1_1 () Real 0.0)\n)";

#[test]
fn unconfirmed_model_is_an_encoding_bug() {
    let dir = tempfile::tempdir().unwrap();
    let task = alert_task(true);
    let liar = fake("liar", &format!("printf '{ALL_ZERO_MODEL}\\n'"));
    let text = nnsmt::camus::compose_task(&task).unwrap();
    let res = verify_text(&task, &text, &[liar], &dir.path().join("l.smt2"));
    assert!(matches!(res, Err(Error::EncodingBug(_))), "{res:?}");
}

#[test]
fn out_of_domain_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = ALL_ZERO_MODEL.replacen("Real 0.0", "Real (/ 1 2)", 1);
    let liar = fake("liar", &format!("printf '{model}\\n'"));
    let res = verify(&alert_task(false), &[liar], &dir.path().join("d.smt2"));
    assert!(matches!(res, Err(Error::DomainViolation { .. })), "{res:?}");
}

#[test]
fn portfolio_status_does_not_depend_on_the_winner() {
    let Some(z3) = z3() else { return };
    let cvc5 = cvc5_shim();
    let dir = tempfile::tempdir().unwrap();
    for (k, correct) in [true, false].into_iter().enumerate() {
        let task = alert_task(correct);
        let alone: Vec<Status> = [&z3, &cvc5]
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let path = dir.path().join(format!("{k}-{i}.smt2"));
                verify(&task, std::slice::from_ref(*c), &path).unwrap().verdict.status()
            })
            .collect();
        let both = verify(&task, &[z3.clone(), cvc5.clone()], &dir.path().join(format!("{k}-both.smt2"))).unwrap();
        assert_eq!(alone[0], alone[1]);
        assert_eq!(both.verdict.status(), alone[0]);
    }
}
