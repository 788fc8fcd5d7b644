//! `nnsmt`: translate ONNX networks to SMT-LIB, verify properties with
//! external solvers, and cross-check them by exhaustive enumeration.
//!
//! Exit codes: 0 proven, 1 falsified, 2 unknown or timeout, 3 error.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nnsmt::camus::{compose_task, load_task_spec, Region, SimulatorSpec, TaskSpec, VerificationTask};
use nnsmt::fixtures;
use nnsmt::lowering::{emit_smtlib, lower_graph_with, EmitOptions, Logic, LoweringOptions};
use nnsmt::nier::{dump, rewrite, NierGraph, RewriteRules};
use nnsmt::onnx::{parse_onnx, to_nier, to_onnx};
use nnsmt::oracle::{brute_force_verify, DEFAULT_MAX_ENUM_BITS};
use nnsmt::solver::{verify, SolverConfig, DEFAULT_TIMEOUT, PRESETS};
use nnsmt::Error;

use config::RunConfig;
use report::RunReport;

const ERROR_EXIT: u8 = 3;

#[derive(Parser)]
#[command(name = "nnsmt", version, about = "ONNX to SMT-LIB verification compiler")]
struct Cli {
    /// Run configuration file (TOML); flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate a network (and optionally a property) to SMT-LIB.
    Translate {
        model: PathBuf,
        /// Property file; without it only the network is emitted.
        spec: Option<PathBuf>,
        #[command(flatten)]
        emit: EmitArgs,
        /// Output file; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a property with one or more SMT solvers.
    Verify {
        model: PathBuf,
        spec: PathBuf,
        #[command(flatten)]
        emit: EmitArgs,
        /// Solver preset (z3, cvc5, cvc4, yices, colibri) or executable path.
        /// Repeat to list several.
        #[arg(long = "solver", value_name = "NAME|PATH")]
        solvers: Vec<String>,
        /// Per-solver timeout in seconds.
        #[arg(long, value_name = "SECONDS")]
        timeout: Option<f64>,
        /// Run all listed solvers concurrently (all installed presets if none
        /// is listed); the first definitive answer wins.
        #[arg(long)]
        portfolio: bool,
        /// Where to write the task file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a property by evaluating every image of a binary grid.
    Oracle {
        model: PathBuf,
        spec: PathBuf,
        /// Largest grid to enumerate, in pixels (2^N images).
        #[arg(long, value_name = "N")]
        max_enum: Option<u32>,
    },
    /// Print the intermediate representation of a model.
    Dump {
        model: PathBuf,
        /// Apply the rewriting passes first.
        #[arg(long)]
        rewrite: bool,
    },
    /// Write one of the built-in demo networks as ONNX.
    Fixture {
        kind: FixtureKind,
        #[arg(long, default_value_t = 3)]
        height: usize,
        #[arg(long, default_value_t = 3)]
        width: usize,
        /// Seed for `random`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EmitArgs {
    /// QF_NRA (default), QF_LRA or QF_LIRA.
    #[arg(long)]
    logic: Option<String>,
    /// Spell negative literals `(/ -n d)` instead of `(- (/ n d))`.
    #[arg(long)]
    fig5_compat: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    /// Alerts iff the bottom half holds an obstacle.
    Correct,
    /// All weights zero; never alerts.
    Zero,
    /// Ignores the last pixel of the bottom half.
    Missed,
    /// Also alerts on pixel (0, 0).
    FalseAlarm,
    /// Always alerts.
    AlwaysAlert,
    /// Convolutional variant of `correct`.
    Conv,
    /// Random weights, two hidden layers.
    Random,
    /// Identity reconstruction network.
    Identity,
}

fn load_model(path: &Path) -> Result<NierGraph> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(to_nier(&parse_onnx(&bytes)?)?)
}

fn emit_options(args: &EmitArgs, spec: Option<&TaskSpec>, cfg: &RunConfig) -> Result<EmitOptions> {
    let logic = match (&args.logic, spec.and_then(|s| s.logic), &cfg.logic) {
        (Some(flag), _, _) => flag.parse()?,
        (None, Some(from_spec), _) => from_spec,
        (None, None, Some(from_cfg)) => from_cfg.parse()?,
        _ => Logic::default(),
    };
    Ok(EmitOptions { logic, fig5_compat: args.fig5_compat || cfg.fig5_compat.unwrap_or(false) })
}

fn write_or_print(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_task(model: &Path, spec: &Path, emit: EmitOptions) -> Result<VerificationTask> {
    let graph = load_model(model)?;
    let spec = load_task_spec(spec)?;
    Ok(VerificationTask::new(graph, spec.simulator, spec.property)?.with_emit(emit))
}

fn cmd_translate(model: &Path, spec: Option<&Path>, emit: &EmitArgs, out: Option<&Path>, cfg: &RunConfig) -> Result<()> {
    let text = match spec {
        Some(spec_path) => {
            let spec = load_task_spec(spec_path)?;
            let opts = emit_options(emit, Some(&spec), cfg)?;
            compose_task(&load_task(model, spec_path, opts)?)?
        }
        None => {
            let opts = emit_options(emit, None, cfg)?;
            let cs = lower_graph_with(&load_model(model)?, &LoweringOptions { weights: opts.logic.weight_mode() })?;
            emit_smtlib(&cs, &opts)?
        }
    };
    write_or_print(&text, out)
}

fn solver_configs(names: &[String], portfolio: bool, timeout: Duration) -> Result<Vec<SolverConfig>> {
    let mut configs: Vec<SolverConfig> = names.iter().map(|n| SolverConfig::from_name_or_path(n)).collect();
    if configs.is_empty() {
        configs = if portfolio {
            PRESETS.iter().filter_map(|p| SolverConfig::preset(p)).filter(SolverConfig::is_available).collect()
        } else {
            vec![SolverConfig::preset("z3").expect("preset")]
        };
        if configs.is_empty() {
            bail!("no SMT solver found on PATH (tried {})", PRESETS.join(", "));
        }
    }
    if !portfolio {
        configs.truncate(1);
    }
    Ok(configs.into_iter().map(|c| c.with_timeout(timeout)).collect())
}

fn default_task_path(model: &Path, task: &VerificationTask) -> Result<PathBuf> {
    let dir = std::env::temp_dir().join("nnsmt");
    std::fs::create_dir_all(&dir)?;
    let stem = model.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    Ok(dir.join(format!("{stem}.{}.smt2", task.property.kind().as_str())))
}

struct VerifyArgs<'a> {
    model: &'a Path,
    spec: &'a Path,
    emit: &'a EmitArgs,
    solvers: &'a [String],
    timeout: Option<f64>,
    portfolio: bool,
    out: Option<&'a Path>,
}

fn cmd_verify(a: VerifyArgs<'_>, cfg: &RunConfig) -> Result<RunReport> {
    let spec = load_task_spec(a.spec)?;
    let task = load_task(a.model, a.spec, emit_options(a.emit, Some(&spec), cfg)?)?;
    let seconds = a.timeout.or(cfg.timeout);
    let timeout = match seconds {
        Some(s) if s.is_finite() && s > 0.0 => Duration::from_secs_f64(s),
        Some(s) => bail!("timeout must be a positive number of seconds, got {s}"),
        None => DEFAULT_TIMEOUT,
    };
    let names = if a.solvers.is_empty() { cfg.solvers.as_slice() } else { a.solvers };
    let portfolio = a.portfolio || cfg.portfolio.unwrap_or(false);
    let configs = solver_configs(names, portfolio, timeout)?;
    let path = match a.out {
        Some(p) => p.to_path_buf(),
        None => default_task_path(a.model, &task)?,
    };
    let outcome = verify(&task, &configs, &path)?;
    let engine = outcome.solver.clone().unwrap_or_else(|| "none".into());
    let mut report =
        RunReport::new(outcome.verdict, engine, outcome.elapsed, &task.simulator, task.property.zone());
    report.artifacts.push(path.clone());
    let bare = path.with_extension("nomodel.smt2");
    if configs.iter().any(|c| !c.model_request) && bare.exists() {
        report.artifacts.push(bare);
    }
    Ok(report)
}

fn cmd_oracle(model: &Path, spec: &Path, max_enum: Option<u32>, cfg: &RunConfig) -> Result<RunReport> {
    let graph = load_model(model)?;
    let spec = load_task_spec(spec)?;
    let cap = max_enum.or(cfg.max_enum).unwrap_or(DEFAULT_MAX_ENUM_BITS);
    let start = Instant::now();
    let result = brute_force_verify(&graph, &spec.simulator, &spec.property, cap);
    let found = match result {
        Err(Error::GridTooLarge { pixels, cap_bits }) => bail!(
            "grid of {pixels} pixels needs 2^{pixels} images, above the cap of 2^{cap_bits}; raise --max-enum to enumerate it"
        ),
        other => other?,
    };
    let zone: Option<Region> = spec.property.zone().copied();
    let mut report = RunReport::new(
        found.verdict,
        "exhaustive enumeration".into(),
        start.elapsed(),
        &spec.simulator,
        zone.as_ref(),
    );
    report.evaluations = Some(found.evaluations);
    Ok(report)
}

fn cmd_fixture(kind: FixtureKind, height: usize, width: usize, seed: u64, out: &Path) -> Result<()> {
    let sim = SimulatorSpec::binary(height, width);
    sim.validate()?;
    let zone = Region::bottom_half(&sim);
    let graph = match kind {
        FixtureKind::Correct => fixtures::correct_alert_net(&sim, &zone),
        FixtureKind::Zero => fixtures::zero_net(&sim),
        FixtureKind::Missed => fixtures::missed_pixel_net(&sim, &zone),
        FixtureKind::FalseAlarm => fixtures::false_alarm_net(&sim, &zone),
        FixtureKind::AlwaysAlert => fixtures::always_alert_net(&sim),
        FixtureKind::Conv => fixtures::conv_alert_net(&sim, &zone),
        FixtureKind::Random => fixtures::random_mlp(&sim, seed),
        FixtureKind::Identity => fixtures::identity_net(&sim, None),
    };
    std::fs::write(out, to_onnx(&graph)?).with_context(|| format!("writing {}", out.display()))
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Translate { model, spec, emit, out } => {
            cmd_translate(model, spec.as_deref(), emit, out.as_deref(), &cfg)?;
            Ok(0)
        }
        Command::Verify { model, spec, emit, solvers, timeout, portfolio, out } => {
            let args = VerifyArgs {
                model,
                spec,
                emit,
                solvers,
                timeout: *timeout,
                portfolio: *portfolio,
                out: out.as_deref(),
            };
            let report = cmd_verify(args, &cfg)?;
            print!("{report}");
            Ok(report.exit_code() as u8)
        }
        Command::Oracle { model, spec, max_enum } => {
            let report = cmd_oracle(model, spec, *max_enum, &cfg)?;
            print!("{report}");
            Ok(report.exit_code() as u8)
        }
        Command::Dump { model, rewrite: apply } => {
            let mut graph = load_model(model)?;
            if *apply {
                graph = rewrite(&graph, &RewriteRules::default())?;
            }
            print!("{}", dump(&graph));
            Ok(0)
        }
        Command::Fixture { kind, height, width, seed, out } => {
            cmd_fixture(*kind, *height, *width, *seed, out)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ERROR_EXIT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(ERROR_EXIT)
        }
    }
}
