use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use nnsmt::camus::{Region, SimulatorSpec};
use nnsmt::rational::display;
use nnsmt::{Rational, Verdict};

/// What a `verify` or `oracle` run found, ready for printing.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub verdict: Verdict,
    /// Solver that answered, or `exhaustive enumeration`.
    pub engine: String,
    pub wall_time: Duration,
    pub artifacts: Vec<PathBuf>,
    /// Images evaluated, for enumeration runs.
    pub evaluations: Option<u64>,
    /// Rendered witness, when falsified.
    pub grid: Option<String>,
}

impl RunReport {
    pub fn new(verdict: Verdict, engine: String, wall_time: Duration, sim: &SimulatorSpec, zone: Option<&Region>) -> Self {
        let grid = verdict.counterexample().map(|c| render_grid(sim, &c.image, zone));
        Self { verdict, engine, wall_time, artifacts: Vec::new(), evaluations: None, grid }
    }

    pub fn exit_code(&self) -> i32 {
        self.verdict.status().exit_code()
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "status: {}", self.verdict.status())?;
        match &self.verdict {
            Verdict::Unknown(why) | Verdict::SolverError(why) if !why.is_empty() => {
                writeln!(f, "detail: {}", why.lines().next().unwrap_or_default())?
            }
            _ => {}
        }
        writeln!(f, "engine: {}", self.engine)?;
        writeln!(f, "wall time: {:.3} s", self.wall_time.as_secs_f64())?;
        if let Some(n) = self.evaluations {
            writeln!(f, "evaluations: {n}")?;
        }
        for a in &self.artifacts {
            writeln!(f, "artifact: {}", a.display())?;
        }
        if let Some(cex) = self.verdict.counterexample() {
            let confirmed = if cex.confirmed { "confirmed by exact evaluation" } else { "NOT confirmed" };
            writeln!(f, "counterexample ({confirmed}):")?;
            if let Some(params) = &cex.params {
                let cells: Vec<String> = params.iter().map(|(h, w)| format!("({h},{w})")).collect();
                writeln!(f, "obstacles: {}", if cells.is_empty() { "none".into() } else { cells.join(" ") })?;
            }
        }
        if let Some(grid) = &self.grid {
            f.write_str(grid)?;
        }
        Ok(())
    }
}

fn cell_text(sim: &SimulatorSpec, v: &Rational) -> String {
    if *v == sim.lo {
        "0".into()
    } else if *v == sim.hi {
        "1".into()
    } else {
        display(v)
    }
}

/// Text grid of the image, `0` at `lo` and `1` at `hi`, with the danger
/// zone inside a dashed frame.
pub fn render_grid(sim: &SimulatorSpec, image: &[Vec<Rational>], zone: Option<&Region>) -> String {
    let cells: Vec<Vec<String>> = image.iter().map(|row| row.iter().map(|v| cell_text(sim, v)).collect()).collect();
    let cw = cells.iter().flatten().map(String::len).max().unwrap_or(1);
    let width = sim.width;
    // Column of the first character of cell `c`; one separator column
    // before each cell holds the frame's side.
    let x = |c: usize| 1 + c * (cw + 1);
    let line_len = x(width) + 1;

    let frame_line = |z: &Region| {
        let mut line = vec![' '; line_len];
        let (from, to) = (x(z.left) - 1, x(z.left + z.width) - 1);
        for (i, ch) in line.iter_mut().enumerate().take(to + 1).skip(from) {
            *ch = if i == from || i == to { '+' } else if (i - from) % 2 == 1 { '-' } else { ' ' };
        }
        line.into_iter().collect::<String>().trim_end().to_string()
    };

    let mut out = String::new();
    for (h, row) in cells.iter().enumerate() {
        if let Some(z) = zone.filter(|z| z.top == h) {
            out.push_str(&frame_line(z));
            out.push('\n');
        }
        let mut line = vec![' '; line_len];
        for (c, text) in row.iter().enumerate() {
            for (k, ch) in format!("{text:>cw$}").chars().enumerate() {
                line[x(c) + k] = ch;
            }
        }
        if let Some(z) = zone.filter(|z| (z.top..z.top + z.height).contains(&h)) {
            line[x(z.left) - 1] = ':';
            line[x(z.left + z.width) - 1] = ':';
        }
        out.push_str(line.into_iter().collect::<String>().trim_end());
        out.push('\n');
        if let Some(z) = zone.filter(|z| z.top + z.height == h + 1) {
            out.push_str(&frame_line(z));
            out.push('\n');
        }
    }
    out
}
