//! Backend that delegates to an external program.
//!
//! The program receives the problem in the LMI text form on stdin and answers
//! on stdout with
//!
//! ```text
//! status <feasible|infeasible|failure> [free-form detail]
//! x <x_0> <x_1> ... <x_{n-1}>
//! ```
//!
//! The `x` line is required for `feasible`. The solver tolerance and iteration
//! limit are passed as the environment variables `LUREPWA_SOLVER_TOL` and
//! `LUREPWA_SOLVER_MAX_ITER`.

use std::io::Write;
use std::process::{Command, Stdio};

use super::{Backend, BackendResult, BackendStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::lmi::LmiProblem;

#[derive(Debug, Clone)]
pub struct CommandBackend {
    pub program: String,
    pub args: Vec<String>,
}

impl Backend for CommandBackend {
    fn name(&self) -> &str {
        &self.program
    }

    fn solve(&self, problem: &LmiProblem, opts: &SolverOptions) -> Result<BackendResult> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .env("LUREPWA_SOLVER_TOL", opts.feasibility_tolerance.to_string())
            .env("LUREPWA_SOLVER_MAX_ITER", opts.max_iterations.to_string())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Backend(format!("cannot start `{}`: {e}", self.program)))?;
        let text = problem.to_text();
        child
            .stdin
            .take()
            .expect("stdin is piped")
            .write_all(text.as_bytes())
            .map_err(|e| Error::Backend(format!("writing problem: {e}")))?;
        let out = child
            .wait_with_output()
            .map_err(|e| Error::Backend(format!("waiting for backend: {e}")))?;
        let stdout = String::from_utf8_lossy(&out.stdout);
        let stderr = String::from_utf8_lossy(&out.stderr).into_owned();
        if !out.status.success() {
            return Err(Error::Backend(format!(
                "`{}` exited with {}: {}",
                self.program,
                out.status,
                stderr.trim()
            )));
        }
        parse_answer(&stdout, problem.num_entries(), stderr)
    }
}

fn parse_answer(stdout: &str, n: usize, log: String) -> Result<BackendResult> {
    let mut status = None;
    let mut raw_status = String::new();
    let mut x = Vec::new();
    for line in stdout.lines() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("status") => {
                raw_status = tok.clone().collect::<Vec<_>>().join(" ");
                status = Some(match tok.next() {
                    Some("feasible") => BackendStatus::Feasible,
                    Some("infeasible") => BackendStatus::Infeasible,
                    Some("failure") => BackendStatus::Failure,
                    other => {
                        return Err(Error::Backend(format!("unknown status {other:?}")));
                    }
                });
            }
            Some("x") => {
                x = tok
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Backend(format!("bad solution value: {e}")))?;
            }
            _ => {}
        }
    }
    let status = status.ok_or_else(|| Error::Backend("backend printed no status line".into()))?;
    if status == BackendStatus::Feasible && x.len() != n {
        return Err(Error::Backend(format!(
            "feasible answer with {} values for {n} unknowns",
            x.len()
        )));
    }
    Ok(BackendResult {
        status,
        x,
        raw_status,
        log,
    })
}
