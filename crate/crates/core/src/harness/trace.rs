//! Execution traces and their line-oriented record format.
//!
//! Format (UTF-8, LF line endings):
//!
//! ```text
//! # consensus-lab trace v1
//! protocol=swap
//! n=3
//! ell=-            (or the capacity)
//! variant=-        (or the variant name)
//! inputs=2,0,1
//! steps=5
//! 0<TAB>1<TAB>0<TAB>read()<TAB>[...]<TAB>-
//! ...
//! ```
//!
//! Step columns: step index, process, location, instruction, response, and
//! the decided value if the step decided (`-` otherwise). Replay only needs
//! the header and the process column: instructions and responses are
//! regenerated deterministically and compared against the recorded text.

use crate::memory::{Instruction, Response};
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub index: u64,
    pub pid: usize,
    pub location: u64,
    pub instruction: Instruction,
    pub response: Response,
    pub decided: Option<Value>,
}

/// Replayable record of one execution.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ExecutionTrace {
    pub protocol: String,
    pub n: usize,
    pub ell: Option<usize>,
    pub variant: Option<String>,
    pub inputs: Vec<i64>,
    pub steps: Vec<TraceStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceParseError {
    #[error("line {0}: {1}")]
    Line(usize, String),
    #[error("missing header field {0}")]
    MissingHeader(&'static str),
}

impl ExecutionTrace {
    /// The schedule that produced this trace: its process column.
    pub fn schedule(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.pid).collect()
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        out.push_str("# consensus-lab trace v1\n");
        let _ = writeln!(out, "protocol={}", self.protocol);
        let _ = writeln!(out, "n={}", self.n);
        match self.ell {
            Some(ell) => {
                let _ = writeln!(out, "ell={ell}");
            }
            None => out.push_str("ell=-\n"),
        }
        match &self.variant {
            Some(v) => {
                let _ = writeln!(out, "variant={v}");
            }
            None => out.push_str("variant=-\n"),
        }
        let inputs: Vec<String> = self.inputs.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "inputs={}", inputs.join(","));
        let _ = writeln!(out, "steps={}", self.steps.len());
        for s in &self.steps {
            let decided = match &s.decided {
                Some(v) => v.to_string(),
                None => "-".into(),
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                s.index, s.pid, s.location, s.instruction, s.response, decided
            );
        }
        out
    }

    /// Parses the header and the process column; instruction, response, and
    /// decided columns are kept only as text inside `raw_lines` comparisons
    /// by callers that need bit-exact replay checks.
    pub fn parse_header_and_schedule(
        text: &str,
    ) -> Result<(ExecutionTrace, Vec<usize>), TraceParseError> {
        let mut trace = ExecutionTrace::default();
        let mut schedule = Vec::new();
        let mut have = [false; 4]; // protocol, n, inputs, steps
        for (lineno, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            if let Some((key, val)) = line.split_once('=') {
                match key {
                    "protocol" => {
                        trace.protocol = val.to_string();
                        have[0] = true;
                    }
                    "n" => {
                        trace.n = val
                            .parse()
                            .map_err(|e| TraceParseError::Line(lineno + 1, format!("n: {e}")))?;
                        have[1] = true;
                    }
                    "ell" => {
                        trace.ell = if val == "-" {
                            None
                        } else {
                            Some(val.parse().map_err(|e| {
                                TraceParseError::Line(lineno + 1, format!("ell: {e}"))
                            })?)
                        };
                    }
                    "variant" => {
                        trace.variant = if val == "-" { None } else { Some(val.to_string()) };
                    }
                    "inputs" => {
                        trace.inputs = val
                            .split(',')
                            .filter(|s| !s.is_empty())
                            .map(|s| s.trim().parse())
                            .collect::<Result<_, _>>()
                            .map_err(|e| {
                                TraceParseError::Line(lineno + 1, format!("inputs: {e}"))
                            })?;
                        have[2] = true;
                    }
                    "steps" => {
                        have[3] = true;
                    }
                    _ => {
                        return Err(TraceParseError::Line(lineno + 1, format!("unknown key {key}")))
                    }
                }
                continue;
            }
            // Step line: second column is the pid.
            let mut cols = line.split('\t');
            let _idx = cols.next();
            let pid: usize = cols
                .next()
                .ok_or_else(|| TraceParseError::Line(lineno + 1, "missing pid column".into()))?
                .parse()
                .map_err(|e| TraceParseError::Line(lineno + 1, format!("pid: {e}")))?;
            schedule.push(pid);
        }
        if !have[0] {
            return Err(TraceParseError::MissingHeader("protocol"));
        }
        if !have[1] {
            return Err(TraceParseError::MissingHeader("n"));
        }
        if !have[2] {
            return Err(TraceParseError::MissingHeader("inputs"));
        }
        Ok((trace, schedule))
    }
}
